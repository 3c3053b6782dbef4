#include "idgi/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "binary_io.hpp"
#include "idgi/errors.hpp"
#include "idgi/rng.hpp"

namespace idgi {

// ---- interface helpers ----------------------------------------------------

double DifferentiableModel::score(const ImageTensor& x, int c) const {
  check_class(c);
  return predict(x)[static_cast<std::size_t>(c)];
}

int DifferentiableModel::argmax(const ImageTensor& x) const {
  const auto p = predict(x);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

void DifferentiableModel::check_input(const ImageTensor& x) const {
  const Shape s = input_shape();
  if (!(x.shape() == s)) {
    throw InvalidArgument("input shape " + std::to_string(x.height()) + "x" +
                          std::to_string(x.width()) + "x" + std::to_string(x.channels()) +
                          " does not match model shape " + std::to_string(s.height) + "x" +
                          std::to_string(s.width) + "x" + std::to_string(s.channels));
  }
}

void DifferentiableModel::check_class(int c) const {
  if (c < 0 || c >= num_classes()) {
    throw InvalidArgument("class index " + std::to_string(c) + " out of range [0, " +
                          std::to_string(num_classes()) + ")");
  }
}

std::vector<double> softmax(const std::vector<double>& logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - top);
    total += p[k];
  }
  for (double& v : p) v /= total;
  return p;
}

namespace {

void require_finite(const std::vector<double>& v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw InvalidArgument(std::string(what) + " must be finite");
  }
}

}  // namespace

// ---- LinearSoftmaxModel -----------------------------------------------------

LinearSoftmaxModel::LinearSoftmaxModel(Shape input_shape, std::vector<double> weights,
                                       std::vector<double> biases, Output output)
    : shape_(input_shape), weights_(std::move(weights)), biases_(std::move(biases)),
      output_(output) {
  if (biases_.empty()) throw InvalidArgument("linear model needs at least one class");
  if (weights_.size() != biases_.size() * shape_.size()) {
    throw InvalidArgument("linear model weight count does not match classes x input size");
  }
  require_finite(weights_, "linear weights");
  require_finite(biases_, "linear biases");
}

std::vector<double> LinearSoftmaxModel::logits(const ImageTensor& x) const {
  check_input(x);
  const std::size_t d = shape_.size();
  std::vector<double> z(biases_);
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double* w = weights_.data() + k * d;
    for (std::size_t i = 0; i < d; ++i) z[k] += w[i] * x[i];
  }
  return z;
}

std::vector<double> LinearSoftmaxModel::predict(const ImageTensor& x) const {
  auto z = logits(x);
  return output_ == Output::kSoftmax ? softmax(z) : z;
}

double LinearSoftmaxModel::score(const ImageTensor& x, int c) const {
  check_class(c);
  return predict(x)[static_cast<std::size_t>(c)];
}

Tensor LinearSoftmaxModel::gradient(const ImageTensor& x, int c) const {
  check_class(c);
  check_input(x);
  const std::size_t d = shape_.size();
  Tensor g(shape_);
  const double* wc = weights_.data() + static_cast<std::size_t>(c) * d;
  if (output_ == Output::kLogit) {
    for (std::size_t i = 0; i < d; ++i) g[i] = wc[i];
    return g;
  }
  // d p_c / dx = p_c (w_c - sum_k p_k w_k)
  const auto p = softmax(logits(x));
  const double pc = p[static_cast<std::size_t>(c)];
  for (std::size_t i = 0; i < d; ++i) {
    double mean_w = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) mean_w += p[k] * weights_[k * d + i];
    g[i] = pc * (wc[i] - mean_w);
  }
  return g;
}

// ---- QuadraticScoreModel ----------------------------------------------------

QuadraticScoreModel::QuadraticScoreModel(Shape input_shape, std::vector<double> matrices)
    : shape_(input_shape), classes_(0), matrices_(std::move(matrices)) {
  const std::size_t d = shape_.size();
  if (d == 0 || matrices_.empty() || matrices_.size() % (d * d) != 0) {
    throw InvalidArgument("quadratic model needs num_classes D x D matrices");
  }
  require_finite(matrices_, "quadratic matrices");
  classes_ = static_cast<int>(matrices_.size() / (d * d));
  for (int c = 0; c < classes_; ++c) {
    const double* a = matrices_.data() + static_cast<std::size_t>(c) * d * d;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i + 1; j < d; ++j) {
        if (a[i * d + j] != a[j * d + i]) {
          throw InvalidArgument("quadratic model matrices must be symmetric");
        }
      }
    }
  }
}

std::vector<double> QuadraticScoreModel::predict(const ImageTensor& x) const {
  check_input(x);
  std::vector<double> s(static_cast<std::size_t>(classes_));
  for (int c = 0; c < classes_; ++c) s[static_cast<std::size_t>(c)] = score(x, c);
  return s;
}

double QuadraticScoreModel::score(const ImageTensor& x, int c) const {
  check_class(c);
  check_input(x);
  const std::size_t d = shape_.size();
  const double* a = matrices_.data() + static_cast<std::size_t>(c) * d * d;
  double total = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < d; ++j) row += a[i * d + j] * x[j];
    total += x[i] * row;
  }
  return 0.5 * total;
}

Tensor QuadraticScoreModel::gradient(const ImageTensor& x, int c) const {
  check_class(c);
  check_input(x);
  const std::size_t d = shape_.size();
  const double* a = matrices_.data() + static_cast<std::size_t>(c) * d * d;
  Tensor g(shape_);
  for (std::size_t i = 0; i < d; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < d; ++j) row += a[i * d + j] * x[j];
    g[i] = row;
  }
  return g;
}

// ---- TinyConvNet ------------------------------------------------------------

namespace {

constexpr int kTaps = TinyConvNet::kKernel * TinyConvNet::kKernel;

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct ConvLayout {
  std::size_t conv_w, conv_b, dense_w, dense_b, total, features;
};

ConvLayout conv_layout(Shape s, int classes) {
  ConvLayout l{};
  const std::size_t f = TinyConvNet::kFilters;
  l.features = static_cast<std::size_t>(s.height / 2) * static_cast<std::size_t>(s.width / 2) * f;
  l.conv_w = 0;
  l.conv_b = f * static_cast<std::size_t>(s.channels) * kTaps;
  l.dense_w = l.conv_b + f;
  l.dense_b = l.dense_w + static_cast<std::size_t>(classes) * l.features;
  l.total = l.dense_b + static_cast<std::size_t>(classes);
  return l;
}

}  // namespace

struct TinyConvNet::Forward {
  const ImageTensor* input;
  std::vector<double> pre;     // H x W x F
  std::vector<double> pooled;  // PH x PW x F
  std::vector<double> logits;
  std::vector<double> probs;
};

std::size_t TinyConvNet::param_count(Shape input_shape, int num_classes) {
  return conv_layout(input_shape, num_classes).total;
}

TinyConvNet::TinyConvNet(Shape input_shape, int num_classes, std::vector<double> params)
    : shape_(input_shape), classes_(num_classes), pooled_h_(input_shape.height / 2),
      pooled_w_(input_shape.width / 2), params_(std::move(params)) {
  if (shape_.height < 2 || shape_.width < 2 || shape_.channels <= 0) {
    throw InvalidArgument("TinyConvNet needs an input of at least 2x2");
  }
  if (classes_ < 1) throw InvalidArgument("TinyConvNet needs at least one class");
  if (params_.size() != param_count(shape_, classes_)) {
    throw InvalidArgument("TinyConvNet parameter count mismatch");
  }
  require_finite(params_, "TinyConvNet parameters");
}

TinyConvNet TinyConvNet::initialized(Shape input_shape, int num_classes, std::uint64_t seed) {
  const ConvLayout l = conv_layout(input_shape, num_classes);
  std::vector<double> params(l.total, 0.0);
  Rng rng(seed);
  const double conv_fan_in = static_cast<double>(input_shape.channels * kTaps);
  const double conv_fan_out = static_cast<double>(kFilters * kTaps);
  const double conv_a = std::sqrt(6.0 / (conv_fan_in + conv_fan_out));
  for (std::size_t i = l.conv_w; i < l.conv_b; ++i) params[i] = rng.uniform(-conv_a, conv_a);
  const double dense_a =
      std::sqrt(6.0 / (static_cast<double>(l.features) + static_cast<double>(num_classes)));
  for (std::size_t i = l.dense_w; i < l.dense_b; ++i) params[i] = rng.uniform(-dense_a, dense_a);
  return TinyConvNet(input_shape, num_classes, std::move(params));
}

TinyConvNet::Forward TinyConvNet::forward(const ImageTensor& x) const {
  check_input(x);
  const ConvLayout l = conv_layout(shape_, classes_);
  const int h = shape_.height, w = shape_.width, ch = shape_.channels;
  Forward fwd;
  fwd.input = &x;
  fwd.pre.assign(static_cast<std::size_t>(h * w * kFilters), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      double* out = fwd.pre.data() + static_cast<std::size_t>((y * w + xx) * kFilters);
      for (int f = 0; f < kFilters; ++f) out[f] = params_[l.conv_b + static_cast<std::size_t>(f)];
      for (int ky = 0; ky < kKernel; ++ky) {
        const int sy = reflect_index(y + ky - 1, h);
        for (int kx = 0; kx < kKernel; ++kx) {
          const int sx = reflect_index(xx + kx - 1, w);
          for (int c = 0; c < ch; ++c) {
            const double v = x.at(sy, sx, c);
            for (int f = 0; f < kFilters; ++f) {
              out[f] += params_[l.conv_w + static_cast<std::size_t>(((f * ch + c) * kKernel + ky) * kKernel + kx)] * v;
            }
          }
        }
      }
    }
  }
  fwd.pooled.assign(l.features, 0.0);
  for (int py = 0; py < pooled_h_; ++py) {
    for (int px = 0; px < pooled_w_; ++px) {
      double* out = fwd.pooled.data() + static_cast<std::size_t>((py * pooled_w_ + px) * kFilters);
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const double* in =
              fwd.pre.data() + static_cast<std::size_t>(((2 * py + dy) * w + 2 * px + dx) * kFilters);
          for (int f = 0; f < kFilters; ++f) out[f] += 0.25 * softplus(in[f]);
        }
      }
    }
  }
  fwd.logits.assign(static_cast<std::size_t>(classes_), 0.0);
  for (int k = 0; k < classes_; ++k) {
    const double* wk = params_.data() + l.dense_w + static_cast<std::size_t>(k) * l.features;
    double z = params_[l.dense_b + static_cast<std::size_t>(k)];
    for (std::size_t j = 0; j < l.features; ++j) z += wk[j] * fwd.pooled[j];
    fwd.logits[static_cast<std::size_t>(k)] = z;
  }
  fwd.probs = softmax(fwd.logits);
  return fwd;
}

void TinyConvNet::backward(const Forward& fwd, const std::vector<double>& dlogits,
                           Tensor* dinput, std::vector<double>* dparams) const {
  const ConvLayout l = conv_layout(shape_, classes_);
  const int h = shape_.height, w = shape_.width, ch = shape_.channels;

  std::vector<double> dpooled(l.features, 0.0);
  for (int k = 0; k < classes_; ++k) {
    const double dz = dlogits[static_cast<std::size_t>(k)];
    const double* wk = params_.data() + l.dense_w + static_cast<std::size_t>(k) * l.features;
    for (std::size_t j = 0; j < l.features; ++j) dpooled[j] += wk[j] * dz;
    if (dparams) {
      double* gw = dparams->data() + l.dense_w + static_cast<std::size_t>(k) * l.features;
      for (std::size_t j = 0; j < l.features; ++j) gw[j] += fwd.pooled[j] * dz;
      (*dparams)[l.dense_b + static_cast<std::size_t>(k)] += dz;
    }
  }

  // Rows/columns dropped by the pool get zero gradient.
  std::vector<double> dpre(fwd.pre.size(), 0.0);
  for (int y = 0; y < 2 * pooled_h_; ++y) {
    for (int xx = 0; xx < 2 * pooled_w_; ++xx) {
      const std::size_t at = static_cast<std::size_t>((y * w + xx) * kFilters);
      const double* dp =
          dpooled.data() + static_cast<std::size_t>(((y / 2) * pooled_w_ + xx / 2) * kFilters);
      for (int f = 0; f < kFilters; ++f) {
        dpre[at + static_cast<std::size_t>(f)] = 0.25 * dp[f] * sigmoid(fwd.pre[at + static_cast<std::size_t>(f)]);
      }
    }
  }

  if (dinput) *dinput = Tensor(shape_);
  const ImageTensor& x = *fwd.input;
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      const double* dp = dpre.data() + static_cast<std::size_t>((y * w + xx) * kFilters);
      if (dparams) {
        for (int f = 0; f < kFilters; ++f) (*dparams)[l.conv_b + static_cast<std::size_t>(f)] += dp[f];
      }
      for (int ky = 0; ky < kKernel; ++ky) {
        const int sy = reflect_index(y + ky - 1, h);
        for (int kx = 0; kx < kKernel; ++kx) {
          const int sx = reflect_index(xx + kx - 1, w);
          for (int c = 0; c < ch; ++c) {
            double acc = 0.0;
            for (int f = 0; f < kFilters; ++f) {
              const std::size_t wi =
                  l.conv_w + static_cast<std::size_t>(((f * ch + c) * kKernel + ky) * kKernel + kx);
              acc += params_[wi] * dp[f];
              if (dparams) (*dparams)[wi] += x.at(sy, sx, c) * dp[f];
            }
            if (dinput) dinput->at(sy, sx, c) += acc;
          }
        }
      }
    }
  }
}

std::vector<double> TinyConvNet::predict(const ImageTensor& x) const { return forward(x).probs; }

Tensor TinyConvNet::gradient(const ImageTensor& x, int c) const {
  check_class(c);
  const Forward fwd = forward(x);
  // d p_c / d z_k = p_c (delta_kc - p_k)
  const double pc = fwd.probs[static_cast<std::size_t>(c)];
  std::vector<double> dlogits(static_cast<std::size_t>(classes_));
  for (int k = 0; k < classes_; ++k) {
    dlogits[static_cast<std::size_t>(k)] = pc * ((k == c ? 1.0 : 0.0) - fwd.probs[static_cast<std::size_t>(k)]);
  }
  Tensor g;
  backward(fwd, dlogits, &g, nullptr);
  return g;
}

double TinyConvNet::loss_and_param_gradient(const ImageTensor& x, int label,
                                            std::vector<double>& param_grad) const {
  check_class(label);
  const Forward fwd = forward(x);
  std::vector<double> dlogits(fwd.probs);
  dlogits[static_cast<std::size_t>(label)] -= 1.0;
  backward(fwd, dlogits, nullptr, &param_grad);
  return -std::log(std::max(fwd.probs[static_cast<std::size_t>(label)], 1e-300));
}

void TinyConvNet::apply_update(const std::vector<double>& step, double scale) {
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i] += scale * step[i];
}

// ---- finite differences ---------------------------------------------------

Tensor finite_diff_gradient(const DifferentiableModel& model, const ImageTensor& x, int c,
                            double h) {
  if (!(h > 0.0)) throw InvalidArgument("finite-difference step must be positive");
  Tensor g(x.shape());
  ImageTensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = model.score(probe, c);
    probe[i] = orig - h;
    const double down = model.score(probe, c);
    probe[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// ---- datasets ----------------------------------------------------------------

ToyDataset make_shapes_dataset(int count, std::uint64_t seed, Shape shape) {
  if (count < 0) throw InvalidArgument("dataset size must be non-negative");
  ToyDataset data;
  data.num_classes = 3;
  data.seed = seed;
  Rng rng(seed);
  const int h = shape.height, w = shape.width;
  const int small = std::min(h, w);
  for (int n = 0; n < count; ++n) {
    const int label = n % 3;
    ImageTensor img(shape);
    for (double& v : img.values()) v = rng.uniform(0.0, 0.35);
    const double intensity = rng.uniform(0.7, 1.0);
    // Half-extent of the figure, in pixels.
    const double r = rng.uniform(0.26, 0.38) * small;
    const double cy = 0.5 * h + rng.uniform(-0.12, 0.12) * h;
    const double cx = 0.5 * w + rng.uniform(-0.12, 0.12) * w;
    const double bar = std::max(1.0, 0.3 * r);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double dy = y + 0.5 - cy;
        const double dx = x + 0.5 - cx;
        bool inside = false;
        switch (label) {
          case 0: inside = std::abs(dy) <= r && std::abs(dx) <= r; break;
          case 1: inside = dy * dy + dx * dx <= r * r; break;
          default:
            inside = (std::abs(dy) <= bar && std::abs(dx) <= r) ||
                     (std::abs(dx) <= bar && std::abs(dy) <= r);
            break;
        }
        if (inside) {
          for (int c = 0; c < shape.channels; ++c) img.at(y, x, c) = intensity;
        }
      }
    }
    data.images.push_back(std::move(img));
    data.labels.push_back(label);
  }
  return data;
}

ToyDataset make_blob_dataset(int count, std::uint64_t seed, Shape shape) {
  if (count < 0) throw InvalidArgument("dataset size must be non-negative");
  ToyDataset data;
  data.num_classes = 2;
  data.seed = seed;
  Rng rng(seed);
  const int h = shape.height, w = shape.width;
  for (int n = 0; n < count; ++n) {
    const int label = n % 2;
    const double cx = label == 0 ? rng.uniform(0.1, 0.35) * w : rng.uniform(0.65, 0.9) * w;
    const double cy = rng.uniform(0.25, 0.75) * h;
    const double spread = 0.12 * std::min(h, w);
    ImageTensor img(shape);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double d2 = (y + 0.5 - cy) * (y + 0.5 - cy) + (x + 0.5 - cx) * (x + 0.5 - cx);
        const double blob = std::exp(-d2 / (2.0 * spread * spread));
        for (int c = 0; c < shape.channels; ++c) {
          img.at(y, x, c) = std::clamp(0.8 * blob + rng.uniform(0.0, 0.15), 0.0, 1.0);
        }
      }
    }
    data.images.push_back(std::move(img));
    data.labels.push_back(label);
  }
  return data;
}

// ---- training ----------------------------------------------------------------

double accuracy(const DifferentiableModel& model, const std::vector<ImageTensor>& images,
                const std::vector<int>& labels) {
  if (images.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (model.argmax(images[i]) == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(images.size());
}

TrainResult train_toy(const ToyDataset& data, const TrainOptions& options) {
  if (data.images.empty()) throw InvalidArgument("cannot train on an empty dataset");
  if (data.images.size() != data.labels.size()) {
    throw InvalidArgument("dataset images and labels differ in length");
  }
  if (options.epochs < 0 || options.batch_size < 1 || !(options.learning_rate > 0.0)) {
    throw InvalidArgument("invalid training options");
  }
  const int classes = data.num_classes > 0
                          ? data.num_classes
                          : *std::max_element(data.labels.begin(), data.labels.end()) + 1;
  TinyConvNet model = TinyConvNet::initialized(data.images.front().shape(), classes, options.seed);
  Rng rng(options.seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<std::size_t> order(data.images.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(model.params().size());
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(options.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t b = start; b < stop; ++b) {
        model.loss_and_param_gradient(data.images[order[b]], data.labels[order[b]], grad);
      }
      model.apply_update(grad, -options.learning_rate / static_cast<double>(stop - start));
    }
  }
  const double acc = accuracy(model, data.images, data.labels);
  return TrainResult{std::move(model), acc};
}

// ---- serialization -----------------------------------------------------------

namespace {

enum class ArchTag : std::uint32_t {
  kLinearSoftmax = 1,
  kLinearLogit = 2,
  kQuadratic = 3,
  kTinyConv = 4,
};

constexpr std::string_view kModelMagic = "ATBM";

}  // namespace

std::string encode_model(const DifferentiableModel& model) {
  detail::ByteWriter w;
  w.magic(kModelMagic);
  w.u32(kModelFormatVersion);
  const std::vector<double>* blob = nullptr;
  std::vector<double> joined;
  if (const auto* lin = dynamic_cast<const LinearSoftmaxModel*>(&model)) {
    w.u32(static_cast<std::uint32_t>(lin->output() == LinearSoftmaxModel::Output::kSoftmax
                                         ? ArchTag::kLinearSoftmax
                                         : ArchTag::kLinearLogit));
    joined = lin->weights();
    joined.insert(joined.end(), lin->biases().begin(), lin->biases().end());
    blob = &joined;
  } else if (const auto* quad = dynamic_cast<const QuadraticScoreModel*>(&model)) {
    w.u32(static_cast<std::uint32_t>(ArchTag::kQuadratic));
    blob = &quad->matrices();
  } else if (const auto* conv = dynamic_cast<const TinyConvNet*>(&model)) {
    w.u32(static_cast<std::uint32_t>(ArchTag::kTinyConv));
    blob = &conv->params();
  } else {
    throw InvalidArgument("model type has no file encoding");
  }
  const Shape s = model.input_shape();
  w.u32(static_cast<std::uint32_t>(s.height));
  w.u32(static_cast<std::uint32_t>(s.width));
  w.u32(static_cast<std::uint32_t>(s.channels));
  w.u32(static_cast<std::uint32_t>(model.num_classes()));
  w.f64s(*blob);
  return w.finish();
}

std::unique_ptr<DifferentiableModel> decode_model(std::string bytes) {
  detail::ByteReader r(std::move(bytes), kModelMagic);
  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32();
  if (version != kModelFormatVersion) {
    throw UnsupportedVersion(version, kModelFormatVersion, version_at);
  }
  if (!r.crc_ok()) throw ParseError("model checksum mismatch", r.crc_offset());
  const std::size_t tag_at = r.offset();
  const auto tag = static_cast<ArchTag>(r.u32());
  const std::size_t header_at = r.offset();
  Shape s;
  s.height = static_cast<int>(r.u32());
  s.width = static_cast<int>(r.u32());
  s.channels = static_cast<int>(r.u32());
  const int classes = static_cast<int>(r.u32());
  if (s.height <= 0 || s.width <= 0 || s.channels <= 0 || classes <= 0 ||
      s.size() > (std::size_t{1} << 24)) {
    throw ParseError("implausible model shape header", header_at);
  }
  const std::size_t d = s.size();
  const auto k = static_cast<std::size_t>(classes);
  std::unique_ptr<DifferentiableModel> model;
  try {
    switch (tag) {
      case ArchTag::kLinearSoftmax:
      case ArchTag::kLinearLogit: {
        auto blob = r.f64s(k * d + k);
        std::vector<double> biases(blob.end() - static_cast<std::ptrdiff_t>(k), blob.end());
        blob.resize(k * d);
        model = std::make_unique<LinearSoftmaxModel>(
            s, std::move(blob), std::move(biases),
            tag == ArchTag::kLinearSoftmax ? LinearSoftmaxModel::Output::kSoftmax
                                           : LinearSoftmaxModel::Output::kLogit);
        break;
      }
      case ArchTag::kQuadratic:
        model = std::make_unique<QuadraticScoreModel>(s, r.f64s(k * d * d));
        break;
      case ArchTag::kTinyConv:
        model = std::make_unique<TinyConvNet>(s, classes, r.f64s(TinyConvNet::param_count(s, classes)));
        break;
      default:
        throw ParseError("unknown architecture tag", tag_at);
    }
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("invalid model contents: ") + e.what(), header_at);
  }
  r.expect_end();
  return model;
}

void save_model(const DifferentiableModel& model, const std::filesystem::path& path) {
  detail::write_file(path, encode_model(model));
}

std::unique_ptr<DifferentiableModel> load_model(const std::filesystem::path& path) {
  return decode_model(detail::read_file(path));
}

}  // namespace idgi
