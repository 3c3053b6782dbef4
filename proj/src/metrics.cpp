#include "idgi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "idgi/errors.hpp"

namespace idgi {

// ---- AUC and CSV ------------------------------------------------------------

double auc(const MetricCurve& curve) {
  const auto& pts = curve.points;
  if (pts.size() < 2) throw InvalidArgument("auc needs at least two points");
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!std::isfinite(pts[i].x) || !std::isfinite(pts[i].y)) {
      throw InvalidArgument("auc on non-finite curve");
    }
    if (i > 0 && pts[i].x < pts[i - 1].x) throw InvalidArgument("curve x must be nondecreasing");
  }
  const double range = pts.back().x - pts.front().x;
  if (!(range > 0.0)) throw InvalidArgument("auc needs a positive x range");
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    area += 0.5 * (pts[i].y + pts[i - 1].y) * (pts[i].x - pts[i - 1].x);
  }
  return area / range;
}

void write_curve_csv(std::ostream& out, const MetricCurve& curve) {
  const auto old = out.precision(17);
  out << "x,y\n";
  for (const auto& p : curve.points) out << p.x << ',' << p.y << '\n';
  out.precision(old);
}

// ---- SSIM ---------------------------------------------------------------------

namespace {

struct SsimTerms {
  double ssim;      // mean of luminance * contrast-structure
  double cs;        // mean of contrast-structure
};

// Summed-area table with a zero first row/column: (h+1) x (w+1).
std::vector<double> integral(const ImageTensor& img, const ImageTensor* other) {
  const int h = img.height(), w = img.width();
  std::vector<double> t(static_cast<std::size_t>((h + 1) * (w + 1)), 0.0);
  for (int y = 0; y < h; ++y) {
    double row = 0.0;
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y * w + x);
      row += other ? img[p] * (*other)[p] : img[p];
      t[static_cast<std::size_t>((y + 1) * (w + 1) + x + 1)] =
          t[static_cast<std::size_t>(y * (w + 1) + x + 1)] + row;
    }
  }
  return t;
}

double box(const std::vector<double>& t, int w, int y, int x, int n) {
  const int stride = w + 1;
  return t[static_cast<std::size_t>((y + n) * stride + x + n)] - t[static_cast<std::size_t>(y * stride + x + n)] -
         t[static_cast<std::size_t>((y + n) * stride + x)] + t[static_cast<std::size_t>(y * stride + x)];
}

SsimTerms ssim_terms(const ImageTensor& a, const ImageTensor& b, const SsimParams& p) {
  const int h = a.height(), w = a.width(), n = p.window;
  if (n < 1 || n > std::min(h, w)) throw InvalidArgument("SSIM window does not fit the image");
  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
  const auto sa = integral(a, nullptr), sb = integral(b, nullptr);
  const auto saa = integral(a, &a), sbb = integral(b, &b), sab = integral(a, &b);
  const double inv = 1.0 / (static_cast<double>(n) * n);
  double ssim_sum = 0.0, cs_sum = 0.0;
  for (int y = 0; y + n <= h; ++y) {
    for (int x = 0; x + n <= w; ++x) {
      const double mu_a = box(sa, w, y, x, n) * inv;
      const double mu_b = box(sb, w, y, x, n) * inv;
      const double var_a = std::max(0.0, box(saa, w, y, x, n) * inv - mu_a * mu_a);
      const double var_b = std::max(0.0, box(sbb, w, y, x, n) * inv - mu_b * mu_b);
      const double cov = box(sab, w, y, x, n) * inv - mu_a * mu_b;
      const double lum = (2.0 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1);
      const double cs = (2.0 * cov + c2) / (var_a + var_b + c2);
      ssim_sum += lum * cs;
      cs_sum += cs;
    }
  }
  const double count = static_cast<double>((h - n + 1) * (w - n + 1));
  return {ssim_sum / count, cs_sum / count};
}

void check_same_shape(const ImageTensor& a, const ImageTensor& b) {
  if (!(a.shape() == b.shape())) throw InvalidArgument("images differ in shape");
}

}  // namespace

double ssim(const ImageTensor& a, const ImageTensor& b, const SsimParams& params) {
  check_same_shape(a, b);
  return ssim_terms(to_grayscale(a), to_grayscale(b), params).ssim;
}

int msssim_scales(const Shape& shape, const SsimParams& params) {
  const int side = std::min(shape.height, shape.width);
  int scales = 0;
  while (scales < static_cast<int>(params.scale_weights.size()) &&
         side >= params.window * (1 << scales)) {
    ++scales;
  }
  return scales;
}

double msssim(const ImageTensor& a, const ImageTensor& b, const SsimParams& params) {
  check_same_shape(a, b);
  const int scales = msssim_scales(a.shape(), params);
  if (scales == 0) throw InvalidArgument("image smaller than the SSIM window");
  double weight_total = 0.0;
  for (int s = 0; s < scales; ++s) weight_total += params.scale_weights[static_cast<std::size_t>(s)];
  ImageTensor ga = to_grayscale(a), gb = to_grayscale(b);
  double result = 1.0;
  for (int s = 0; s < scales; ++s) {
    const double weight = params.scale_weights[static_cast<std::size_t>(s)] / weight_total;
    const SsimTerms t = ssim_terms(ga, gb, params);
    const double term = s + 1 == scales ? t.ssim : t.cs;
    result *= std::pow(std::max(term, 0.0), weight);
    if (s + 1 < scales) {
      ga = downsample2x(ga);
      gb = downsample2x(gb);
    }
  }
  return result;
}

// ---- information estimators ---------------------------------------------------

double entropy_proxy(const ImageTensor& img) {
  const ImageTensor g = to_grayscale(img);
  const int h = g.height(), w = g.width();
  auto level = [&](int y, int x) {
    return static_cast<int>(std::lround(std::clamp(g.at(y, x, 0), 0.0, 1.0) * 255.0));
  };
  // Left-neighbour prediction; the first column predicts from the pixel above.
  std::vector<std::size_t> hist(511, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int pred = x > 0 ? level(y, x - 1) : (y > 0 ? level(y - 1, 0) : 128);
      ++hist[static_cast<std::size_t>(level(y, x) - pred + 255)];
    }
  }
  const double total = static_cast<double>(g.size());
  double entropy = 0.0;
  for (std::size_t n : hist) {
    if (n == 0) continue;
    const double p = static_cast<double>(n) / total;
    entropy -= p * std::log2(p);
  }
  return entropy;
}

namespace {

double normalized_between(double value, double low, double high) {
  const double denom = high - low;
  if (denom < 1e-9) return 0.0;
  return std::clamp((value - low) / denom, 0.0, 1.0);
}

}  // namespace

double normalized_entropy(const ImageTensor& img, const ImageTensor& base,
                          const ImageTensor& original) {
  check_same_shape(img, base);
  check_same_shape(img, original);
  return normalized_between(entropy_proxy(img), entropy_proxy(base), entropy_proxy(original));
}

double msssim_information(const ImageTensor& img, const ImageTensor& base,
                          const ImageTensor& original) {
  check_same_shape(img, base);
  check_same_shape(img, original);
  return normalized_between(msssim(img, original), msssim(base, original), 1.0);
}

InformationEstimator make_estimator(Estimator kind) {
  switch (kind) {
    case Estimator::kNormalizedEntropy: return normalized_entropy;
    case Estimator::kMsssim: return msssim_information;
  }
  throw InvalidArgument("unknown estimator");
}

// ---- composition ------------------------------------------------------------------

double default_base_sigma(const Shape& shape) {
  return 8.0 * static_cast<double>(std::min(shape.height, shape.width)) / 16.0;
}

ImageTensor default_bokeh_base(const ImageTensor& original) {
  return gaussian_blur(original, default_base_sigma(original.shape()));
}

std::size_t revealed_count(double fraction, std::size_t pixels) {
  const auto n = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(pixels) + 0.5));
  return std::min(n, pixels);
}

namespace {

void check_saliency(const ImageTensor& original, std::span<const double> saliency) {
  if (saliency.size() != original.shape().pixels()) {
    throw InvalidArgument("saliency map must have one value per pixel");
  }
}

// Reveals ranked pixels [from, to) of `order` onto `canvas`.
void reveal(ImageTensor& canvas, const ImageTensor& original, const FlatIndexMap& order,
            std::size_t from, std::size_t to) {
  const auto ch = static_cast<std::size_t>(original.channels());
  for (std::size_t r = from; r < to; ++r) {
    const std::size_t p = order.ordering[r];
    for (std::size_t k = 0; k < ch; ++k) canvas[p * ch + k] = original[p * ch + k];
  }
}

}  // namespace

ImageTensor bokeh_compose(const ImageTensor& original, const ImageTensor& base,
                          std::span<const double> saliency, double top_fraction) {
  check_same_shape(original, base);
  check_saliency(original, saliency);
  if (!(top_fraction >= 0.0 && top_fraction <= 1.0)) {
    throw InvalidArgument("reveal fraction must be in [0, 1]");
  }
  ImageTensor out = base;
  const FlatIndexMap order = rank_pixels(saliency);
  reveal(out, original, order, 0, revealed_count(top_fraction, saliency.size()));
  return out;
}

// ---- curves -----------------------------------------------------------------------

const std::vector<double>& default_pic_fractions() {
  static const std::vector<double> fractions{0.0,  0.005, 0.01, 0.02, 0.03, 0.05, 0.07, 0.1,
                                             0.14, 0.21,  0.3,  0.4,  0.5,  0.75, 1.0};
  return fractions;
}

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

MetricCurve bin_curve(const std::vector<CurvePoint>& samples, int bins, Aggregation aggregation) {
  if (bins < 1) throw InvalidArgument("bin count must be positive");
  if (samples.empty()) throw InvalidArgument("no samples to bin");
  std::vector<std::vector<double>> buckets(static_cast<std::size_t>(bins));
  for (const auto& s : samples) {
    const double x = std::clamp(s.x, 0.0, 1.0);
    const int b = std::min(bins - 1, static_cast<int>(std::floor(x * bins)));
    buckets[static_cast<std::size_t>(b)].push_back(s.y);
  }
  std::vector<double> centers(static_cast<std::size_t>(bins));
  std::vector<double> values(static_cast<std::size_t>(bins), 0.0);
  std::vector<bool> filled(static_cast<std::size_t>(bins), false);
  for (int b = 0; b < bins; ++b) {
    const auto i = static_cast<std::size_t>(b);
    centers[i] = (b + 0.5) / bins;
    if (buckets[i].empty()) continue;
    filled[i] = true;
    if (aggregation == Aggregation::kBinnedMedian) {
      values[i] = median_of(buckets[i]);
    } else {
      double total = 0.0;
      for (double y : buckets[i]) total += y;
      values[i] = total / static_cast<double>(buckets[i].size());
    }
  }
  // Empty bins: interpolate between filled neighbours, starting from the
  // (0,0) anchor and holding the last filled value to the right.
  double left_x = 0.0, left_y = 0.0;
  for (int b = 0; b < bins; ++b) {
    const auto i = static_cast<std::size_t>(b);
    if (filled[i]) {
      left_x = centers[i];
      left_y = values[i];
      continue;
    }
    int next = b + 1;
    while (next < bins && !filled[static_cast<std::size_t>(next)]) ++next;
    if (next == bins) {
      values[i] = left_y;
    } else {
      const double rx = centers[static_cast<std::size_t>(next)];
      const double ry = values[static_cast<std::size_t>(next)];
      values[i] = left_y + (ry - left_y) * (centers[i] - left_x) / (rx - left_x);
    }
  }
  MetricCurve curve;
  curve.x_semantics = XSemantics::kInformationLevel;
  curve.aggregation = aggregation;
  curve.points.push_back({0.0, 0.0});
  for (std::size_t i = 0; i < centers.size(); ++i) curve.points.push_back({centers[i], values[i]});
  curve.points.push_back({1.0, values.back()});
  return curve;
}

MetricCurve pic_curve(const DifferentiableModel& model, int c, const ImageTensor& original,
                      std::span<const double> saliency, const PicOptions& options) {
  return pic_curve(model, c, original, saliency, make_estimator(options.estimator), options);
}

MetricCurve pic_curve(const DifferentiableModel& model, int c, const ImageTensor& original,
                      std::span<const double> saliency, const InformationEstimator& estimator,
                      const PicOptions& options) {
  check_saliency(original, saliency);
  if (options.fractions.empty()) throw InvalidArgument("PIC needs at least one fraction");
  for (double f : options.fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw InvalidArgument("PIC fractions must lie in [0, 1]");
  }
  const ImageTensor base = default_bokeh_base(original);
  const double p_original = model.score(original, c);
  std::vector<CurvePoint> samples;
  samples.reserve(options.fractions.size());
  for (double f : options.fractions) {
    const ImageTensor bokeh = bokeh_compose(original, base, saliency, f);
    const double x = estimator(bokeh, base, original);
    double y;
    if (options.mode == PicMode::kAccuracy) {
      y = model.argmax(bokeh) == c ? 1.0 : 0.0;
    } else {
      y = p_original > 0.0 ? std::clamp(model.score(bokeh, c) / p_original, 0.0, 1.0) : 0.0;
    }
    samples.push_back({x, y});
  }
  MetricCurve curve = bin_curve(samples, options.bins,
                                options.mode == PicMode::kAccuracy ? Aggregation::kBinnedMean
                                                                   : Aggregation::kBinnedMedian);
  curve.y_semantics =
      options.mode == PicMode::kAccuracy ? YSemantics::kAccuracy : YSemantics::kProbabilityRatio;
  return curve;
}

MetricCurve insertion_curve(const DifferentiableModel& model, int c, const ImageTensor& original,
                            std::span<const double> saliency, BaseMode base, int steps) {
  check_saliency(original, saliency);
  if (steps < 1) throw InvalidArgument("insertion curve needs at least one step");
  ImageTensor canvas =
      base == BaseMode::kBlurred ? default_bokeh_base(original) : ImageTensor(original.shape(), 0.0);
  const FlatIndexMap order = rank_pixels(saliency);
  MetricCurve curve;
  curve.x_semantics = XSemantics::kInsertedFraction;
  curve.y_semantics = YSemantics::kProbability;
  curve.aggregation = Aggregation::kRaw;
  std::size_t shown = 0;
  for (int k = 0; k <= steps; ++k) {
    const double fraction = static_cast<double>(k) / steps;
    const std::size_t target = revealed_count(fraction, saliency.size());
    reveal(canvas, original, order, shown, target);
    shown = target;
    curve.points.push_back({fraction, model.score(canvas, c)});
  }
  return curve;
}

double insertion_score(const MetricCurve& curve, InsertionMode mode, double p_original) {
  if (curve.points.empty()) throw InvalidArgument("empty curve");
  if (mode == InsertionMode::kProbability) return auc(curve);
  if (!(p_original > 0.0)) throw InvalidArgument("probability ratio needs p_original > 0");
  MetricCurve ratio = curve;
  ratio.y_semantics = YSemantics::kProbabilityRatio;
  for (auto& p : ratio.points) p.y = std::clamp(p.y / p_original, 0.0, 1.0);
  return auc(ratio);
}

}  // namespace idgi
