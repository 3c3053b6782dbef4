#include "idgi/tensor.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>

#include "idgi/errors.hpp"

namespace idgi {

Tensor::Tensor(Shape shape, double fill) : shape_(shape) {
  if (shape.height <= 0 || shape.width <= 0 || shape.channels <= 0) {
    throw InvalidArgument("tensor dimensions must be positive");
  }
  data_.assign(shape.size(), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  if (shape.height <= 0 || shape.width <= 0 || shape.channels <= 0) {
    throw InvalidArgument("tensor dimensions must be positive");
  }
  if (data_.size() != shape.size()) {
    throw InvalidArgument("tensor data length " + std::to_string(data_.size()) +
                          " does not match shape size " +
                          std::to_string(shape.size()));
  }
  if (!all_finite()) throw InvalidArgument("tensor data must be finite");
}

bool Tensor::in_unit_range() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return v >= 0.0 && v <= 1.0; });
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

int reflect_index(int i, int n) {
  const int period = 2 * n;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw InvalidArgument("gaussian sigma must be positive and finite");
  }
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> weights(2 * radius + 1);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int k = -radius; k <= radius; ++k) {
    weights[k + radius] = std::exp(-static_cast<double>(k * k) * inv);
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (double& w : weights) w /= total;
  return weights;
}

namespace {

// One 1-D pass of the separable filter. `horizontal` selects the axis.
// `row` is the output row (for horizontal) or column block row (vertical);
// both serial and parallel drivers call this with identical arguments.
inline void blur_row(const ImageTensor& in, ImageTensor& out,
                     const std::vector<double>& kernel, int y, bool horizontal) {
  const int h = in.height();
  const int w = in.width();
  const int ch = in.channels();
  const int radius = static_cast<int>(kernel.size() / 2);
  for (int x = 0; x < w; ++x) {
    for (int c = 0; c < ch; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const double v = horizontal ? in.at(y, reflect_index(x + k, w), c)
                                    : in.at(reflect_index(y + k, h), x, c);
        acc += kernel[k + radius] * v;
      }
      out.at(y, x, c) = acc;
    }
  }
}

void clamp_in_place(ImageTensor& img) {
  for (double& v : img.values()) v = std::clamp(v, 0.0, 1.0);
}

}  // namespace

ImageTensor gaussian_blur_serial(const ImageTensor& img, double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  ImageTensor tmp(img.shape());
  ImageTensor out(img.shape());
  for (int y = 0; y < img.height(); ++y) blur_row(img, tmp, kernel, y, true);
  for (int y = 0; y < img.height(); ++y) blur_row(tmp, out, kernel, y, false);
  clamp_in_place(out);
  return out;
}

ImageTensor gaussian_blur(const ImageTensor& img, double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  ImageTensor tmp(img.shape());
  ImageTensor out(img.shape());
  const int h = img.height();
  // Small images are not worth a fork/join.
  const bool big = img.size() * kernel.size() >= (1u << 16);
#pragma omp parallel if (big)
  {
#pragma omp for schedule(static)
    for (int y = 0; y < h; ++y) blur_row(img, tmp, kernel, y, true);
#pragma omp for schedule(static)
    for (int y = 0; y < h; ++y) blur_row(tmp, out, kernel, y, false);
  }
  clamp_in_place(out);
  return out;
}

ImageTensor downsample2x(const ImageTensor& img) {
  if (img.height() < 2 || img.width() < 2) {
    throw InvalidArgument("downsample2x needs an image of at least 2x2");
  }
  const int oh = img.height() / 2;
  const int ow = img.width() / 2;
  const int ch = img.channels();
  ImageTensor out(Shape{oh, ow, ch});
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      for (int c = 0; c < ch; ++c) {
        out.at(y, x, c) = 0.25 * (img.at(2 * y, 2 * x, c) + img.at(2 * y, 2 * x + 1, c) +
                                  img.at(2 * y + 1, 2 * x, c) +
                                  img.at(2 * y + 1, 2 * x + 1, c));
      }
    }
  }
  return out;
}

std::vector<double> minmax_normalize(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("minmax_normalize on empty input");
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidArgument("minmax_normalize on non-finite input");
  }
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  std::vector<double> out(values.size(), 0.0);
  if (hi == lo) return out;
  const double scale = 1.0 / (hi - lo);
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = std::clamp((values[i] - lo) * scale, 0.0, 1.0);
  }
  return out;
}

ImageTensor clamp_unit(const ImageTensor& img) {
  ImageTensor out = img;
  clamp_in_place(out);
  return out;
}

ImageTensor to_grayscale(const ImageTensor& img) {
  if (img.channels() == 1) return img;
  ImageTensor out(Shape{img.height(), img.width(), 1});
  const int ch = img.channels();
  for (std::size_t p = 0; p < img.shape().pixels(); ++p) {
    double acc = 0.0;
    for (int c = 0; c < ch; ++c) acc += img[p * ch + c];
    out[p] = acc / ch;
  }
  return out;
}

FlatIndexMap rank_pixels(std::span<const double> saliency) {
  FlatIndexMap map;
  map.ordering.resize(saliency.size());
  std::iota(map.ordering.begin(), map.ordering.end(), std::size_t{0});
  std::stable_sort(map.ordering.begin(), map.ordering.end(),
                   [&](std::size_t a, std::size_t b) { return saliency[a] > saliency[b]; });
  return map;
}

// ---- PNM I/O ---------------------------------------------------------------

namespace {

class PnmHeaderReader {
 public:
  explicit PnmHeaderReader(const std::string& bytes) : bytes_(bytes) {}

  int next_int() {
    skip_space_and_comments();
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      ++pos_;
    }
    if (start == pos_) throw ParseError("expected integer in PNM header", pos_);
    if (pos_ - start > 9) throw ParseError("PNM header integer too large", start);
    return std::stoi(bytes_.substr(start, pos_ - start));
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      throw ParseError("missing whitespace before PNM raster", pos_);
    }
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char ch = bytes_[pos_];
      if (ch == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& bytes_;
  std::size_t pos_ = 2;
};

}  // namespace

ImageTensor read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw ParseError("not a binary PGM/PPM file: " + path.string(), 0);
  }
  const int channels = bytes[1] == '5' ? 1 : 3;
  PnmHeaderReader header(bytes);
  const int width = header.next_int();
  const int height = header.next_int();
  const int maxval = header.next_int();
  if (width <= 0 || height <= 0) throw ParseError("PNM dimensions must be positive", 2);
  if (maxval != 255) throw ParseError("only maxval 255 is supported", 2);
  const std::size_t start = header.raster_start();
  const Shape shape{height, width, channels};
  if (bytes.size() < start + shape.size()) {
    throw ParseError("truncated PNM raster", bytes.size());
  }
  std::vector<double> data(shape.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = static_cast<unsigned char>(bytes[start + i]) / 255.0;
  }
  return ImageTensor(shape, std::move(data));
}

void write_pnm(const std::filesystem::path& path, const ImageTensor& img) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw InvalidArgument("PNM output needs 1 or 3 channels");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << (img.channels() == 1 ? "P5" : "P6") << '\n'
      << img.width() << ' ' << img.height() << "\n255\n";
  std::string raster(img.size(), '\0');
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = std::clamp(img[i], 0.0, 1.0);
    raster[i] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
  }
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace idgi
