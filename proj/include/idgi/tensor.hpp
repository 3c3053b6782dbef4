#pragma once

// Dense H x W x C image tensors and the filtering primitives shared by the
// path generators and the metrics.
//
// Storage is row-major and channel-interleaved: element (y, x, c) lives at
// (y * W + x) * C + c. Values are 64-bit reals. Images loaded from disk or
// produced by the filters lie in [0,1]; gradients and attribution values use
// the same container without the range restriction.

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace idgi {

struct Shape {
  int height = 0;
  int width = 0;
  int channels = 0;

  std::size_t pixels() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  std::size_t size() const {
    return pixels() * static_cast<std::size_t>(channels);
  }
  bool operator==(const Shape&) const = default;
};

class Tensor {
 public:
  Tensor() = default;
  // Zero-filled (or `fill`-filled) tensor. Throws InvalidArgument on a
  // non-positive dimension.
  explicit Tensor(Shape shape, double fill = 0.0);
  // Takes ownership of `data`; its length must equal shape.size() and every
  // element must be finite.
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  int channels() const { return shape_.channels; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(int y, int x, int c) { return data_[index(y, x, c)]; }
  double at(int y, int x, int c) const { return data_[index(y, x, c)]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool in_unit_range() const;
  bool all_finite() const;

  bool operator==(const Tensor&) const = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(shape_.width) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(shape_.channels) +
           static_cast<std::size_t>(c);
  }

  Shape shape_;
  std::vector<double> data_;
};

using ImageTensor = Tensor;

// Pixel indices (channel-aggregated) ordered from most to least salient.
struct FlatIndexMap {
  std::vector<std::size_t> ordering;
};

// Half-sample symmetric reflection of `i` into [0, n). Works for any offset,
// including ones larger than n.
int reflect_index(int i, int n);

// Normalized 1-D Gaussian weights for offsets -radius..radius, with
// radius = ceil(4 sigma).
std::vector<double> gaussian_kernel(double sigma);

// Separable Gaussian blur with reflection padding, clamped to [0,1].
// The OpenMP version parallelizes over rows; the serial version is the
// reference it is tested against and produces bit-identical output.
ImageTensor gaussian_blur(const ImageTensor& img, double sigma);
ImageTensor gaussian_blur_serial(const ImageTensor& img, double sigma);

// 2x2 average pooling; an odd trailing row or column is dropped.
ImageTensor downsample2x(const ImageTensor& img);

// Affine map min -> 0, max -> 1. A constant input maps to all zeros.
std::vector<double> minmax_normalize(std::span<const double> values);

ImageTensor clamp_unit(const ImageTensor& img);

// Per-pixel mean over channels.
ImageTensor to_grayscale(const ImageTensor& img);

// Orders pixels by descending saliency; ties go to the lower row-major index.
FlatIndexMap rank_pixels(std::span<const double> saliency);

// Binary PGM (P5, 1 channel) and PPM (P6, 3 channels), 8-bit, maxval 255.
ImageTensor read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const ImageTensor& img);

}  // namespace idgi
