#pragma once

// Saliency stability under lossy compression: attribute an image and a
// JPEG-style compressed copy, compare the two normalized maps by MSE.

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "idgi/attribution.hpp"
#include "idgi/models.hpp"
#include "idgi/tensor.hpp"

namespace idgi {

// Standard JPEG luminance quantization table, row-major 8x8.
extern const std::array<int, 64> kLuminanceQuantTable;

// Table scaled by the libjpeg quality rule and clamped to [1, 255].
std::array<int, 64> scaled_quant_table(int quality);

// Orthonormal 8x8 DCT-II of a block and its inverse.
std::array<double, 64> dct8x8(const std::array<double, 64>& block);
std::array<double, 64> idct8x8(const std::array<double, 64>& coeffs);

// Per channel: level-shifted 8x8 block DCT, quantize/dequantize with the
// scaled table, inverse DCT, clamp to [0,1]. Partial blocks are padded by
// edge replication. No chroma handling, no entropy coding.
ImageTensor compress(const ImageTensor& img, int quality);

// Everything needed to produce one saliency map.
struct MethodDescriptor {
  Method method;
  int steps = 128;
  double blur_max_scale = 0.0;   // 0 selects default_blur_scale()
  double guided_fraction = 0.25;
};

PathSample make_path(const MethodDescriptor& desc, const DifferentiableModel& model, int c,
                     const ImageTensor& x);

AttributionMap compute_attribution(const MethodDescriptor& desc, const DifferentiableModel& model,
                                   int c, const ImageTensor& x,
                                   Execution exec = Execution::kParallel);

inline constexpr double kNegLogMseCap = 40.0;

// min(-ln mse, 40); 40 when mse is 0.
double neg_log_mse(double mse);

struct StabilityEntry {
  std::string method;
  std::string image_id;
  double mse = 0.0;
  double neg_log_mse = 0.0;
};

// MSE between the min-max normalized signed saliencies of `a` and `b`.
StabilityEntry stability_between(const MethodDescriptor& desc, const DifferentiableModel& model,
                                 int c, const ImageTensor& a, const ImageTensor& b,
                                 Execution exec = Execution::kParallel);

// stability_between(img, compress(img, quality)).
StabilityEntry stability_mse(const MethodDescriptor& desc, const DifferentiableModel& model,
                             int c, const ImageTensor& img, int quality,
                             Execution exec = Execution::kParallel);

struct StabilityReport {
  std::vector<StabilityEntry> entries;

  // Median mse and neg_log_mse over the entries of one method.
  StabilityEntry summary(const std::string& method) const;
};

// "method,image_id,mse,neg_log_mse", entries then one "median" row per
// method in order of first appearance.
void write_stability_csv(std::ostream& out, const StabilityReport& report);

}  // namespace idgi
