#pragma once

// Path-integral attribution: the left-endpoint Riemann rule and the
// important-direction (IDGI) rewrite of each Riemann step, plus the Taylor
// projection point and completeness diagnostics.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "idgi/models.hpp"
#include "idgi/paths.hpp"
#include "idgi/tensor.hpp"

namespace idgi {

struct Method {
  PathKind path = PathKind::kStraightLine;
  bool idgi = false;

  bool operator==(const Method&) const = default;
};

// "IG", "IG+IDGI", "BlurIG", ...
std::string to_string(const Method& method);
Method parse_method(std::string_view name);

struct AttributionMap {
  Tensor values;
  Method method;
  int steps = 0;
  // Sum of f_c differences over steps IDGI skipped for a vanishing gradient.
  double residual = 0.0;
  double f_start = 0.0;
  double f_end = 0.0;
};

enum class Execution { kSerial, kParallel };

// f_c at every path point and the gradient at x_0 .. x_{N-1}. The parallel
// version evaluates points concurrently; both give identical results.
struct PathEvaluation {
  std::vector<double> scores;
  std::vector<Tensor> gradients;
};

PathEvaluation evaluate_path(const DifferentiableModel& model, int c, const PathSample& path,
                             Execution exec = Execution::kParallel);

// I_i = sum_j g_i(x_j) (x_{j+1,i} - x_{j,i}).
AttributionMap riemann_attribution(const DifferentiableModel& model, int c,
                                   const PathSample& path,
                                   Execution exec = Execution::kParallel);

inline constexpr double kDefaultGradientFloor = 1e-12;

// Per step: d = f_c(x_{j+1}) - f_c(x_j), I_i += g_i^2 d / (g.g). Steps with
// g.g < eps_g add d to the residual instead.
AttributionMap idgi_attribution(const DifferentiableModel& model, int c, const PathSample& path,
                                double eps_g = kDefaultGradientFloor,
                                Execution exec = Execution::kParallel);

// Dispatches on method.idgi.
AttributionMap attribute(const DifferentiableModel& model, int c, const PathSample& path,
                         bool use_idgi, Execution exec = Execution::kParallel);

// First-order Taylor estimate of the point along g with f_c = f_c(x_j) + d:
// x_j + g d / (g.g). Throws DegenerateGradient when g = 0.
ImageTensor projection_point(const ImageTensor& x_j, const Tensor& g, double d);

// |f_c(x_jp) - f_c(x_{j+1})| per step, skipping zero-gradient steps.
std::vector<double> projection_error_profile(const DifferentiableModel& model, int c,
                                             const PathSample& path,
                                             Execution exec = Execution::kParallel);

// |sum(values) + residual - (f_end - f_start)|.
double completeness_gap(const AttributionMap& attr);

struct CollapsedSaliency {
  Tensor signed_sum;    // H x W x 1
  Tensor absolute_sum;  // H x W x 1
};

// Per-pixel sum over channels, signed and of absolute values.
CollapsedSaliency channel_collapse(const AttributionMap& attr);
CollapsedSaliency channel_collapse(const Tensor& values);

// Attribution files: "ATBA", u32 version, u32 path kind, u32 idgi flag,
// u32 steps, u32 height, width, channels, value blob (u64 count + f64s),
// f64 residual, f_start, f_end, CRC32.
inline constexpr std::uint32_t kAttributionFormatVersion = 1;

std::string encode_attribution(const AttributionMap& attr);
AttributionMap decode_attribution(std::string bytes);
void save_attribution(const AttributionMap& attr, const std::filesystem::path& path);
AttributionMap load_attribution(const std::filesystem::path& path);

}  // namespace idgi
