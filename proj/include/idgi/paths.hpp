#pragma once

// Discretized integration paths x_0 .. x_N for the three path methods.
// Every generator ends exactly on the input: points.back() == x bit for bit.

#include <string>
#include <string_view>
#include <vector>

#include "idgi/models.hpp"
#include "idgi/tensor.hpp"

namespace idgi {

enum class PathKind { kStraightLine, kBlur, kGuided };

std::string_view to_string(PathKind kind);
PathKind parse_path_kind(std::string_view name);

struct PathSample {
  std::vector<ImageTensor> points;
  // Parameter of each point: j/N for the straight and guided paths, the
  // blur scale (descending to 0) for the blur path.
  std::vector<double> alphas;
  PathKind kind = PathKind::kStraightLine;
  std::string baseline;

  int steps() const { return static_cast<int>(points.size()) - 1; }
};

// x_ref + (j/N)(x - x_ref), j = 0..N.
PathSample straight_line_path(const ImageTensor& x_ref, const ImageTensor& x, int steps);

// Scale grid alpha_j = max_scale (1 - j/N)^2; point j is x blurred with
// sigma = sqrt(alpha_j / 2) and the last point is x itself.
PathSample blur_path(const ImageTensor& x, double max_scale, int steps);

// Greedy guided path. Each step moves the `fraction` of still-unfinished
// coordinates with the smallest |gradient| toward x, shrinking the remaining
// L1 distance by 1/(steps left). If the selected coordinates finish before the
// step's budget is spent, the next-smallest coordinates are pulled in.
PathSample guided_path(const DifferentiableModel& model, int c, const ImageTensor& x_ref,
                       const ImageTensor& x, int steps, double fraction = 0.25);

// Default maximum blur scale for an image: alpha such that sigma matches a
// fixed fraction of the shorter side.
double default_blur_scale(const Shape& shape);

// Black image of the given shape (default IG/GIG reference point).
ImageTensor black_baseline(const Shape& shape);

}  // namespace idgi
