#include "idgi/paths.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "idgi/errors.hpp"

namespace idgi {

std::string_view to_string(PathKind kind) {
  switch (kind) {
    case PathKind::kStraightLine: return "IG";
    case PathKind::kBlur: return "BlurIG";
    case PathKind::kGuided: return "GIG";
  }
  return "?";
}

PathKind parse_path_kind(std::string_view name) {
  if (name == "IG") return PathKind::kStraightLine;
  if (name == "BlurIG") return PathKind::kBlur;
  if (name == "GIG") return PathKind::kGuided;
  throw InvalidArgument("unknown path method \"" + std::string(name) + "\"");
}

double default_blur_scale(const Shape& shape) {
  const double sigma = static_cast<double>(std::min(shape.height, shape.width));
  return 2.0 * sigma * sigma;
}

ImageTensor black_baseline(const Shape& shape) { return ImageTensor(shape, 0.0); }

namespace {

void check_pair(const ImageTensor& x_ref, const ImageTensor& x, int steps) {
  if (!(x_ref.shape() == x.shape())) throw InvalidArgument("path endpoints differ in shape");
  if (steps < 1) throw InvalidArgument("path needs at least one step");
}

}  // namespace

PathSample straight_line_path(const ImageTensor& x_ref, const ImageTensor& x, int steps) {
  check_pair(x_ref, x, steps);
  PathSample path;
  path.kind = PathKind::kStraightLine;
  path.baseline = "reference";
  path.points.reserve(static_cast<std::size_t>(steps) + 1);
  for (int j = 0; j < steps; ++j) {
    const double alpha = static_cast<double>(j) / steps;
    ImageTensor p(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) p[i] = x_ref[i] + alpha * (x[i] - x_ref[i]);
    path.points.push_back(std::move(p));
    path.alphas.push_back(alpha);
  }
  path.points.push_back(x);
  path.alphas.push_back(1.0);
  return path;
}

PathSample blur_path(const ImageTensor& x, double max_scale, int steps) {
  if (steps < 1) throw InvalidArgument("path needs at least one step");
  if (!(max_scale > 0.0) || !std::isfinite(max_scale)) {
    throw InvalidArgument("blur max_scale must be positive");
  }
  PathSample path;
  path.kind = PathKind::kBlur;
  path.baseline = "blurred";
  path.points.reserve(static_cast<std::size_t>(steps) + 1);
  for (int j = 0; j < steps; ++j) {
    const double t = 1.0 - static_cast<double>(j) / steps;
    const double alpha = max_scale * t * t;
    path.points.push_back(gaussian_blur(x, std::sqrt(alpha / 2.0)));
    path.alphas.push_back(alpha);
  }
  path.points.push_back(x);
  path.alphas.push_back(0.0);
  return path;
}

PathSample guided_path(const DifferentiableModel& model, int c, const ImageTensor& x_ref,
                       const ImageTensor& x, int steps, double fraction) {
  check_pair(x_ref, x, steps);
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw InvalidArgument("guided path fraction must be in (0, 1]");
  }
  PathSample path;
  path.kind = PathKind::kGuided;
  path.baseline = "reference";
  path.points.reserve(static_cast<std::size_t>(steps) + 1);
  path.points.push_back(x_ref);
  path.alphas.push_back(0.0);

  ImageTensor current = x_ref;
  std::vector<std::size_t> active;
  active.reserve(x.size());
  for (int t = 0; t + 1 < steps; ++t) {
    active.clear();
    double l1 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (current[i] != x[i]) {
        active.push_back(i);
        l1 += std::abs(x[i] - current[i]);
      }
    }
    if (!active.empty()) {
      const Tensor g = model.gradient(current, c);
      std::stable_sort(active.begin(), active.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(g[a]) < std::abs(g[b]);
      });
      double budget = l1 / static_cast<double>(steps - t);
      std::size_t begin = 0;
      while (budget > 0.0 && begin < active.size()) {
        const std::size_t remaining = active.size() - begin;
        const auto take = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(remaining) - 1e-12)));
        const std::size_t end = std::min(active.size(), begin + take);
        double selected = 0.0;
        for (std::size_t k = begin; k < end; ++k) selected += std::abs(x[active[k]] - current[active[k]]);
        if (selected <= budget) {
          // Selection finishes this step; spill the rest of the budget over.
          for (std::size_t k = begin; k < end; ++k) current[active[k]] = x[active[k]];
          budget -= selected;
          begin = end;
        } else {
          // Each selected coordinate covers the same share of its own gap.
          const double keep = 1.0 - budget / selected;
          for (std::size_t k = begin; k < end; ++k) {
            const std::size_t i = active[k];
            current[i] = x[i] - (x[i] - current[i]) * keep;
          }
          budget = 0.0;
        }
      }
    }
    path.points.push_back(current);
    path.alphas.push_back(static_cast<double>(t + 1) / steps);
  }
  path.points.push_back(x);
  path.alphas.push_back(1.0);
  return path;
}

}  // namespace idgi
