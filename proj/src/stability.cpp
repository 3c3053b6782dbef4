#include "idgi/stability.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "idgi/errors.hpp"

namespace idgi {

const std::array<int, 64> kLuminanceQuantTable = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99};

std::array<int, 64> scaled_quant_table(int quality) {
  if (quality < 1 || quality > 100) throw InvalidArgument("quality must be in 1..100");
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> table{};
  for (std::size_t i = 0; i < 64; ++i) {
    table[i] = std::clamp((kLuminanceQuantTable[i] * scale + 50) / 100, 1, 255);
  }
  return table;
}

namespace {

// basis[u][x] = c(u) cos((2x+1) u pi / 16), orthonormal.
const std::array<std::array<double, 8>, 8>& dct_basis() {
  static const auto basis = [] {
    std::array<std::array<double, 8>, 8> b{};
    for (int u = 0; u < 8; ++u) {
      const double cu = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int x = 0; x < 8; ++x) {
        b[u][x] = cu * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
      }
    }
    return b;
  }();
  return basis;
}

}  // namespace

std::array<double, 64> dct8x8(const std::array<double, 64>& block) {
  const auto& b = dct_basis();
  std::array<double, 64> rows{}, out{};
  for (int y = 0; y < 8; ++y) {
    for (int u = 0; u < 8; ++u) {
      double acc = 0.0;
      for (int x = 0; x < 8; ++x) acc += b[u][x] * block[y * 8 + x];
      rows[y * 8 + u] = acc;
    }
  }
  for (int v = 0; v < 8; ++v) {
    for (int u = 0; u < 8; ++u) {
      double acc = 0.0;
      for (int y = 0; y < 8; ++y) acc += b[v][y] * rows[y * 8 + u];
      out[v * 8 + u] = acc;
    }
  }
  return out;
}

std::array<double, 64> idct8x8(const std::array<double, 64>& coeffs) {
  const auto& b = dct_basis();
  std::array<double, 64> cols{}, out{};
  for (int y = 0; y < 8; ++y) {
    for (int u = 0; u < 8; ++u) {
      double acc = 0.0;
      for (int v = 0; v < 8; ++v) acc += b[v][y] * coeffs[v * 8 + u];
      cols[y * 8 + u] = acc;
    }
  }
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      double acc = 0.0;
      for (int u = 0; u < 8; ++u) acc += b[u][x] * cols[y * 8 + u];
      out[y * 8 + x] = acc;
    }
  }
  return out;
}

ImageTensor compress(const ImageTensor& img, int quality) {
  const auto table = scaled_quant_table(quality);
  const int h = img.height(), w = img.width(), ch = img.channels();
  ImageTensor out(img.shape());
  for (int c = 0; c < ch; ++c) {
    for (int by = 0; by < h; by += 8) {
      for (int bx = 0; bx < w; bx += 8) {
        std::array<double, 64> block{};
        for (int y = 0; y < 8; ++y) {
          for (int x = 0; x < 8; ++x) {
            const int sy = std::min(by + y, h - 1);
            const int sx = std::min(bx + x, w - 1);
            block[static_cast<std::size_t>(y * 8 + x)] = img.at(sy, sx, c) * 255.0 - 128.0;
          }
        }
        auto coeffs = dct8x8(block);
        for (std::size_t i = 0; i < 64; ++i) {
          coeffs[i] = std::round(coeffs[i] / table[i]) * table[i];
        }
        const auto pixels = idct8x8(coeffs);
        for (int y = 0; y < 8 && by + y < h; ++y) {
          for (int x = 0; x < 8 && bx + x < w; ++x) {
            const double v = (pixels[static_cast<std::size_t>(y * 8 + x)] + 128.0) / 255.0;
            out.at(by + y, bx + x, c) = std::clamp(v, 0.0, 1.0);
          }
        }
      }
    }
  }
  return out;
}

PathSample make_path(const MethodDescriptor& desc, const DifferentiableModel& model, int c,
                     const ImageTensor& x) {
  switch (desc.method.path) {
    case PathKind::kStraightLine:
      return straight_line_path(black_baseline(x.shape()), x, desc.steps);
    case PathKind::kBlur:
      return blur_path(x, desc.blur_max_scale > 0.0 ? desc.blur_max_scale : default_blur_scale(x.shape()),
                       desc.steps);
    case PathKind::kGuided:
      return guided_path(model, c, black_baseline(x.shape()), x, desc.steps, desc.guided_fraction);
  }
  throw InvalidArgument("unknown path kind");
}

AttributionMap compute_attribution(const MethodDescriptor& desc, const DifferentiableModel& model,
                                   int c, const ImageTensor& x, Execution exec) {
  return attribute(model, c, make_path(desc, model, c, x), desc.method.idgi, exec);
}

double neg_log_mse(double mse) {
  if (!(mse >= 0.0) || !std::isfinite(mse)) throw InvalidArgument("mse must be finite and >= 0");
  if (mse == 0.0) return kNegLogMseCap;
  return std::min(-std::log(mse), kNegLogMseCap);
}

StabilityEntry stability_between(const MethodDescriptor& desc, const DifferentiableModel& model,
                                 int c, const ImageTensor& a, const ImageTensor& b,
                                 Execution exec) {
  const auto s1 = minmax_normalize(
      channel_collapse(compute_attribution(desc, model, c, a, exec)).signed_sum.values());
  const auto s2 = minmax_normalize(
      channel_collapse(compute_attribution(desc, model, c, b, exec)).signed_sum.values());
  double total = 0.0;
  for (std::size_t i = 0; i < s1.size(); ++i) total += (s1[i] - s2[i]) * (s1[i] - s2[i]);
  StabilityEntry e;
  e.method = to_string(desc.method);
  e.mse = total / static_cast<double>(s1.size());
  e.neg_log_mse = neg_log_mse(e.mse);
  return e;
}

StabilityEntry stability_mse(const MethodDescriptor& desc, const DifferentiableModel& model,
                             int c, const ImageTensor& img, int quality, Execution exec) {
  return stability_between(desc, model, c, img, compress(img, quality), exec);
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

StabilityEntry StabilityReport::summary(const std::string& method) const {
  std::vector<double> mse, nlm;
  for (const auto& e : entries) {
    if (e.method != method) continue;
    mse.push_back(e.mse);
    nlm.push_back(e.neg_log_mse);
  }
  if (mse.empty()) throw InvalidArgument("no stability entries for method " + method);
  return StabilityEntry{method, "median", median(mse), median(nlm)};
}

void write_stability_csv(std::ostream& out, const StabilityReport& report) {
  const auto old = out.precision(17);
  out << "method,image_id,mse,neg_log_mse\n";
  std::vector<std::string> methods;
  for (const auto& e : report.entries) {
    out << e.method << ',' << e.image_id << ',' << e.mse << ',' << e.neg_log_mse << '\n';
    if (std::find(methods.begin(), methods.end(), e.method) == methods.end()) {
      methods.push_back(e.method);
    }
  }
  for (const auto& m : methods) {
    const auto s = report.summary(m);
    out << s.method << ',' << s.image_id << ',' << s.mse << ',' << s.neg_log_mse << '\n';
  }
  out.precision(old);
}

}  // namespace idgi
