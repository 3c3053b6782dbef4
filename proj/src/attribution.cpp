#include "idgi/attribution.hpp"

#include <cmath>

#include "binary_io.hpp"
#include "idgi/errors.hpp"

namespace idgi {

std::string to_string(const Method& method) {
  std::string name(to_string(method.path));
  if (method.idgi) name += "+IDGI";
  return name;
}

Method parse_method(std::string_view name) {
  constexpr std::string_view kSuffix = "+IDGI";
  Method m;
  if (name.size() > kSuffix.size() && name.substr(name.size() - kSuffix.size()) == kSuffix) {
    m.idgi = true;
    name.remove_suffix(kSuffix.size());
  }
  m.path = parse_path_kind(name);
  return m;
}

namespace {

void check_path(const DifferentiableModel& model, const PathSample& path) {
  if (path.points.size() < 2) throw InvalidArgument("path needs at least one step");
  const Shape s = model.input_shape();
  for (const auto& p : path.points) {
    if (!(p.shape() == s)) throw InvalidArgument("path point shape does not match model input");
  }
}

double dot(const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

Method method_of(const PathSample& path, bool idgi) { return Method{path.kind, idgi}; }

}  // namespace

PathEvaluation evaluate_path(const DifferentiableModel& model, int c, const PathSample& path,
                             Execution exec) {
  check_path(model, path);
  const int n = path.steps();
  PathEvaluation out;
  out.scores.assign(static_cast<std::size_t>(n) + 1, 0.0);
  out.gradients.assign(static_cast<std::size_t>(n), Tensor());
  if (exec == Execution::kSerial) {
    for (int j = 0; j <= n; ++j) {
      out.scores[j] = model.score(path.points[j], c);
      if (j < n) out.gradients[j] = model.gradient(path.points[j], c);
    }
    return out;
  }
  // Each point is independent; results land in their own slots so the
  // outcome does not depend on scheduling.
#pragma omp parallel for schedule(dynamic)
  for (int j = 0; j <= n; ++j) {
    out.scores[j] = model.score(path.points[j], c);
    if (j < n) out.gradients[j] = model.gradient(path.points[j], c);
  }
  return out;
}

AttributionMap riemann_attribution(const DifferentiableModel& model, int c,
                                   const PathSample& path, Execution exec) {
  const PathEvaluation eval = evaluate_path(model, c, path, exec);
  AttributionMap attr;
  attr.values = Tensor(path.points.front().shape());
  attr.method = method_of(path, false);
  attr.steps = path.steps();
  attr.f_start = eval.scores.front();
  attr.f_end = eval.scores.back();
  for (int j = 0; j < path.steps(); ++j) {
    const auto& g = eval.gradients[j];
    const auto& from = path.points[j];
    const auto& to = path.points[j + 1];
    for (std::size_t i = 0; i < g.size(); ++i) attr.values[i] += g[i] * (to[i] - from[i]);
  }
  return attr;
}

AttributionMap idgi_attribution(const DifferentiableModel& model, int c, const PathSample& path,
                                double eps_g, Execution exec) {
  const PathEvaluation eval = evaluate_path(model, c, path, exec);
  AttributionMap attr;
  attr.values = Tensor(path.points.front().shape());
  attr.method = method_of(path, true);
  attr.steps = path.steps();
  attr.f_start = eval.scores.front();
  attr.f_end = eval.scores.back();
  for (int j = 0; j < path.steps(); ++j) {
    const double d = eval.scores[j + 1] - eval.scores[j];
    const auto& g = eval.gradients[j];
    const double gg = dot(g, g);
    if (!(gg >= eps_g)) {
      attr.residual += d;
      continue;
    }
    const double scale = d / gg;
    for (std::size_t i = 0; i < g.size(); ++i) attr.values[i] += g[i] * g[i] * scale;
  }
  return attr;
}

AttributionMap attribute(const DifferentiableModel& model, int c, const PathSample& path,
                         bool use_idgi, Execution exec) {
  return use_idgi ? idgi_attribution(model, c, path, kDefaultGradientFloor, exec)
                  : riemann_attribution(model, c, path, exec);
}

ImageTensor projection_point(const ImageTensor& x_j, const Tensor& g, double d) {
  if (!(x_j.shape() == g.shape())) throw InvalidArgument("gradient shape does not match point");
  const double gg = dot(g, g);
  if (!(gg > 0.0)) throw DegenerateGradient("projection point undefined for a zero gradient");
  ImageTensor out = x_j;
  const double scale = d / gg;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += g[i] * scale;
  return out;
}

std::vector<double> projection_error_profile(const DifferentiableModel& model, int c,
                                             const PathSample& path, Execution exec) {
  const PathEvaluation eval = evaluate_path(model, c, path, exec);
  std::vector<double> errors;
  errors.reserve(static_cast<std::size_t>(path.steps()));
  for (int j = 0; j < path.steps(); ++j) {
    const auto& g = eval.gradients[j];
    if (!(dot(g, g) > 0.0)) continue;
    const double d = eval.scores[j + 1] - eval.scores[j];
    const ImageTensor xp = projection_point(path.points[j], g, d);
    errors.push_back(std::abs(model.score(xp, c) - eval.scores[j + 1]));
  }
  return errors;
}

double completeness_gap(const AttributionMap& attr) {
  double total = 0.0;
  for (double v : attr.values.values()) total += v;
  return std::abs(total + attr.residual - (attr.f_end - attr.f_start));
}

CollapsedSaliency channel_collapse(const Tensor& values) {
  const Shape flat{values.height(), values.width(), 1};
  CollapsedSaliency out{Tensor(flat), Tensor(flat)};
  const auto ch = static_cast<std::size_t>(values.channels());
  for (std::size_t p = 0; p < flat.pixels(); ++p) {
    double s = 0.0, a = 0.0;
    for (std::size_t k = 0; k < ch; ++k) {
      s += values[p * ch + k];
      a += std::abs(values[p * ch + k]);
    }
    out.signed_sum[p] = s;
    out.absolute_sum[p] = a;
  }
  return out;
}

CollapsedSaliency channel_collapse(const AttributionMap& attr) {
  return channel_collapse(attr.values);
}

// ---- serialization -----------------------------------------------------------

namespace {

constexpr std::string_view kAttributionMagic = "ATBA";

std::uint32_t path_tag(PathKind kind) {
  switch (kind) {
    case PathKind::kStraightLine: return 1;
    case PathKind::kBlur: return 2;
    case PathKind::kGuided: return 3;
  }
  return 0;
}

}  // namespace

std::string encode_attribution(const AttributionMap& attr) {
  detail::ByteWriter w;
  w.magic(kAttributionMagic);
  w.u32(kAttributionFormatVersion);
  w.u32(path_tag(attr.method.path));
  w.u32(attr.method.idgi ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(attr.steps));
  w.u32(static_cast<std::uint32_t>(attr.values.height()));
  w.u32(static_cast<std::uint32_t>(attr.values.width()));
  w.u32(static_cast<std::uint32_t>(attr.values.channels()));
  w.f64s(attr.values.data());
  w.f64(attr.residual);
  w.f64(attr.f_start);
  w.f64(attr.f_end);
  return w.finish();
}

AttributionMap decode_attribution(std::string bytes) {
  detail::ByteReader r(std::move(bytes), kAttributionMagic);
  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32();
  if (version != kAttributionFormatVersion) {
    throw UnsupportedVersion(version, kAttributionFormatVersion, version_at);
  }
  if (!r.crc_ok()) throw ParseError("attribution checksum mismatch", r.crc_offset());
  AttributionMap attr;
  const std::size_t tag_at = r.offset();
  switch (r.u32()) {
    case 1: attr.method.path = PathKind::kStraightLine; break;
    case 2: attr.method.path = PathKind::kBlur; break;
    case 3: attr.method.path = PathKind::kGuided; break;
    default: throw ParseError("unknown path method tag", tag_at);
  }
  const std::size_t flag_at = r.offset();
  const std::uint32_t flag = r.u32();
  if (flag > 1) throw ParseError("bad IDGI flag", flag_at);
  attr.method.idgi = flag == 1;
  attr.steps = static_cast<int>(r.u32());
  const std::size_t shape_at = r.offset();
  Shape s;
  s.height = static_cast<int>(r.u32());
  s.width = static_cast<int>(r.u32());
  s.channels = static_cast<int>(r.u32());
  if (s.height <= 0 || s.width <= 0 || s.channels <= 0 || s.size() > (std::size_t{1} << 28)) {
    throw ParseError("implausible attribution shape", shape_at);
  }
  const std::size_t values_at = r.offset();
  auto values = r.f64s(s.size());
  try {
    attr.values = Tensor(s, std::move(values));
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("invalid attribution values: ") + e.what(), values_at);
  }
  attr.residual = r.f64();
  attr.f_start = r.f64();
  attr.f_end = r.f64();
  r.expect_end();
  return attr;
}

void save_attribution(const AttributionMap& attr, const std::filesystem::path& path) {
  detail::write_file(path, encode_attribution(attr));
}

AttributionMap load_attribution(const std::filesystem::path& path) {
  return decode_attribution(detail::read_file(path));
}

}  // namespace idgi
