#pragma once

// Batch experiment driver: manifests and model files in, CSV tables out.
// Per-image work runs on an OpenMP worker pool; results are merged in
// manifest order so output bytes do not depend on the worker count.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "idgi/attribution.hpp"
#include "idgi/metrics.hpp"
#include "idgi/models.hpp"
#include "idgi/stability.hpp"

namespace idgi {

// Bad or inconsistent configuration (CLI exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failure while running a valid configuration (CLI exit code 2).
class RunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class MetricId {
  kInsertionProb,
  kInsertionRatio,
  kAicEntropy,
  kSicEntropy,
  kAicMsssim,
  kSicMsssim,
  kStability,
};

std::string_view to_string(MetricId id);
MetricId parse_metric(std::string_view name);

struct BenchmarkConfig {
  std::filesystem::path manifest;
  std::vector<std::filesystem::path> models;
  std::vector<Method> methods;
  std::vector<int> steps{8, 16, 32, 64, 128};
  std::vector<MetricId> metrics;
  std::uint64_t seed = 0;
  int workers = 1;
  std::filesystem::path output_dir = "out";

  // 0 keeps every correctly classified image; otherwise a seed-chosen
  // subset of that size, kept in manifest order.
  int max_images = 0;
  int insertion_steps = 64;
  BaseMode insertion_base = BaseMode::kBlurred;
  int pic_bins = 25;
  int quality = 75;
  double blur_max_scale = 0.0;  // 0: default_blur_scale()
  double guided_fraction = 0.25;

  // Throws ConfigError on empty methods/metrics/steps, unsorted or
  // non-positive steps, and out-of-range numbers.
  void validate() const;
};

// Flat "key = value" text, '#' comments, comma-separated lists. Relative
// paths resolve against `base_dir`.
BenchmarkConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
BenchmarkConfig load_config(const std::filesystem::path& path);

struct ManifestEntry {
  std::filesystem::path path;
  int label = 0;
};

// One "path,label" record per line; relative paths resolve against the
// manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

struct ResultRow {
  std::string model_id;
  std::string method;
  int steps = 0;
  std::string metric;
  double value = 0.0;           // mean over images
  int image_count = 0;
  double completeness_gap = 0;  // median over images
};

struct ImageValue {
  std::string model_id;
  std::size_t image = 0;  // index into the manifest
  std::string method;
  int steps = 0;
  std::string metric;
  double value = 0.0;
};

struct BenchmarkResult {
  std::vector<ResultRow> rows;
  std::vector<ImageValue> per_image;
  std::map<std::string, std::size_t> correct_counts;  // per model id
};

// Computes every (model, method, steps, metric) cell over the correctly
// classified manifest images. Does not touch the filesystem beyond reading
// inputs.
BenchmarkResult evaluate_benchmark(const BenchmarkConfig& config);

// evaluate_benchmark + results.csv, results_full.csv, provenance.txt.
BenchmarkResult run_benchmark(const BenchmarkConfig& config);

struct DeltaRow {
  std::string model_id;
  std::string method;
  std::string metric;
  int low_steps = 0;
  int high_steps = 0;
  double delta = 0.0;  // value(high) - value(low)
};

struct SweepResult {
  BenchmarkResult benchmark;
  std::vector<DeltaRow> deltas;
};

std::vector<DeltaRow> step_deltas(const std::vector<ResultRow>& rows);

// run_benchmark over >= 2 step counts, plus deltas.csv.
SweepResult sweep_steps(const BenchmarkConfig& config);

// Stability of every configured method at the largest step count;
// writes stability.csv.
StabilityReport run_stability(const BenchmarkConfig& config);

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows, int precision);
void write_deltas_csv(std::ostream& out, const std::vector<DeltaRow>& rows);

// |channel sum| of an attribution file, min-max normalized, as 8-bit PGM.
ImageTensor saliency_image(const AttributionMap& attr);
void render_saliency(const std::filesystem::path& attr_file, const std::filesystem::path& out_pgm);

struct ToySuiteOptions {
  std::uint64_t seed = 7;
  int train_images = 300;
  int test_images = 100;
  TrainOptions training{};
};

struct ToySuite {
  std::filesystem::path manifest;
  std::filesystem::path test_manifest;
  std::filesystem::path model;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

// Writes images/, manifest.csv (all images), train.csv, test.csv,
// model.atbm and provenance.txt into out_dir.
ToySuite make_toy_suite(const ToySuiteOptions& options, const std::filesystem::path& out_dir);

}  // namespace idgi
