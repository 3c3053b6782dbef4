#include "idgi/bench.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "idgi/errors.hpp"
#include "idgi/rng.hpp"

namespace idgi {

namespace fs = std::filesystem;

// ---- metric ids ----------------------------------------------------------------

std::string_view to_string(MetricId id) {
  switch (id) {
    case MetricId::kInsertionProb: return "insertion-prob";
    case MetricId::kInsertionRatio: return "insertion-ratio";
    case MetricId::kAicEntropy: return "aic-entropy";
    case MetricId::kSicEntropy: return "sic-entropy";
    case MetricId::kAicMsssim: return "aic-msssim";
    case MetricId::kSicMsssim: return "sic-msssim";
    case MetricId::kStability: return "stability";
  }
  return "?";
}

MetricId parse_metric(std::string_view name) {
  for (auto id : {MetricId::kInsertionProb, MetricId::kInsertionRatio, MetricId::kAicEntropy,
                  MetricId::kSicEntropy, MetricId::kAicMsssim, MetricId::kSicMsssim,
                  MetricId::kStability}) {
    if (to_string(id) == name) return id;
  }
  throw ConfigError("unknown metric \"" + std::string(name) + "\"");
}

// ---- config ---------------------------------------------------------------------

void BenchmarkConfig::validate() const {
  if (methods.empty()) throw ConfigError("no methods configured");
  if (metrics.empty()) throw ConfigError("no metrics configured");
  if (steps.empty()) throw ConfigError("no step counts configured");
  if (models.empty()) throw ConfigError("no models configured");
  if (manifest.empty()) throw ConfigError("no manifest configured");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i] < 1) throw ConfigError("step counts must be positive");
    if (i > 0 && steps[i] <= steps[i - 1]) throw ConfigError("step counts must be strictly ascending");
  }
  if (workers < 1) throw ConfigError("workers must be at least 1");
  if (max_images < 0) throw ConfigError("max_images must be non-negative");
  if (insertion_steps < 1) throw ConfigError("insertion_steps must be positive");
  if (pic_bins < 1) throw ConfigError("pic_bins must be positive");
  if (quality < 1 || quality > 100) throw ConfigError("quality must be in 1..100");
  if (blur_max_scale < 0.0) throw ConfigError("blur_max_scale must be non-negative");
  if (!(guided_fraction > 0.0 && guided_fraction <= 1.0)) {
    throw ConfigError("gig_fraction must be in (0, 1]");
  }
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
    if (!piece.empty()) out.push_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T v{};
  in >> v;
  if (!in || !(in >> std::ws).eof()) {
    throw ConfigError("bad numeric value for " + key + ": \"" + value + "\"");
  }
  return v;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

BenchmarkConfig parse_config(const std::string& text, const fs::path& base_dir) {
  BenchmarkConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key == "manifest") {
      cfg.manifest = resolve(base_dir, value);
    } else if (key == "models") {
      cfg.models.clear();
      for (const auto& m : split_list(value)) cfg.models.push_back(resolve(base_dir, m));
    } else if (key == "methods") {
      cfg.methods.clear();
      for (const auto& m : split_list(value)) {
        try {
          cfg.methods.push_back(parse_method(m));
        } catch (const InvalidArgument& e) {
          throw ConfigError(e.what());
        }
      }
    } else if (key == "steps") {
      cfg.steps.clear();
      for (const auto& s : split_list(value)) cfg.steps.push_back(parse_number<int>(key, s));
    } else if (key == "metrics") {
      cfg.metrics.clear();
      for (const auto& m : split_list(value)) cfg.metrics.push_back(parse_metric(m));
    } else if (key == "seed") {
      cfg.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "workers") {
      cfg.workers = parse_number<int>(key, value);
    } else if (key == "output") {
      cfg.output_dir = resolve(base_dir, value);
    } else if (key == "max_images") {
      cfg.max_images = parse_number<int>(key, value);
    } else if (key == "insertion_steps") {
      cfg.insertion_steps = parse_number<int>(key, value);
    } else if (key == "insertion_base") {
      if (value == "blurred") {
        cfg.insertion_base = BaseMode::kBlurred;
      } else if (value == "black") {
        cfg.insertion_base = BaseMode::kBlack;
      } else {
        throw ConfigError("insertion_base must be blurred or black");
      }
    } else if (key == "pic_bins") {
      cfg.pic_bins = parse_number<int>(key, value);
    } else if (key == "quality") {
      cfg.quality = parse_number<int>(key, value);
    } else if (key == "blur_max_scale") {
      cfg.blur_max_scale = parse_number<double>(key, value);
    } else if (key == "gig_fraction") {
      cfg.guided_fraction = parse_number<double>(key, value);
    } else {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key \"" + key + "\"");
    }
  }
  return cfg;
}

BenchmarkConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw RunError("cannot open manifest " + path.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw RunError(path.string() + ":" + std::to_string(line_no) + ": expected path,label");
    }
    ManifestEntry e;
    e.path = resolve(path.parent_path(), trim(std::string_view(line).substr(0, comma)));
    try {
      e.label = parse_number<int>("label", trim(std::string_view(line).substr(comma + 1)));
    } catch (const ConfigError&) {
      throw RunError(path.string() + ":" + std::to_string(line_no) + ": bad label");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

// ---- evaluation -----------------------------------------------------------------

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct LoadedModel {
  std::string id;
  std::unique_ptr<DifferentiableModel> model;
};

std::vector<LoadedModel> load_models(const BenchmarkConfig& config) {
  std::vector<LoadedModel> out;
  for (const auto& p : config.models) {
    try {
      out.push_back({p.stem().string(), load_model(p)});
    } catch (const std::exception& e) {
      throw RunError("cannot load model " + p.string() + ": " + e.what());
    }
  }
  return out;
}

std::vector<ImageTensor> load_images(const std::vector<ManifestEntry>& entries) {
  std::vector<ImageTensor> images;
  images.reserve(entries.size());
  for (const auto& e : entries) {
    try {
      images.push_back(read_pnm(e.path));
    } catch (const std::exception& ex) {
      throw RunError("cannot read image " + e.path.string() + ": " + ex.what());
    }
  }
  return images;
}

// Indices of correctly classified images, optionally thinned to max_images
// by a seeded draw (kept in manifest order).
std::vector<std::size_t> select_images(const DifferentiableModel& model,
                                       const std::vector<ImageTensor>& images,
                                       const std::vector<ManifestEntry>& entries,
                                       const BenchmarkConfig& config) {
  std::vector<std::size_t> correct;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!(images[i].shape() == model.input_shape())) continue;
    if (entries[i].label < 0 || entries[i].label >= model.num_classes()) continue;
    if (model.argmax(images[i]) == entries[i].label) correct.push_back(i);
  }
  if (config.max_images > 0 && correct.size() > static_cast<std::size_t>(config.max_images)) {
    Rng rng(config.seed);
    std::vector<std::size_t> pick = correct;
    for (std::size_t i = pick.size(); i > 1; --i) std::swap(pick[i - 1], pick[rng.below(i)]);
    pick.resize(static_cast<std::size_t>(config.max_images));
    std::sort(pick.begin(), pick.end());
    correct = std::move(pick);
  }
  return correct;
}

double metric_value(MetricId metric, const BenchmarkConfig& config, const MethodDescriptor& desc,
                    const DifferentiableModel& model, int c, const ImageTensor& img,
                    const Tensor& saliency, double p_original) {
  const auto sal = saliency.values();
  switch (metric) {
    case MetricId::kInsertionProb:
    case MetricId::kInsertionRatio: {
      const auto curve =
          insertion_curve(model, c, img, sal, config.insertion_base, config.insertion_steps);
      return insertion_score(curve,
                             metric == MetricId::kInsertionProb ? InsertionMode::kProbability
                                                                : InsertionMode::kProbabilityRatio,
                             p_original);
    }
    case MetricId::kAicEntropy:
    case MetricId::kSicEntropy:
    case MetricId::kAicMsssim:
    case MetricId::kSicMsssim: {
      PicOptions opts;
      opts.bins = config.pic_bins;
      opts.estimator = metric == MetricId::kAicEntropy || metric == MetricId::kSicEntropy
                           ? Estimator::kNormalizedEntropy
                           : Estimator::kMsssim;
      opts.mode = metric == MetricId::kAicEntropy || metric == MetricId::kAicMsssim
                      ? PicMode::kAccuracy
                      : PicMode::kSoftmaxRatio;
      return auc(pic_curve(model, c, img, sal, opts));
    }
    case MetricId::kStability: {
      const auto other = channel_collapse(compute_attribution(
          desc, model, c, compress(img, config.quality), Execution::kSerial));
      const auto s1 = minmax_normalize(sal);
      const auto s2 = minmax_normalize(other.signed_sum.values());
      double total = 0.0;
      for (std::size_t i = 0; i < s1.size(); ++i) total += (s1[i] - s2[i]) * (s1[i] - s2[i]);
      return neg_log_mse(total / static_cast<double>(s1.size()));
    }
  }
  return 0.0;
}

}  // namespace

BenchmarkResult evaluate_benchmark(const BenchmarkConfig& config) {
  config.validate();
  const auto entries = read_manifest(config.manifest);
  if (entries.empty()) throw RunError("manifest " + config.manifest.string() + " is empty");
  const auto images = load_images(entries);
  const auto models = load_models(config);

  const std::size_t n_methods = config.methods.size();
  const std::size_t n_steps = config.steps.size();
  const std::size_t n_metrics = config.metrics.size();
  const std::size_t cells = n_methods * n_steps;

  BenchmarkResult result;
  for (const auto& lm : models) {
    const auto& model = *lm.model;
    const auto chosen = select_images(model, images, entries, config);
    if (chosen.empty()) {
      throw RunError("model " + lm.id + " classifies no manifest image correctly");
    }
    result.correct_counts[lm.id] = chosen.size();

    // slot[image][cell][metric]; gaps[image][cell]
    std::vector<double> values(chosen.size() * cells * n_metrics, 0.0);
    std::vector<double> gaps(chosen.size() * cells, 0.0);
    std::vector<std::string> errors(chosen.size());

    const auto n_images = static_cast<long>(chosen.size());
#pragma omp parallel for schedule(dynamic) num_threads(config.workers)
    for (long k = 0; k < n_images; ++k) {
      const auto i = static_cast<std::size_t>(k);
      try {
        const ImageTensor& img = images[chosen[i]];
        const int c = entries[chosen[i]].label;
        const double p_original = model.score(img, c);
        for (std::size_t m = 0; m < n_methods; ++m) {
          for (std::size_t s = 0; s < n_steps; ++s) {
            MethodDescriptor desc{config.methods[m], config.steps[s], config.blur_max_scale,
                                  config.guided_fraction};
            const AttributionMap attr =
                compute_attribution(desc, model, c, img, Execution::kSerial);
            const std::size_t cell = m * n_steps + s;
            gaps[i * cells + cell] = completeness_gap(attr);
            const Tensor saliency = channel_collapse(attr).signed_sum;
            for (std::size_t q = 0; q < n_metrics; ++q) {
              values[(i * cells + cell) * n_metrics + q] =
                  metric_value(config.metrics[q], config, desc, model, c, img, saliency, p_original);
            }
          }
        }
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
    for (std::size_t i = 0; i < errors.size(); ++i) {
      if (!errors[i].empty()) {
        throw RunError("model " + lm.id + ", image " + entries[chosen[i]].path.string() + ": " +
                       errors[i]);
      }
    }

    for (std::size_t m = 0; m < n_methods; ++m) {
      for (std::size_t s = 0; s < n_steps; ++s) {
        const std::size_t cell = m * n_steps + s;
        std::vector<double> cell_gaps;
        for (std::size_t i = 0; i < chosen.size(); ++i) cell_gaps.push_back(gaps[i * cells + cell]);
        const double gap = median(cell_gaps);
        for (std::size_t q = 0; q < n_metrics; ++q) {
          double total = 0.0;
          for (std::size_t i = 0; i < chosen.size(); ++i) {
            const double v = values[(i * cells + cell) * n_metrics + q];
            total += v;
            result.per_image.push_back({lm.id, chosen[i], to_string(config.methods[m]),
                                        config.steps[s], std::string(to_string(config.metrics[q])),
                                        v});
          }
          result.rows.push_back({lm.id, to_string(config.methods[m]), config.steps[s],
                                 std::string(to_string(config.metrics[q])),
                                 total / static_cast<double>(chosen.size()),
                                 static_cast<int>(chosen.size()), gap});
        }
      }
    }
  }
  return result;
}

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows, int precision) {
  const auto old = out.precision(precision);
  out << "model,method,steps,metric,value,images,completeness_gap\n";
  for (const auto& r : rows) {
    out << r.model_id << ',' << r.method << ',' << r.steps << ',' << r.metric << ',' << r.value
        << ',' << r.image_count << ',' << r.completeness_gap << '\n';
  }
  out.precision(old);
}

void write_deltas_csv(std::ostream& out, const std::vector<DeltaRow>& rows) {
  const auto old = out.precision(6);
  out << "model,method,metric,low_steps,high_steps,delta\n";
  for (const auto& r : rows) {
    out << r.model_id << ',' << r.method << ',' << r.metric << ',' << r.low_steps << ','
        << r.high_steps << ',' << r.delta << '\n';
  }
  out.precision(old);
}

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw RunError("cannot create directory " + dir.string());
}

template <typename Fn>
void write_text(const fs::path& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RunError("cannot write " + path.string());
  fn(out);
  if (!out) throw RunError("failed writing " + path.string());
}

}  // namespace

BenchmarkResult run_benchmark(const BenchmarkConfig& config) {
  config.validate();
  ensure_dir(config.output_dir);
  BenchmarkResult result = evaluate_benchmark(config);
  write_text(config.output_dir / "results.csv",
             [&](std::ostream& out) { write_results_csv(out, result.rows, 6); });
  write_text(config.output_dir / "results_full.csv",
             [&](std::ostream& out) { write_results_csv(out, result.rows, 17); });
  write_text(config.output_dir / "provenance.txt", [&](std::ostream& out) {
    out << "seed=" << config.seed << '\n' << "manifest=" << config.manifest.string() << '\n';
    for (const auto& [id, count] : result.correct_counts) {
      out << "correct_images." << id << '=' << count << '\n';
    }
  });
  return result;
}

std::vector<DeltaRow> step_deltas(const std::vector<ResultRow>& rows) {
  std::vector<DeltaRow> deltas;
  for (const auto& r : rows) {
    auto it = std::find_if(deltas.begin(), deltas.end(), [&](const DeltaRow& d) {
      return d.model_id == r.model_id && d.method == r.method && d.metric == r.metric;
    });
    if (it == deltas.end()) {
      deltas.push_back({r.model_id, r.method, r.metric, r.steps, r.steps, 0.0});
      it = std::prev(deltas.end());
    }
    it->low_steps = std::min(it->low_steps, r.steps);
    it->high_steps = std::max(it->high_steps, r.steps);
  }
  for (auto& d : deltas) {
    double low = 0.0, high = 0.0;
    for (const auto& r : rows) {
      if (r.model_id != d.model_id || r.method != d.method || r.metric != d.metric) continue;
      if (r.steps == d.low_steps) low = r.value;
      if (r.steps == d.high_steps) high = r.value;
    }
    d.delta = high - low;
  }
  return deltas;
}

SweepResult sweep_steps(const BenchmarkConfig& config) {
  if (config.steps.size() < 2) throw ConfigError("sweep needs at least two step counts");
  SweepResult sweep;
  sweep.benchmark = run_benchmark(config);
  sweep.deltas = step_deltas(sweep.benchmark.rows);
  write_text(config.output_dir / "deltas.csv",
             [&](std::ostream& out) { write_deltas_csv(out, sweep.deltas); });
  return sweep;
}

StabilityReport run_stability(const BenchmarkConfig& config) {
  config.validate();
  ensure_dir(config.output_dir);
  const auto entries = read_manifest(config.manifest);
  if (entries.empty()) throw RunError("manifest " + config.manifest.string() + " is empty");
  const auto images = load_images(entries);
  const auto models = load_models(config);
  const int steps = config.steps.back();

  StabilityReport report;
  for (const auto& lm : models) {
    const auto& model = *lm.model;
    const auto chosen = select_images(model, images, entries, config);
    if (chosen.empty()) {
      throw RunError("model " + lm.id + " classifies no manifest image correctly");
    }
    for (const auto& method : config.methods) {
      const MethodDescriptor desc{method, steps, config.blur_max_scale, config.guided_fraction};
      std::vector<StabilityEntry> slots(chosen.size());
      std::vector<std::string> errors(chosen.size());
      const auto n_images = static_cast<long>(chosen.size());
#pragma omp parallel for schedule(dynamic) num_threads(config.workers)
      for (long k = 0; k < n_images; ++k) {
        const auto i = static_cast<std::size_t>(k);
        try {
          slots[i] = stability_mse(desc, model, entries[chosen[i]].label, images[chosen[i]],
                                   config.quality, Execution::kSerial);
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      }
      for (std::size_t i = 0; i < chosen.size(); ++i) {
        if (!errors[i].empty()) throw RunError("stability on " + entries[chosen[i]].path.string() + ": " + errors[i]);
        slots[i].image_id = entries[chosen[i]].path.stem().string();
        if (models.size() > 1) slots[i].method = lm.id + ":" + slots[i].method;
        report.entries.push_back(std::move(slots[i]));
      }
    }
  }
  write_text(config.output_dir / "stability.csv",
             [&](std::ostream& out) { write_stability_csv(out, report); });
  return report;
}

// ---- rendering ------------------------------------------------------------------

ImageTensor saliency_image(const AttributionMap& attr) {
  const Tensor collapsed = channel_collapse(attr).signed_sum;
  std::vector<double> magnitude(collapsed.size());
  for (std::size_t i = 0; i < magnitude.size(); ++i) magnitude[i] = std::abs(collapsed[i]);
  return ImageTensor(collapsed.shape(), minmax_normalize(magnitude));
}

void render_saliency(const fs::path& attr_file, const fs::path& out_pgm) {
  write_pnm(out_pgm, saliency_image(load_attribution(attr_file)));
}

// ---- toy suite ----------------------------------------------------------------------

namespace {

// Round-trips through 8 bits so training sees exactly what the PGM files hold.
ImageTensor quantize8(const ImageTensor& img) {
  ImageTensor out = img;
  for (double& v : out.values()) v = static_cast<double>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0;
  return out;
}

}  // namespace

ToySuite make_toy_suite(const ToySuiteOptions& options, const fs::path& out_dir) {
  if (options.train_images < 1 || options.test_images < 0) {
    throw ConfigError("toy suite needs at least one training image");
  }
  ensure_dir(out_dir / "images");
  ToyDataset train = make_shapes_dataset(options.train_images, options.seed);
  ToyDataset test = make_shapes_dataset(options.test_images, options.seed + 1);
  for (auto& img : train.images) img = quantize8(img);
  for (auto& img : test.images) img = quantize8(img);

  TrainOptions training = options.training;
  training.seed = options.seed;
  TrainResult trained = train_toy(train, training);

  ToySuite suite;
  suite.manifest = out_dir / "manifest.csv";
  suite.test_manifest = out_dir / "test.csv";
  suite.model = out_dir / "model.atbm";
  suite.train_accuracy = trained.train_accuracy;
  suite.test_accuracy = accuracy(trained.model, test.images, test.labels);

  std::ostringstream all, train_lines, test_lines;
  auto emit = [&](const ToyDataset& data, const char* prefix, std::ostringstream& split) {
    for (std::size_t i = 0; i < data.images.size(); ++i) {
      char name[64];
      std::snprintf(name, sizeof name, "images/%s_%04zu.pgm", prefix, i);
      try {
        write_pnm(out_dir / name, data.images[i]);
      } catch (const std::exception& e) {
        throw RunError(e.what());
      }
      all << name << ',' << data.labels[i] << '\n';
      split << name << ',' << data.labels[i] << '\n';
    }
  };
  emit(train, "train", train_lines);
  emit(test, "test", test_lines);
  write_text(suite.manifest, [&](std::ostream& out) { out << all.str(); });
  write_text(out_dir / "train.csv", [&](std::ostream& out) { out << train_lines.str(); });
  write_text(suite.test_manifest, [&](std::ostream& out) { out << test_lines.str(); });
  try {
    save_model(trained.model, suite.model);
  } catch (const std::exception& e) {
    throw RunError(e.what());
  }
  write_text(out_dir / "provenance.txt", [&](std::ostream& out) {
    out.precision(6);
    out << "seed=" << options.seed << '\n'
        << "train_images=" << options.train_images << '\n'
        << "test_images=" << options.test_images << '\n'
        << "epochs=" << training.epochs << '\n'
        << "learning_rate=" << training.learning_rate << '\n'
        << "batch_size=" << training.batch_size << '\n'
        << "train_accuracy=" << suite.train_accuracy << '\n'
        << "test_accuracy=" << suite.test_accuracy << '\n';
  });
  return suite;
}

}  // namespace idgi
