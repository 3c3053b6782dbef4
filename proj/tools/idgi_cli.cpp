// Command-line driver for the attribution toolkit.
//
//   idgi_cli make-toy  --seed 7 --out suite/
//   idgi_cli saliency  --model suite/model.atbm --image img.pgm --method IG+IDGI --out a.atba
//   idgi_cli bench     --config bench.cfg            (or flags, see --help)
//   idgi_cli sweep     --config bench.cfg
//   idgi_cli stability --config bench.cfg
//   idgi_cli render    --attr a.atba --out a.pgm
//
// Exit codes: 0 success, 1 configuration error, 2 runtime error.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "idgi/bench.hpp"
#include "idgi/errors.hpp"
#include "idgi/stability.hpp"

namespace {

using namespace idgi;

struct RunFlags {
  std::string config;
  std::string manifest;
  std::vector<std::string> models;
  std::vector<std::string> methods;
  std::vector<int> steps;
  std::vector<std::string> metrics;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string out;
  int max_images = 0;
  int insertion_steps = 64;
  std::string insertion_base;
  int pic_bins = 25;
  int quality = 75;
  double blur_max_scale = 0.0;
  double gig_fraction = 0.25;

  std::vector<CLI::Option*> opts;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "key=value config file; flags override it");
  f.opts = {
      cmd->add_option("--manifest", f.manifest, "dataset manifest (path,label per line)"),
      cmd->add_option("--models", f.models, "model files")->delimiter(','),
      cmd->add_option("--methods", f.methods, "IG, BlurIG, GIG, each optionally +IDGI")->delimiter(','),
      cmd->add_option("--steps", f.steps, "step counts, ascending")->delimiter(','),
      cmd->add_option("--metrics", f.metrics,
                      "insertion-prob, insertion-ratio, aic-entropy, sic-entropy, aic-msssim, "
                      "sic-msssim, stability")
          ->delimiter(','),
      cmd->add_option("--seed", f.seed),
      cmd->add_option("--workers", f.workers, "worker threads"),
      cmd->add_option("--out", f.out, "output directory"),
      cmd->add_option("--max-images", f.max_images, "cap on evaluated images (0 = all)"),
      cmd->add_option("--insertion-steps", f.insertion_steps),
      cmd->add_option("--insertion-base", f.insertion_base, "blurred or black"),
      cmd->add_option("--pic-bins", f.pic_bins),
      cmd->add_option("--quality", f.quality, "compression quality for stability"),
      cmd->add_option("--blur-max-scale", f.blur_max_scale),
      cmd->add_option("--gig-fraction", f.gig_fraction),
  };
}

BenchmarkConfig build_config(const RunFlags& f) {
  BenchmarkConfig cfg = f.config.empty() ? BenchmarkConfig{} : load_config(f.config);
  auto given = [&](std::size_t i) { return f.opts[i]->count() > 0; };
  if (given(0)) cfg.manifest = f.manifest;
  if (given(1)) cfg.models.assign(f.models.begin(), f.models.end());
  if (given(2)) {
    cfg.methods.clear();
    for (const auto& m : f.methods) {
      try {
        cfg.methods.push_back(parse_method(m));
      } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
      }
    }
  }
  if (given(3)) cfg.steps = f.steps;
  if (given(4)) {
    cfg.metrics.clear();
    for (const auto& m : f.metrics) cfg.metrics.push_back(parse_metric(m));
  }
  if (given(5)) cfg.seed = f.seed;
  if (given(6)) cfg.workers = f.workers;
  if (given(7)) cfg.output_dir = f.out;
  if (given(8)) cfg.max_images = f.max_images;
  if (given(9)) cfg.insertion_steps = f.insertion_steps;
  if (given(10)) {
    if (f.insertion_base == "blurred") {
      cfg.insertion_base = BaseMode::kBlurred;
    } else if (f.insertion_base == "black") {
      cfg.insertion_base = BaseMode::kBlack;
    } else {
      throw ConfigError("--insertion-base must be blurred or black");
    }
  }
  if (given(11)) cfg.pic_bins = f.pic_bins;
  if (given(12)) cfg.quality = f.quality;
  if (given(13)) cfg.blur_max_scale = f.blur_max_scale;
  if (given(14)) cfg.guided_fraction = f.gig_fraction;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Path-integrated-gradient attribution toolkit"};
  app.require_subcommand(1);

  ToySuiteOptions toy;
  std::string toy_out = "toy";
  auto* make_toy = app.add_subcommand("make-toy", "generate the shapes dataset and train a model");
  make_toy->add_option("--seed", toy.seed);
  make_toy->add_option("--out", toy_out, "output directory")->required();
  make_toy->add_option("--train", toy.train_images);
  make_toy->add_option("--test", toy.test_images);
  make_toy->add_option("--epochs", toy.training.epochs);
  make_toy->add_option("--lr", toy.training.learning_rate);

  std::string sal_model, sal_image, sal_method = "IG", sal_out, sal_render;
  int sal_class = -1;
  MethodDescriptor sal_desc;
  auto* saliency = app.add_subcommand("saliency", "attribute one image and write an ATBA file");
  saliency->add_option("--model", sal_model)->required();
  saliency->add_option("--image", sal_image, "PGM/PPM input")->required();
  saliency->add_option("--class", sal_class, "target class (default: predicted)");
  saliency->add_option("--method", sal_method, "IG, BlurIG, GIG, each optionally +IDGI");
  saliency->add_option("--steps", sal_desc.steps);
  saliency->add_option("--blur-max-scale", sal_desc.blur_max_scale);
  saliency->add_option("--gig-fraction", sal_desc.guided_fraction);
  saliency->add_option("--out", sal_out, "attribution file")->required();
  saliency->add_option("--render", sal_render, "also write a PGM rendering");

  RunFlags bench_flags, sweep_flags, stab_flags;
  auto* bench = app.add_subcommand("bench", "evaluate methods x steps x metrics");
  add_run_flags(bench, bench_flags);
  auto* sweep = app.add_subcommand("sweep", "bench plus per-method step deltas");
  add_run_flags(sweep, sweep_flags);
  auto* stability = app.add_subcommand("stability", "saliency MSE under compression");
  add_run_flags(stability, stab_flags);

  std::string render_in, render_out;
  auto* render = app.add_subcommand("render", "render an attribution file as PGM");
  render->add_option("--attr", render_in)->required();
  render->add_option("--out", render_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*make_toy) {
      const ToySuite suite = make_toy_suite(toy, toy_out);
      std::cout << "train accuracy " << suite.train_accuracy << ", test accuracy "
                << suite.test_accuracy << "\nwrote " << suite.manifest.string() << " and "
                << suite.model.string() << '\n';
    } else if (*saliency) {
      try {
        sal_desc.method = parse_method(sal_method);
      } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
      }
      const auto model = load_model(sal_model);
      const ImageTensor img = read_pnm(sal_image);
      const int c = sal_class >= 0 ? sal_class : model->argmax(img);
      const AttributionMap attr = compute_attribution(sal_desc, *model, c, img);
      save_attribution(attr, sal_out);
      if (!sal_render.empty()) write_pnm(sal_render, saliency_image(attr));
      std::cout << to_string(attr.method) << " class " << c << " steps " << attr.steps
                << " completeness gap " << completeness_gap(attr) << '\n';
    } else if (*bench) {
      const auto result = run_benchmark(build_config(bench_flags));
      std::cout << result.rows.size() << " result rows\n";
    } else if (*sweep) {
      const auto result = sweep_steps(build_config(sweep_flags));
      write_deltas_csv(std::cout, result.deltas);
    } else if (*stability) {
      const auto report = run_stability(build_config(stab_flags));
      std::cout << report.entries.size() << " stability entries\n";
    } else if (*render) {
      render_saliency(render_in, render_out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
