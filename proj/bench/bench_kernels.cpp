// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "idgi/attribution.hpp"
#include "idgi/models.hpp"
#include "idgi/paths.hpp"
#include "idgi/rng.hpp"
#include "idgi/tensor.hpp"

using namespace idgi;

namespace {

ImageTensor noise(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  ImageTensor t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(0, 1);
  return t;
}

void BM_BlurSerial(benchmark::State& state) {
  const ImageTensor img = noise({224, 224, 3}, 1);
  const double sigma = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(gaussian_blur_serial(img, sigma));
}

void BM_BlurParallel(benchmark::State& state) {
  const ImageTensor img = noise({224, 224, 3}, 1);
  const double sigma = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(gaussian_blur(img, sigma));
}

void path_gradients(benchmark::State& state, Execution exec) {
  const Shape s{32, 32, 3};
  const auto net = TinyConvNet::initialized(s, 3, 8);
  const ImageTensor x = noise(s, 2);
  const PathSample path = straight_line_path(black_baseline(s), x, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_path(net, 0, path, exec));
}

void BM_PathSerial(benchmark::State& state) { path_gradients(state, Execution::kSerial); }
void BM_PathParallel(benchmark::State& state) { path_gradients(state, Execution::kParallel); }

}  // namespace

BENCHMARK(BM_BlurSerial)->Arg(1)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BlurParallel)->Arg(1)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PathSerial)->Arg(16)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PathParallel)->Arg(16)->Arg(128)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
