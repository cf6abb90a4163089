#include <benchmark/benchmark.h>

#include "rcm/ops.hpp"
#include "rcm/train.hpp"

using namespace rcm;

namespace {

const NoiseSchedule kSchedule(0.002, 80.0, 0.5, 10);

Tensor noise_batch(Shape shape, std::uint64_t seed) {
  SeededRng rng(seed);
  std::vector<double> v(shape_numel(shape));
  for (auto& e : v) e = rng.normal();
  return Tensor::from(std::move(shape), std::move(v));
}

void BM_DenoiserForward(benchmark::State& state) {
  DenoiserModel model(DenoiserConfig::reflectance(), kSchedule, 1);
  const auto x = noise_batch({4, 3, 32, 32}, 2);
  const auto cond = noise_batch({4, 3, 32, 32}, 3);
  const bool ema = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(denoiser_forward(model, x, 40.0, cond, ema));
}
BENCHMARK(BM_DenoiserForward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_DenoiserForwardBackward(benchmark::State& state) {
  DenoiserModel model(DenoiserConfig::reflectance(), kSchedule, 1);
  const auto x = noise_batch({4, 3, 32, 32}, 2);
  const auto cond = noise_batch({4, 3, 32, 32}, 3);
  for (auto _ : state) sum(denoiser_forward(model, x, 40.0, cond, false)).backward();
}
BENCHMARK(BM_DenoiserForwardBackward)->Unit(benchmark::kMillisecond);

// One joint step of both component models at the desk configuration.
void BM_TrainStep(benchmark::State& state) {
  DenoiserModel refl(DenoiserConfig::reflectance(), kSchedule, 1);
  DenoiserModel illum(DenoiserConfig::illumination(), kSchedule, 2);
  SeededRng rng(3);
  PairedDataset ds;
  for (int i = 0; i < 8; ++i) {
    auto p = make_toy_pair(rng, 32, {});
    ds.add(std::to_string(i), p.low, p.normal);
  }
  TrainConfig cfg;
  cfg.iterations = 1;
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(train_loop(refl, illum, ds, SamplerConfig{}, cfg, ++seed));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

int main(int argc, char** argv) {
  rcm::tune_allocator();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
