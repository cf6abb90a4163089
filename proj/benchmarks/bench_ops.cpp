#include <benchmark/benchmark.h>

#include "rcm/ops.hpp"
#include "rcm/sampling.hpp"

using namespace rcm;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, bool requires_grad) {
  SeededRng rng(seed);
  std::vector<double> v(shape_numel(shape));
  for (auto& e : v) e = rng.normal();
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// args: batch, channels in, channels out, spatial size, stride
void BM_Conv2dForward(benchmark::State& state) {
  const auto b = static_cast<std::size_t>(state.range(0)), ci = static_cast<std::size_t>(state.range(1)),
             co = static_cast<std::size_t>(state.range(2)), hw = static_cast<std::size_t>(state.range(3));
  const int stride = static_cast<int>(state.range(4));
  auto x = random_tensor({b, ci, hw, hw}, 1, false);
  auto k = random_tensor({co, ci, 3, 3}, 2, false);
  auto bias = random_tensor({co}, 3, false);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, k, bias, stride, 1));
  const double macs = static_cast<double>(b * co * ci * 9 * (hw / stride) * (hw / stride));
  state.counters["GMAC/s"] = benchmark::Counter(macs * 1e-9, benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_Conv2dForward)->Args({4, 16, 16, 32, 1})->Args({4, 32, 32, 16, 1})->Args({4, 64, 64, 8, 1})
    ->Args({4, 16, 32, 32, 2});

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const auto b = static_cast<std::size_t>(state.range(0)), ci = static_cast<std::size_t>(state.range(1)),
             co = static_cast<std::size_t>(state.range(2)), hw = static_cast<std::size_t>(state.range(3));
  auto x = random_tensor({b, ci, hw, hw}, 1, true);
  auto k = random_tensor({co, ci, 3, 3}, 2, true);
  auto bias = random_tensor({co}, 3, true);
  for (auto _ : state) sum(conv2d(x, k, bias, 1, 1)).backward();
  const double macs = 3.0 * static_cast<double>(b * co * ci * 9 * hw * hw);
  state.counters["GMAC/s"] = benchmark::Counter(macs * 1e-9, benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_Conv2dForwardBackward)->Args({4, 16, 16, 32})->Args({4, 32, 32, 16})->Args({4, 64, 64, 8});

void BM_GroupNormSiluForwardBackward(benchmark::State& state) {
  auto x = random_tensor({4, 16, 32, 32}, 4, true);
  for (auto _ : state) sum(silu(group_norm(x, 8, 1e-5))).backward();
}
BENCHMARK(BM_GroupNormSiluForwardBackward);

}  // namespace

int main(int argc, char** argv) {
  rcm::tune_allocator();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
