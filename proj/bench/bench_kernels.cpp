// Parallel kernels against their serial references, plus batched model prediction.
#include <benchmark/benchmark.h>

#include <vector>

#include "windguard/kernels.hpp"
#include "windguard/model.hpp"
#include "windguard/rng.hpp"
#include "windguard/training.hpp"

using namespace windguard;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

template <bool Parallel>
void BM_gemm_nn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_values(n * n, 1), b = random_values(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) kernels::gemm_nn(a, b, c, n, n, n, false);
    else kernels::serial::gemm_nn(a, b, c, n, n, n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <bool Parallel>
void BM_gemm_tn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_values(n * n, 3), b = random_values(n * n, 4);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) kernels::gemm_tn(a, b, c, n, n, n);
    else kernels::serial::gemm_tn(a, b, c, n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <bool Parallel>
void BM_predict(benchmark::State& state) {
  const ModelKind kind = state.range(0) == 0 ? ModelKind::lstm : ModelKind::fnn;
  Rng rng(5);
  const ModelParams params = training::initial_params(training::TrainConfig::defaults(kind), 2000.0, 24, rng);
  std::vector<scada::WindowSample> windows(256);
  for (auto& w : windows) {
    w.features = 4;
    w.hours = 24;
    for (int i = 0; i < 96; ++i) w.inputs.push_back(rng.normal());
    w.target.assign(24, 0.0);
  }
  for (auto _ : state) {
    auto out = Parallel ? predict(params, windows) : serial::predict(params, windows);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetLabel(kind == ModelKind::lstm ? "lstm" : "fnn");
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(windows.size()));
}

}  // namespace

BENCHMARK(BM_gemm_nn<true>)->Arg(64)->Arg(256);
BENCHMARK(BM_gemm_nn<false>)->Arg(64)->Arg(256);
BENCHMARK(BM_gemm_tn<true>)->Arg(64)->Arg(256);
BENCHMARK(BM_gemm_tn<false>)->Arg(64)->Arg(256);
BENCHMARK(BM_predict<true>)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_predict<false>)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
