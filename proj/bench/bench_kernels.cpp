// Serial reference vs OpenMP kernels: bootstrap resampling and paper ingest.
// Run with OMP_NUM_THREADS set to compare thread counts.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "mqud/diagnostics/bootstrap.hpp"
#include "mqud/paperstore/assets.hpp"
#include "mqud/paperstore/eligibility.hpp"

namespace {

std::vector<double> sample(std::size_t n) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d(0.3, 0.1);
  std::vector<double> x(n);
  for (auto& v : x) v = d(rng);
  return x;
}

void BM_bootstrap_serial(benchmark::State& state) {
  const auto x = sample(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mqud::diagnostics::bootstrap_means_serial(x, 10000, 1));
  state.SetItemsProcessed(state.iterations() * 10000);
}

void BM_bootstrap_parallel(benchmark::State& state) {
  const auto x = sample(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mqud::diagnostics::bootstrap_means_parallel(x, 10000, 1));
  state.SetItemsProcessed(state.iterations() * 10000);
}

void BM_ingest(benchmark::State& state) {
  const bool parallel = state.range(0) != 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(mqud::paperstore::ingest_corpus(MQUD_FIXTURE_DIR "/papers",
                                                             mqud::paperstore::default_section_lexicon(), nullptr,
                                                             parallel));
}

}  // namespace

BENCHMARK(BM_bootstrap_serial)->Arg(200)->Arg(1250)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_bootstrap_parallel)->Arg(200)->Arg(1250)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ingest)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
