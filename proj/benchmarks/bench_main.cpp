#include <benchmark/benchmark.h>

#include <vector>

#include "pearl/metrics.hpp"
#include "pearl/pearl_model.hpp"
#include "pearl/preprocessing.hpp"
#include "pearl/prototypes.hpp"
#include "pearl/random.hpp"

namespace {

using namespace pearl;

Matrix gaussian(Rng& rng, Index n, Index d) {
  Matrix m(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) m(i, j) = rng.normal();
  }
  return m;
}

std::vector<int> cyclic_labels(Index n, int classes) {
  std::vector<int> y(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = static_cast<int>(i % classes);
  return y;
}

void BM_TopKNeighbors(benchmark::State& state) {
  Rng rng(1);
  const Index pool_n = state.range(0);
  const Matrix pool = gaussian(rng, pool_n, 64);
  const Matrix queries = gaussian(rng, 200, 64);
  for (auto _ : state) benchmark::DoNotOptimize(top_k_neighbors(queries, pool, 10));
  state.SetItemsProcessed(state.iterations() * 200);
}
BENCHMARK(BM_TopKNeighbors)->Arg(1000)->Arg(4000);

void BM_GradientStep(benchmark::State& state) {
  Rng rng(2);
  const Index d = state.range(0);
  PearlConfig cfg;
  cfg = cfg.resolved(d);
  const Matrix batch = gaussian(rng, 64, d);
  const auto labels = cyclic_labels(64, 4);
  const auto params = init_params(cfg, d, 4);
  const auto prototypes = compute_prototypes(batch, labels, 4);
  for (auto _ : state) benchmark::DoNotOptimize(compute_gradients(params, cfg, batch, labels, prototypes));
}
BENCHMARK(BM_GradientStep)->Arg(32)->Arg(128);

void BM_LdaFit(benchmark::State& state) {
  Rng rng(3);
  const Index d = state.range(0);
  const Matrix x = gaussian(rng, 1000, d);
  const auto labels = cyclic_labels(1000, 8);
  for (auto _ : state) benchmark::DoNotOptimize(LdaProjector::fit(x, labels, 8));
}
BENCHMARK(BM_LdaFit)->Arg(32)->Arg(128);

void BM_PcaWhitenFit(benchmark::State& state) {
  Rng rng(4);
  const Matrix x = gaussian(rng, 1000, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(PcaWhitener::fit(x));
}
BENCHMARK(BM_PcaWhitenFit)->Arg(32)->Arg(128);

}  // namespace
BENCHMARK_MAIN();
