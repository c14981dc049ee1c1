// Microbenchmarks for confusion counting and metric evaluation at tile size.

#include <benchmark/benchmark.h>

#include <cstdint>

#include "g2g/dataset.hpp"
#include "g2g/metrics.hpp"

using namespace g2g;

namespace {

Raster random_mask(int side, uint64_t seed, int n_cl) {
  Raster r(side, side, 1);
  uint64_t state = seed;
  for (auto& v : r.values) {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    v = static_cast<float>((state >> 33) % static_cast<uint64_t>(n_cl));
  }
  return r;
}

}  // namespace

static void BM_ConfusionAdd(benchmark::State& state) {
  int side = static_cast<int>(state.range(0));
  Raster gt = random_mask(side, 7, 2);
  Raster pred = random_mask(side, 11, 2);
  for (auto _ : state) {
    ConfusionAccumulator acc(2);
    acc.add(gt, pred);
    benchmark::DoNotOptimize(acc.total());
  }
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_ConfusionAdd)->Arg(64)->Arg(256);

static void BM_MetricsReport(benchmark::State& state) {
  ConfusionAccumulator acc(2);
  acc.add(random_mask(256, 7, 2), random_mask(256, 11, 2));
  for (auto _ : state) {
    MetricsReport rep = metrics_report(acc);
    benchmark::DoNotOptimize(rep.miou);
  }
}
BENCHMARK(BM_MetricsReport);

static void BM_AccumulatorMerge(benchmark::State& state) {
  ConfusionAccumulator a(2), b(2);
  a.add(random_mask(256, 7, 2), random_mask(256, 11, 2));
  b.add(random_mask(256, 13, 2), random_mask(256, 17, 2));
  for (auto _ : state) {
    ConfusionAccumulator merged(2);
    merged.merge(a);
    merged.merge(b);
    benchmark::DoNotOptimize(merged.total());
  }
}
BENCHMARK(BM_AccumulatorMerge);

static void BM_BinarizePrediction(benchmark::State& state) {
  MaskEncoding enc;
  Raster pred(256, 256, 3);
  uint64_t s = 23;
  for (auto& v : pred.values) {
    s = s * 6364136223846793005ull + 1442695040888963407ull;
    v = static_cast<float>((s >> 40) & 0xff) / 127.5f - 1.f;
  }
  for (auto _ : state) {
    Raster mask = binarize_prediction(pred, enc);
    benchmark::DoNotOptimize(mask.values.data());
  }
  state.SetItemsProcessed(state.iterations() * 256 * 256);
}
BENCHMARK(BM_BinarizePrediction);

BENCHMARK_MAIN();
