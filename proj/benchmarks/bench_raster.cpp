// Microbenchmarks for the preprocessing pipeline: resampling, trimming,
// grid cropping, and contour extraction.

#include <benchmark/benchmark.h>

#include <cstdint>

#include "g2g/dataset.hpp"
#include "g2g/raster.hpp"

using namespace g2g;

namespace {

Raster random_raster(int side, int channels, uint64_t seed) {
  Raster r(side, side, channels);
  uint64_t state = seed;
  for (auto& v : r.values) {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    v = static_cast<float>((state >> 40) & 0xff) / 255.f;
  }
  return r;
}

Raster blocky_mask(int side, uint64_t seed) {
  Raster r(side, side, 1);
  uint64_t state = seed;
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      if (x % 16 == 0 && y % 16 == 0)
        state = state * 6364136223846793005ull + 1442695040888963407ull;
      r.at(x, y, 0) = static_cast<float>((state >> 33) & 1);
    }
  return r;
}

}  // namespace

static void BM_ResizeTileDown(benchmark::State& state) {
  // The per-tile production resample: 675px crop down to the 256px input.
  Raster tile = random_raster(675, 3, 7);
  for (auto _ : state) {
    Raster out = resize(tile, 256, 256);
    benchmark::DoNotOptimize(out.values.data());
  }
}
BENCHMARK(BM_ResizeTileDown)->Unit(benchmark::kMillisecond);

static void BM_ResizeLabelsDown(benchmark::State& state) {
  Raster mask = blocky_mask(675, 7);
  for (auto _ : state) {
    Raster out = resize_labels(mask, 256, 256);
    benchmark::DoNotOptimize(out.values.data());
  }
}
BENCHMARK(BM_ResizeLabelsDown)->Unit(benchmark::kMillisecond);

static void BM_CenterTrim(benchmark::State& state) {
  Raster src = random_raster(1023, 3, 7);
  for (auto _ : state) {
    Raster out = center_trim(src, 1020);
    benchmark::DoNotOptimize(out.values.data());
  }
}
BENCHMARK(BM_CenterTrim)->Unit(benchmark::kMillisecond);

static void BM_CropGrid(benchmark::State& state) {
  TileGridSpec spec{1623, 1620, 270, 256, 6};
  Raster trimmed = random_raster(1620, 3, 7);
  for (auto _ : state) {
    std::vector<Tile> tiles = crop_grid(trimmed, spec);
    benchmark::DoNotOptimize(tiles.data());
  }
}
BENCHMARK(BM_CropGrid)->Unit(benchmark::kMillisecond);

static void BM_ExtractContours(benchmark::State& state) {
  Raster mask = blocky_mask(256, 7);
  for (auto _ : state) {
    Raster ring = extract_contours(mask, 2);
    benchmark::DoNotOptimize(ring.values.data());
  }
}
BENCHMARK(BM_ExtractContours);

static void BM_OverlayContours(benchmark::State& state) {
  Raster mask = blocky_mask(256, 7);
  Raster ring = extract_contours(mask, 2);
  for (auto _ : state) {
    Raster overlay = overlay_contours(mask, ring);
    benchmark::DoNotOptimize(overlay.values.data());
  }
}
BENCHMARK(BM_OverlayContours);

BENCHMARK_MAIN();
