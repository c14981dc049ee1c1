// Microbenchmarks for the layer kernels the training loop spends its time in:
// strided convolution, transposed convolution, normalization, and a full
// critic forward pass.

#include <benchmark/benchmark.h>

#include <cstdint>

#include "g2g/nn/builders.hpp"
#include "g2g/nn/network.hpp"
#include "g2g/training.hpp"

using namespace g2g;

namespace {

nn::NetworkSpec single_layer(nn::LayerKind kind, int ch, int side, int kernel, int stride, int pad) {
  nn::NetworkSpec s;
  s.name = "bench";
  s.in_channels = ch;
  s.in_height = s.in_width = side;
  nn::LayerSpec l;
  l.kind = kind;
  l.in_ch = ch;
  l.out_ch = ch;
  l.kernel = kernel;
  l.stride = stride;
  l.pad = pad;
  l.name = "layer";
  s.layers.push_back(l);
  return s;
}

nn::TensorF input_for(const nn::NetworkSpec& spec) {
  nn::TensorF x(1, spec.in_channels, spec.in_height, spec.in_width);
  uint64_t state = 41;
  for (auto& v : x.v) {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    v = static_cast<float>((state >> 40) & 0xff) / 127.5f - 1.f;
  }
  return x;
}

}  // namespace

static void BM_ConvStride2(benchmark::State& state) {
  int ch = static_cast<int>(state.range(0));
  nn::NetworkSpec spec = single_layer(nn::LayerKind::Conv, ch, 64, 4, 2, 1);
  auto params = nn::init_params<float>(spec, 3);
  nn::TensorF x = input_for(spec);
  for (auto _ : state) {
    nn::TensorF y = nn::net_forward<float>(spec, params, x, nullptr);
    benchmark::DoNotOptimize(y.v.data());
  }
}
BENCHMARK(BM_ConvStride2)->Arg(16)->Arg(64)->Arg(128);

static void BM_TransposedConvStride2(benchmark::State& state) {
  int ch = static_cast<int>(state.range(0));
  nn::NetworkSpec spec = single_layer(nn::LayerKind::TransposedConv, ch, 32, 4, 2, 1);
  auto params = nn::init_params<float>(spec, 3);
  nn::TensorF x = input_for(spec);
  for (auto _ : state) {
    nn::TensorF y = nn::net_forward<float>(spec, params, x, nullptr);
    benchmark::DoNotOptimize(y.v.data());
  }
}
BENCHMARK(BM_TransposedConvStride2)->Arg(16)->Arg(64)->Arg(128);

static void BM_BatchNorm(benchmark::State& state) {
  nn::NetworkSpec spec = single_layer(nn::LayerKind::BatchNorm, 64, 128, 0, 1, 0);
  auto params = nn::init_params<float>(spec, 3);
  nn::TensorF x = input_for(spec);
  for (auto _ : state) {
    nn::TensorF y = nn::net_forward<float>(spec, params, x, nullptr);
    benchmark::DoNotOptimize(y.v.data());
  }
}
BENCHMARK(BM_BatchNorm);

static void BM_Critic1Forward(benchmark::State& state) {
  nn::NetworkSpec spec = nn::build_critic1();
  auto params = nn::init_params<float>(spec, 3);
  nn::TensorF x = input_for(spec);
  for (auto _ : state) {
    nn::TensorF y = nn::net_forward<float>(spec, params, x, nullptr);
    benchmark::DoNotOptimize(y.v.data());
  }
}
BENCHMARK(BM_Critic1Forward)->Unit(benchmark::kMillisecond);

static void BM_ReducedLocalizerStep(benchmark::State& state) {
  // One full optimizer cycle on the scaled-down pair: the shape of the
  // training loop without the production-width arithmetic.
  TrainState st = init_train_state(dual_specs_reduced(16, {2, 2, 2, 2}), 3);
  nn::TensorF sat(1, 3, 16, 16, 0.1f), gt(1, 3, 16, 16, -0.8f), overlay(1, 3, 16, 16, -0.8f);
  StepConfig cfg;
  for (auto _ : state) {
    StepLosses l = train_step(st, sat, gt, overlay, cfg);
    benchmark::DoNotOptimize(l.g2_total);
  }
}
BENCHMARK(BM_ReducedLocalizerStep)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
