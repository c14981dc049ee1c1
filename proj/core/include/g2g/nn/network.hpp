#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "g2g/nn/spec.hpp"
#include "g2g/nn/tensor.hpp"

namespace g2g::nn {

// Per-layer learnables. Conv: w [out,in,k,k] + b. Transposed conv:
// w [in,out,k,k] + b. BatchNorm: gamma/beta as [1,c,1,1]. Other layers
// carry nothing.
template <typename T>
struct LayerParams {
  Tensor<T> w, b, gamma, beta;
};

template <typename T>
struct ModelParams {
  uint64_t hash = 0;  // spec_hash of the architecture these weights fit
  std::vector<LayerParams<T>> layers;
};

template <typename T>
using Grads = ModelParams<T>;

// Weights ~ N(0, 0.02), gamma ~ N(1, 0.02), biases and beta zero, drawn with
// an explicit Box-Muller transform so streams do not depend on library
// distribution internals.
template <typename T>
ModelParams<T> init_params(const NetworkSpec& spec, uint64_t seed);

template <typename T>
Grads<T> zero_grads(const NetworkSpec& spec);

template <typename T>
int64_t param_count(const ModelParams<T>& p);

struct NetRunOptions {
  bool bn_frozen_stats = false;  // gradient treats normalizer stats as constants
};

// Everything the backward pass needs: per-layer outputs (layer inputs are the
// previous entry), normalizer statistics, pool argmaxes, and recorded taps.
template <typename T>
struct LayerCache {
  Tensor<T> y;
  Tensor<T> mean, invstd, xhat;  // BatchNorm
  std::vector<int> argmax;       // MaxPool
};

template <typename T>
struct ForwardCache {
  Tensor<T> input;
  std::vector<LayerCache<T>> layers;
  std::map<int, Tensor<T>> taps;  // SkipSource records; sinks may also read injected_taps
};

// Runs the layer list in order. Taps consumed by a SkipSink resolve first
// against taps recorded in this pass, then against injected_taps (activations
// handed over from another network). cache may be null for inference.
template <typename T>
Tensor<T> net_forward(const NetworkSpec& spec, const ModelParams<T>& params, const Tensor<T>& x,
                      ForwardCache<T>* cache, const NetRunOptions& opt = {},
                      const std::map<int, Tensor<T>>* injected_taps = nullptr);

// Reverse sweep. Parameter gradients accumulate into *grads (callers zero
// them). tap_grads is both an input and an output: entries seeded by the
// caller are added where the matching SkipSource sits, and gradients that
// sinks accumulate for taps with no source in this network are left behind
// for the caller to route into the producing network. Returns d(loss)/d(input).
template <typename T>
Tensor<T> net_backward(const NetworkSpec& spec, const ModelParams<T>& params,
                       const ForwardCache<T>& cache, const Tensor<T>& grad_out, Grads<T>* grads,
                       const NetRunOptions& opt = {},
                       std::map<int, Tensor<T>>* tap_grads = nullptr);

// Adam with bias correction; state tensors mirror the parameter layout.
template <typename T>
struct AdamState {
  int64_t t = 0;
  std::vector<LayerParams<T>> m, v;
};

template <typename T>
AdamState<T> zero_adam(const NetworkSpec& spec);

template <typename T>
void adam_step(ModelParams<T>& params, const Grads<T>& grads, AdamState<T>& state, T lr, T beta1,
               T beta2, T eps);

// Flat binary round-trip of parameters (and optionally optimizer moments);
// loading restores exact bytes. Used as the payload format inside checkpoints.
template <typename T>
void write_params(std::ostream& out, const ModelParams<T>& p);
template <typename T>
ModelParams<T> read_params(std::istream& in);
template <typename T>
void write_adam(std::ostream& out, const AdamState<T>& s);
template <typename T>
AdamState<T> read_adam(std::istream& in);

}  // namespace g2g::nn
