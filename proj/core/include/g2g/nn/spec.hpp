#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace g2g::nn {

enum class LayerKind {
  Conv,            // k/s/p, in_ch -> out_ch, weight [out,in,k,k]
  TransposedConv,  // k/s/p, in_ch -> out_ch, weight [in,out,k,k]
  BatchNorm,       // per-sample spatial statistics, affine gamma/beta
  LeakyRelu,
  Relu,
  Tanh,
  MaxPool,         // k/s, never padded
  SkipSource,      // records the running activation under `tap`
  SkipSink,        // appends the recorded (or injected) `tap` along channels
};

const char* layer_kind_name(LayerKind k);

struct LayerSpec {
  LayerKind kind{};
  int in_ch = 0;
  int out_ch = 0;
  int kernel = 0;
  int stride = 1;
  int pad = 0;
  float slope = 0.2f;    // LeakyRelu only
  int tap = 0;           // SkipSource / SkipSink
  int tap_channels = 0;  // SkipSink: channel count of the incoming tap
  std::string name;
};

struct NetworkSpec {
  std::string name;
  int in_channels = 0;
  int in_height = 0;
  int in_width = 0;
  std::vector<LayerSpec> layers;
};

struct Shape {
  int c = 0, h = 0, w = 0;
  bool operator==(const Shape&) const = default;
};

inline int conv_out_extent(int in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; }
inline int tconv_out_extent(int in, int k, int s, int p) { return (in - 1) * s - 2 * p + k; }

// Output shape after every layer. Throws ContractViolation when channel
// counts, spatial extents, or tap wiring are inconsistent. Taps with no
// SkipSource in this network are treated as injected and take their declared
// channel count and the sink's spatial extent.
std::vector<Shape> shape_trace(const NetworkSpec& spec);

Shape output_shape(const NetworkSpec& spec);

// True when any conv / transposed conv / pool pads its input.
bool contains_padding(const NetworkSpec& spec);

// Deterministic plain-text rendering; the basis for spec_hash and reports.
std::string spec_to_text(const NetworkSpec& spec);

// FNV-1a over spec_to_text. Embedded in checkpoints to refuse weight files
// written for a different architecture.
uint64_t spec_hash(const NetworkSpec& spec);

// One-output-pixel receptive field from the k/s recurrence over conv and pool
// layers. Only defined for strictly contracting stacks; throws on upsampling
// layers.
int analytic_receptive_field(const NetworkSpec& spec);

// Learnable scalar count (conv/tconv weights+bias, batch norm gamma+beta).
int64_t param_count(const NetworkSpec& spec);

// Human-readable per-layer table: kind, geometry, output shape, param count.
std::string model_report(const NetworkSpec& spec);

}  // namespace g2g::nn
