#pragma once

#include <cstdint>
#include <vector>

#include "g2g/nn/network.hpp"
#include "g2g/nn/spec.hpp"

namespace g2g::nn {

// Tap ids shared between the two generators: the localizer publishes its
// first two encoder activations and the refiner splices them into its last
// two decoder stages.
inline constexpr int kTapEncoder1 = 1001;  // side/2, widths[0] channels
inline constexpr int kTapEncoder2 = 1002;  // side/4, widths[1] channels

struct UnetConfig {
  std::string name;
  int input_side = 256;
  int in_channels = 3;
  int out_channels = 3;
  // Encoder widths outermost-first; depth = widths.size(); input_side must be
  // divisible by 2^depth and collapse to a 1x1 bottleneck.
  std::vector<int> widths{64, 128, 256, 512, 512, 512, 512, 512};
  bool export_encoder_taps = false;   // publish kTapEncoder1/2
  bool consume_encoder_taps = false;  // splice injected kTapEncoder1/2
  int injected_tap1_channels = 0;     // channels of kTapEncoder1 when consuming
  int injected_tap2_channels = 0;
};

// Encoder-decoder with mirrored skip concatenations: 4x4 stride-2 padded
// convs down, transposed convs up, leaky-relu/relu activations, tanh head.
// The outermost encoder stage and the 1x1 bottleneck are not normalized
// (per-plane statistics would erase a 1x1 activation).
NetworkSpec make_unet(const UnetConfig& cfg);

// Building localizer: satellite (3ch) -> building rendering (3ch), exporting
// its two outer encoder activations for the refiner.
NetworkSpec build_localizer(int side = 256);

// Boundary refiner: localizer output + satellite (6ch) -> boundary-overlay
// rendering (3ch), consuming the localizer's exported activations.
NetworkSpec build_refiner(int side = 256);

// Localizer critic: satellite + rendering (6ch) -> 12x12 logit map. Valid
// convolutions only (no padding anywhere), max-pool + conv head.
NetworkSpec build_critic1();

// Refiner critic: localizer output + satellite + rendering (9ch) -> 4x4 logit
// map. First six conv layers extend the critic1 stack (the fifth halves its
// width), then max-pool + 1x1 head. No padding anywhere.
NetworkSpec build_critic2();

// Single-generator baseline: the same U-Net without cross-network taps and a
// padded 70x70-receptive-field patch critic with a 30x30 logit map.
NetworkSpec build_baseline_generator(int side = 256);
NetworkSpec build_baseline_critic();

// Scaled-down generator pair for finite-difference and resume tests: same
// wiring at a fraction of the width/depth.
NetworkSpec build_localizer_reduced(int side, const std::vector<int>& widths);
NetworkSpec build_refiner_reduced(int side, const std::vector<int>& widths);

// Measured receptive field: backward from the center output logit, bounding
// box of nonzero input gradient. Normalizer statistics are frozen so
// gradients stay local. Returns {height extent, width extent}.
struct ProbeResult {
  int height = 0;
  int width = 0;
};
ProbeResult receptive_field_probe(const NetworkSpec& spec, uint64_t seed = 7);

}  // namespace g2g::nn
