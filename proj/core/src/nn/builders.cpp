#include "g2g/nn/builders.hpp"

#include <algorithm>
#include <cmath>

#include "g2g/errors.hpp"

namespace g2g::nn {

namespace {

LayerSpec conv(std::string name, int in_ch, int out_ch, int k, int s, int p) {
  LayerSpec l;
  l.kind = LayerKind::Conv;
  l.name = std::move(name);
  l.in_ch = in_ch;
  l.out_ch = out_ch;
  l.kernel = k;
  l.stride = s;
  l.pad = p;
  return l;
}

LayerSpec tconv(std::string name, int in_ch, int out_ch, int k, int s, int p) {
  LayerSpec l;
  l.kind = LayerKind::TransposedConv;
  l.name = std::move(name);
  l.in_ch = in_ch;
  l.out_ch = out_ch;
  l.kernel = k;
  l.stride = s;
  l.pad = p;
  return l;
}

LayerSpec bnorm(std::string name, int ch) {
  LayerSpec l;
  l.kind = LayerKind::BatchNorm;
  l.name = std::move(name);
  l.in_ch = ch;
  l.out_ch = ch;
  return l;
}

LayerSpec lrelu(std::string name, float slope = 0.2f) {
  LayerSpec l;
  l.kind = LayerKind::LeakyRelu;
  l.name = std::move(name);
  l.slope = slope;
  return l;
}

LayerSpec relu(std::string name) {
  LayerSpec l;
  l.kind = LayerKind::Relu;
  l.name = std::move(name);
  return l;
}

LayerSpec tanh_layer(std::string name) {
  LayerSpec l;
  l.kind = LayerKind::Tanh;
  l.name = std::move(name);
  return l;
}

LayerSpec maxpool(std::string name, int k, int s) {
  LayerSpec l;
  l.kind = LayerKind::MaxPool;
  l.name = std::move(name);
  l.kernel = k;
  l.stride = s;
  return l;
}

LayerSpec skip_src(std::string name, int tap) {
  LayerSpec l;
  l.kind = LayerKind::SkipSource;
  l.name = std::move(name);
  l.tap = tap;
  return l;
}

LayerSpec skip_sink(std::string name, int tap, int tap_channels) {
  LayerSpec l;
  l.kind = LayerKind::SkipSink;
  l.name = std::move(name);
  l.tap = tap;
  l.tap_channels = tap_channels;
  return l;
}

}  // namespace

NetworkSpec make_unet(const UnetConfig& cfg) {
  const int depth = static_cast<int>(cfg.widths.size());
  if (depth < 3) throw InvalidArgument(cfg.name + ": encoder needs at least 3 stages");
  if (cfg.input_side != (1 << depth))
    throw InvalidArgument(cfg.name + ": input side " + std::to_string(cfg.input_side) +
                          " must be 2^depth so the bottleneck is 1x1");
  if (cfg.consume_encoder_taps &&
      (cfg.injected_tap1_channels < 1 || cfg.injected_tap2_channels < 1))
    throw InvalidArgument(cfg.name + ": injected tap widths must be declared");

  NetworkSpec spec;
  spec.name = cfg.name;
  spec.in_channels = cfg.in_channels;
  spec.in_height = cfg.input_side;
  spec.in_width = cfg.input_side;

  // Encoder: 4x4 stride-2 padded convs halving the extent each stage.
  int ch = cfg.in_channels;
  for (int i = 0; i < depth; ++i) {
    std::string stage = "e" + std::to_string(i + 1);
    if (i > 0) spec.layers.push_back(lrelu(stage + "_lrelu"));
    spec.layers.push_back(conv(stage + "_conv", ch, cfg.widths[static_cast<size_t>(i)], 4, 2, 1));
    if (i > 0 && i < depth - 1)
      spec.layers.push_back(bnorm(stage + "_norm", cfg.widths[static_cast<size_t>(i)]));
    if (i < depth - 1) spec.layers.push_back(skip_src(stage + "_skip", i + 1));
    if (cfg.export_encoder_taps && i == 0)
      spec.layers.push_back(skip_src(stage + "_export", kTapEncoder1));
    if (cfg.export_encoder_taps && i == 1)
      spec.layers.push_back(skip_src(stage + "_export", kTapEncoder2));
    ch = cfg.widths[static_cast<size_t>(i)];
  }

  // Decoder: stage d_i emits input_side / 2^(i-1); each concatenates the
  // mirrored encoder activation (and, when configured, the injected taps
  // from the sibling network at the matching extents).
  for (int i = depth; i >= 1; --i) {
    std::string stage = "d" + std::to_string(i);
    int out = i >= 2 ? cfg.widths[static_cast<size_t>(i - 2)] : cfg.out_channels;
    spec.layers.push_back(relu(stage + "_relu"));
    spec.layers.push_back(tconv(stage + "_tconv", ch, out, 4, 2, 1));
    if (i >= 2) {
      spec.layers.push_back(bnorm(stage + "_norm", out));
      spec.layers.push_back(
          skip_sink(stage + "_skip", i - 1, cfg.widths[static_cast<size_t>(i - 2)]));
      ch = out + cfg.widths[static_cast<size_t>(i - 2)];
      if (cfg.consume_encoder_taps && i == 3) {
        spec.layers.push_back(skip_sink(stage + "_splice", kTapEncoder2, cfg.injected_tap2_channels));
        ch += cfg.injected_tap2_channels;
      }
      if (cfg.consume_encoder_taps && i == 2) {
        spec.layers.push_back(skip_sink(stage + "_splice", kTapEncoder1, cfg.injected_tap1_channels));
        ch += cfg.injected_tap1_channels;
      }
    } else {
      spec.layers.push_back(tanh_layer(stage + "_tanh"));
      ch = out;
    }
  }

  shape_trace(spec);  // fail fast on wiring bugs
  return spec;
}

NetworkSpec build_localizer(int side) {
  UnetConfig cfg;
  cfg.name = "localizer";
  cfg.input_side = side;
  cfg.in_channels = 3;
  cfg.out_channels = 3;
  cfg.export_encoder_taps = true;
  return make_unet(cfg);
}

NetworkSpec build_refiner(int side) {
  UnetConfig cfg;
  cfg.name = "refiner";
  cfg.input_side = side;
  cfg.in_channels = 6;
  cfg.out_channels = 3;
  cfg.consume_encoder_taps = true;
  cfg.injected_tap1_channels = cfg.widths[0];
  cfg.injected_tap2_channels = cfg.widths[1];
  return make_unet(cfg);
}

NetworkSpec build_localizer_reduced(int side, const std::vector<int>& widths) {
  UnetConfig cfg;
  cfg.name = "localizer_reduced";
  cfg.input_side = side;
  cfg.in_channels = 3;
  cfg.out_channels = 3;
  cfg.widths = widths;
  cfg.export_encoder_taps = true;
  return make_unet(cfg);
}

NetworkSpec build_refiner_reduced(int side, const std::vector<int>& widths) {
  UnetConfig cfg;
  cfg.name = "refiner_reduced";
  cfg.input_side = side;
  cfg.in_channels = 6;
  cfg.out_channels = 3;
  cfg.widths = widths;
  cfg.consume_encoder_taps = true;
  cfg.injected_tap1_channels = widths[0];
  cfg.injected_tap2_channels = widths[1];
  return make_unet(cfg);
}

NetworkSpec build_critic1() {
  NetworkSpec spec;
  spec.name = "critic1";
  spec.in_channels = 6;
  spec.in_height = 256;
  spec.in_width = 256;
  // Valid convolutions throughout: 256 -> 127 -> 62 -> 30 -> 14, then the
  // stride-1 pool/conv tail trims to the 12x12 logit map.
  spec.layers.push_back(conv("c1_conv", 6, 64, 4, 2, 0));
  spec.layers.push_back(lrelu("c1_lrelu"));
  spec.layers.push_back(conv("c2_conv", 64, 128, 4, 2, 0));
  spec.layers.push_back(bnorm("c2_norm", 128));
  spec.layers.push_back(lrelu("c2_lrelu"));
  spec.layers.push_back(conv("c3_conv", 128, 256, 4, 2, 0));
  spec.layers.push_back(bnorm("c3_norm", 256));
  spec.layers.push_back(lrelu("c3_lrelu"));
  spec.layers.push_back(conv("c4_conv", 256, 512, 4, 2, 0));
  spec.layers.push_back(bnorm("c4_norm", 512));
  spec.layers.push_back(lrelu("c4_lrelu"));
  spec.layers.push_back(maxpool("tail_pool", 2, 1));
  spec.layers.push_back(conv("head", 512, 1, 2, 1, 0));
  shape_trace(spec);
  return spec;
}

NetworkSpec build_critic2() {
  NetworkSpec spec;
  spec.name = "critic2";
  spec.in_channels = 9;
  spec.in_height = 256;
  spec.in_width = 256;
  // First four stages repeat the critic1 stack (on 9 input channels); the
  // fifth halves the width, the sixth is a stride-1 valid conv without an
  // activation; pool + 1x1 head leave the 4x4 logit map.
  spec.layers.push_back(conv("c1_conv", 9, 64, 4, 2, 0));
  spec.layers.push_back(lrelu("c1_lrelu"));
  spec.layers.push_back(conv("c2_conv", 64, 128, 4, 2, 0));
  spec.layers.push_back(bnorm("c2_norm", 128));
  spec.layers.push_back(lrelu("c2_lrelu"));
  spec.layers.push_back(conv("c3_conv", 128, 256, 4, 2, 0));
  spec.layers.push_back(bnorm("c3_norm", 256));
  spec.layers.push_back(lrelu("c3_lrelu"));
  spec.layers.push_back(conv("c4_conv", 256, 512, 4, 2, 0));
  spec.layers.push_back(bnorm("c4_norm", 512));
  spec.layers.push_back(lrelu("c4_lrelu"));
  spec.layers.push_back(conv("c5_conv", 512, 256, 4, 2, 0));
  spec.layers.push_back(bnorm("c5_norm", 256));
  spec.layers.push_back(lrelu("c5_lrelu"));
  spec.layers.push_back(conv("c6_conv", 256, 256, 2, 1, 0));
  spec.layers.push_back(bnorm("c6_norm", 256));
  spec.layers.push_back(maxpool("tail_pool", 2, 1));
  spec.layers.push_back(conv("head", 256, 1, 1, 1, 0));
  shape_trace(spec);
  return spec;
}

NetworkSpec build_baseline_generator(int side) {
  UnetConfig cfg;
  cfg.name = "baseline_generator";
  cfg.input_side = side;
  cfg.in_channels = 3;
  cfg.out_channels = 3;
  return make_unet(cfg);
}

NetworkSpec build_baseline_critic() {
  NetworkSpec spec;
  spec.name = "baseline_critic";
  spec.in_channels = 6;
  spec.in_height = 256;
  spec.in_width = 256;
  // The classic padded patch critic: 70x70 receptive field, 30x30 logit map.
  spec.layers.push_back(conv("c1_conv", 6, 64, 4, 2, 1));
  spec.layers.push_back(lrelu("c1_lrelu"));
  spec.layers.push_back(conv("c2_conv", 64, 128, 4, 2, 1));
  spec.layers.push_back(bnorm("c2_norm", 128));
  spec.layers.push_back(lrelu("c2_lrelu"));
  spec.layers.push_back(conv("c3_conv", 128, 256, 4, 2, 1));
  spec.layers.push_back(bnorm("c3_norm", 256));
  spec.layers.push_back(lrelu("c3_lrelu"));
  spec.layers.push_back(conv("c4_conv", 256, 512, 4, 1, 1));
  spec.layers.push_back(bnorm("c4_norm", 512));
  spec.layers.push_back(lrelu("c4_lrelu"));
  spec.layers.push_back(conv("head", 512, 1, 4, 1, 1));
  shape_trace(spec);
  return spec;
}

ProbeResult receptive_field_probe(const NetworkSpec& spec, uint64_t seed) {
  ModelParams<float> params = init_params<float>(spec, seed);

  // Deterministic non-constant input so activations are not degenerate.
  Tensor<float> x(1, spec.in_channels, spec.in_height, spec.in_width);
  uint64_t h = seed * 0x9e3779b97f4a7c15ull + 1;
  for (size_t i = 0; i < x.size(); ++i) {
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 33;
    x.v[i] = static_cast<float>(h >> 40) / static_cast<float>(1 << 24) * 2.f - 1.f;
  }

  NetRunOptions opt;
  opt.bn_frozen_stats = true;  // keep the gradient support local
  ForwardCache<float> cache;
  Tensor<float> y = net_forward(spec, params, x, &cache, opt);

  Tensor<float> gy(y.n, y.c, y.h, y.w);
  gy.at(0, 0, y.h / 2, y.w / 2) = 1.f;
  Tensor<float> gx = net_backward(spec, params, cache, gy, static_cast<Grads<float>*>(nullptr), opt);

  int y0 = gx.h, y1 = -1, x0 = gx.w, x1 = -1;
  for (int c = 0; c < gx.c; ++c)
    for (int yy = 0; yy < gx.h; ++yy)
      for (int xx = 0; xx < gx.w; ++xx)
        if (std::fabs(gx.at(0, c, yy, xx)) > 0.f) {
          y0 = std::min(y0, yy);
          y1 = std::max(y1, yy);
          x0 = std::min(x0, xx);
          x1 = std::max(x1, xx);
        }
  ProbeResult r;
  if (y1 >= y0) {
    r.height = y1 - y0 + 1;
    r.width = x1 - x0 + 1;
  }
  return r;
}

}  // namespace g2g::nn
