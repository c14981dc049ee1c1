#include "g2g/nn/spec.hpp"

#include <cstdio>
#include <map>

#include "g2g/errors.hpp"

namespace g2g::nn {

const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::TransposedConv: return "tconv";
    case LayerKind::BatchNorm: return "bnorm";
    case LayerKind::LeakyRelu: return "lrelu";
    case LayerKind::Relu: return "relu";
    case LayerKind::Tanh: return "tanh";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::SkipSource: return "skip_src";
    case LayerKind::SkipSink: return "skip_sink";
  }
  return "?";
}

std::vector<Shape> shape_trace(const NetworkSpec& spec) {
  if (spec.in_channels < 1 || spec.in_height < 1 || spec.in_width < 1)
    throw ContractViolation(spec.name + ": input shape not set");

  std::vector<Shape> out;
  out.reserve(spec.layers.size());
  std::map<int, Shape> taps;
  Shape cur{spec.in_channels, spec.in_height, spec.in_width};

  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    auto fail = [&](const std::string& msg) {
      throw ContractViolation(spec.name + " layer " + std::to_string(i) + " (" + l.name +
                              "): " + msg);
    };
    switch (l.kind) {
      case LayerKind::Conv: {
        if (l.in_ch != cur.c) fail("expects " + std::to_string(l.in_ch) + " channels, sees " + std::to_string(cur.c));
        int h = conv_out_extent(cur.h, l.kernel, l.stride, l.pad);
        int w = conv_out_extent(cur.w, l.kernel, l.stride, l.pad);
        if (h < 1 || w < 1) fail("spatial extent collapses");
        cur = {l.out_ch, h, w};
        break;
      }
      case LayerKind::TransposedConv: {
        if (l.in_ch != cur.c) fail("expects " + std::to_string(l.in_ch) + " channels, sees " + std::to_string(cur.c));
        int h = tconv_out_extent(cur.h, l.kernel, l.stride, l.pad);
        int w = tconv_out_extent(cur.w, l.kernel, l.stride, l.pad);
        if (h < 1 || w < 1) fail("spatial extent collapses");
        cur = {l.out_ch, h, w};
        break;
      }
      case LayerKind::MaxPool: {
        if (l.pad != 0) fail("pooling is never padded");
        int h = conv_out_extent(cur.h, l.kernel, l.stride, 0);
        int w = conv_out_extent(cur.w, l.kernel, l.stride, 0);
        if (h < 1 || w < 1) fail("spatial extent collapses");
        cur = {cur.c, h, w};
        break;
      }
      case LayerKind::BatchNorm:
      case LayerKind::LeakyRelu:
      case LayerKind::Relu:
      case LayerKind::Tanh:
        break;
      case LayerKind::SkipSource:
        taps[l.tap] = cur;
        break;
      case LayerKind::SkipSink: {
        auto it = taps.find(l.tap);
        int tap_c;
        if (it != taps.end()) {
          if (it->second.h != cur.h || it->second.w != cur.w)
            fail("tap " + std::to_string(l.tap) + " spatial extent differs");
          tap_c = it->second.c;
          if (l.tap_channels != 0 && l.tap_channels != tap_c)
            fail("tap " + std::to_string(l.tap) + " declared width differs from source");
        } else {
          if (l.tap_channels < 1)
            fail("tap " + std::to_string(l.tap) + " is injected but has no declared width");
          tap_c = l.tap_channels;
        }
        cur = {cur.c + tap_c, cur.h, cur.w};
        break;
      }
    }
    out.push_back(cur);
  }
  return out;
}

Shape output_shape(const NetworkSpec& spec) {
  std::vector<Shape> t = shape_trace(spec);
  if (t.empty()) return {spec.in_channels, spec.in_height, spec.in_width};
  return t.back();
}

bool contains_padding(const NetworkSpec& spec) {
  for (const LayerSpec& l : spec.layers)
    if ((l.kind == LayerKind::Conv || l.kind == LayerKind::TransposedConv ||
         l.kind == LayerKind::MaxPool) &&
        l.pad != 0)
      return true;
  return false;
}

std::string spec_to_text(const NetworkSpec& spec) {
  std::string out = "net " + spec.name + " in " + std::to_string(spec.in_channels) + "x" +
                    std::to_string(spec.in_height) + "x" + std::to_string(spec.in_width) + "\n";
  char buf[160];
  for (const LayerSpec& l : spec.layers) {
    std::snprintf(buf, sizeof buf, "%s %s in%d out%d k%d s%d p%d slope%.3f tap%d tapc%d\n",
                  layer_kind_name(l.kind), l.name.c_str(), l.in_ch, l.out_ch, l.kernel, l.stride,
                  l.pad, static_cast<double>(l.slope), l.tap, l.tap_channels);
    out += buf;
  }
  return out;
}

uint64_t spec_hash(const NetworkSpec& spec) {
  std::string text = spec_to_text(spec);
  uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

int analytic_receptive_field(const NetworkSpec& spec) {
  int64_t r = 1, jump = 1;
  for (const LayerSpec& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::MaxPool:
        r += static_cast<int64_t>(l.kernel - 1) * jump;
        jump *= l.stride;
        break;
      case LayerKind::TransposedConv:
        throw ContractViolation(spec.name + ": receptive field recurrence needs a contracting stack");
      default:
        break;
    }
  }
  return static_cast<int>(r);
}

int64_t param_count(const NetworkSpec& spec) {
  int64_t total = 0;
  for (const LayerSpec& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::TransposedConv:
        total += static_cast<int64_t>(l.in_ch) * l.out_ch * l.kernel * l.kernel + l.out_ch;
        break;
      case LayerKind::BatchNorm:
        total += 2 * static_cast<int64_t>(l.in_ch);
        break;
      default:
        break;
    }
  }
  return total;
}

std::string model_report(const NetworkSpec& spec) {
  std::vector<Shape> shapes = shape_trace(spec);
  char buf[200];
  std::snprintf(buf, sizeof buf, "%s: input %dx%dx%d\n", spec.name.c_str(), spec.in_channels,
                spec.in_height, spec.in_width);
  std::string out = buf;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    int64_t params = 0;
    if (l.kind == LayerKind::Conv || l.kind == LayerKind::TransposedConv)
      params = static_cast<int64_t>(l.in_ch) * l.out_ch * l.kernel * l.kernel + l.out_ch;
    else if (l.kind == LayerKind::BatchNorm)
      params = 2 * static_cast<int64_t>(l.in_ch);
    std::snprintf(buf, sizeof buf, "%3zu  %-9s %-14s k%d s%d p%d  -> %4dx%dx%d  %lld\n", i,
                  layer_kind_name(l.kind), l.name.c_str(), l.kernel, l.stride, l.pad, shapes[i].c,
                  shapes[i].h, shapes[i].w, static_cast<long long>(params));
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "total learnable scalars: %lld\n",
                static_cast<long long>(param_count(spec)));
  out += buf;
  return out;
}

}  // namespace g2g::nn
