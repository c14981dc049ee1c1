#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "g2g/errors.hpp"
#include "g2g/nn/builders.hpp"
#include "g2g/training.hpp"

using namespace g2g;
using namespace g2g::nn;

TEST_CASE("production network geometries") {
  NetworkSpec g1 = build_localizer();
  NetworkSpec g2 = build_refiner();
  NetworkSpec d1 = build_critic1();
  NetworkSpec d2 = build_critic2();
  NetworkSpec bg = build_baseline_generator();
  NetworkSpec bd = build_baseline_critic();

  CHECK(output_shape(g1) == Shape{3, 256, 256});
  CHECK(g1.in_channels == 3);
  CHECK(output_shape(g2) == Shape{3, 256, 256});
  CHECK(g2.in_channels == 6);
  CHECK(output_shape(d1) == Shape{1, 12, 12});
  CHECK(d1.in_channels == 6);
  CHECK(output_shape(d2) == Shape{1, 4, 4});
  CHECK(d2.in_channels == 9);
  CHECK(output_shape(bg) == Shape{3, 256, 256});
  CHECK(output_shape(bd) == Shape{1, 30, 30});
  CHECK(bd.in_channels == 6);

  // The critics never pad; the padded baseline critic does.
  CHECK_FALSE(contains_padding(d1));
  CHECK_FALSE(contains_padding(d2));
  CHECK(contains_padding(bd));
  for (const NetworkSpec* s : {&d1, &d2})
    for (const LayerSpec& l : s->layers) CHECK(l.pad == 0);
}

TEST_CASE("analytic receptive fields of the three critics") {
  CHECK(analytic_receptive_field(build_critic1()) == 78);
  CHECK(analytic_receptive_field(build_critic2()) == 158);
  CHECK(analytic_receptive_field(build_baseline_critic()) == 70);
  CHECK_THROWS_AS(analytic_receptive_field(build_localizer()), ContractViolation);
}

TEST_CASE("probe agrees with the recurrence on constructed stride-1 nets") {
  LayerSpec c;
  c.kind = LayerKind::Conv;
  c.in_ch = 1;
  c.out_ch = 1;
  c.kernel = 3;
  c.stride = 1;
  c.name = "c";

  NetworkSpec one{"one", 1, 11, 11, {c}};
  CHECK(analytic_receptive_field(one) == 3);
  ProbeResult p1 = receptive_field_probe(one);
  CHECK(p1.height == 3);
  CHECK(p1.width == 3);

  LayerSpec c2 = c;
  c2.name = "c2";
  NetworkSpec two{"two", 1, 11, 11, {c, c2}};
  CHECK(analytic_receptive_field(two) == 5);
  ProbeResult p2 = receptive_field_probe(two);
  CHECK(p2.height == 5);
  CHECK(p2.width == 5);
}

TEST_CASE("probe agrees with the recurrence on the reduced critic stack") {
  DualSpecs reduced = dual_specs_reduced(16, {2, 2, 2, 2});
  int rf = analytic_receptive_field(reduced.critic1);
  CHECK(rf == 14);  // k4s2, k4s2, pool k2s1, conv k1s1
  ProbeResult p = receptive_field_probe(reduced.critic1);
  CHECK(p.height == rf);
  CHECK(p.width == rf);
}

TEST_CASE("refiner widens its two outer decoder stages for the spliced taps") {
  NetworkSpec g2 = build_refiner();
  std::vector<int> tconv_in;
  for (const LayerSpec& l : g2.layers)
    if (l.kind == LayerKind::TransposedConv) tconv_in.push_back(l.in_ch);
  REQUIRE(tconv_in.size() == 8);
  CHECK(tconv_in[6] == 384);  // 256 decoder + 64 own skip + 64 injected
  CHECK(tconv_in[7] == 192);  // 128 decoder + 64 injected

  std::set<int> sinks;
  for (const LayerSpec& l : g2.layers)
    if (l.kind == LayerKind::SkipSink && l.tap >= kTapEncoder1) sinks.insert(l.tap);
  CHECK(sinks == std::set<int>{kTapEncoder1, kTapEncoder2});

  std::set<int> sources;
  for (const LayerSpec& l : build_localizer().layers)
    if (l.kind == LayerKind::SkipSource && l.tap >= kTapEncoder1) sources.insert(l.tap);
  CHECK(sources == std::set<int>{kTapEncoder1, kTapEncoder2});
}

TEST_CASE("unet builder rejects an input side that cannot reach 1x1") {
  UnetConfig cfg;
  cfg.name = "bad";
  cfg.input_side = 48;  // not 2^4
  cfg.widths = {4, 4, 4, 4};
  CHECK_THROWS_AS(make_unet(cfg), InvalidArgument);
  cfg.input_side = 16;
  CHECK_NOTHROW(make_unet(cfg));
}

TEST_CASE("spec text and hash are stable and architecture-sensitive") {
  NetworkSpec d1 = build_critic1();
  CHECK(spec_to_text(d1) == spec_to_text(build_critic1()));
  CHECK(spec_hash(d1) == spec_hash(build_critic1()));

  NetworkSpec mutated = d1;
  mutated.layers[0].out_ch += 1;
  CHECK(spec_hash(mutated) != spec_hash(d1));

  std::string report = model_report(d1);
  CHECK(report.find("critic1") != std::string::npos);
  CHECK(report.find("12") != std::string::npos);
}

TEST_CASE("parameter counts follow the layer algebra") {
  LayerSpec c;
  c.kind = LayerKind::Conv;
  c.in_ch = 3;
  c.out_ch = 4;
  c.kernel = 3;
  c.name = "c";
  LayerSpec b;
  b.kind = LayerKind::BatchNorm;
  b.in_ch = 4;
  b.out_ch = 4;
  b.name = "b";
  NetworkSpec tiny{"tiny", 3, 8, 8, {c, b}};
  CHECK(param_count(tiny) == 4 * 3 * 3 * 3 + 4 + 2 * 4);

  // The reduced localizer stays within the finite-difference budget.
  CHECK(param_count(build_localizer_reduced(16, {2, 2, 2, 2})) <= 1000);
}

TEST_CASE("batched forward equals per-sample forward") {
  NetworkSpec spec = build_localizer_reduced(16, {2, 2, 2, 2});
  ModelParams<float> params = init_params<float>(spec, 3);

  TensorF batch(3, 3, 16, 16);
  std::mt19937_64 rng(4);
  for (auto& v : batch.v) v = static_cast<float>((rng() >> 40) & 0xff) / 127.5f - 1.f;

  TensorF all = net_forward<float>(spec, params, batch, nullptr);
  for (int s = 0; s < 3; ++s) {
    TensorF single(1, 3, 16, 16);
    std::copy_n(batch.v.begin() + static_cast<long>(s) * batch.sample_size(), batch.sample_size(),
                single.v.begin());
    TensorF out = net_forward<float>(spec, params, single, nullptr);
    for (size_t i = 0; i < out.v.size(); ++i)
      CHECK(out.v[i] == all.v[static_cast<size_t>(s) * out.v.size() + i]);
  }
}

TEST_CASE("weight init is seed-deterministic") {
  NetworkSpec spec = build_localizer_reduced(16, {2, 2, 2, 2});
  ModelParams<float> a = init_params<float>(spec, 7);
  ModelParams<float> b = init_params<float>(spec, 7);
  ModelParams<float> c = init_params<float>(spec, 8);
  REQUIRE(a.layers.size() == b.layers.size());
  bool all_equal = true, any_diff_seed = false;
  for (size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].w.v != b.layers[i].w.v) all_equal = false;
    if (a.layers[i].w.v != c.layers[i].w.v && !a.layers[i].w.v.empty()) any_diff_seed = true;
  }
  CHECK(all_equal);
  CHECK(any_diff_seed);
}

TEST_CASE("parameter and optimizer serialization round trips bit-exactly") {
  NetworkSpec spec = build_localizer_reduced(16, {2, 2, 2, 2});
  ModelParams<float> params = init_params<float>(spec, 11);
  AdamState<float> opt = zero_adam<float>(spec);
  opt.t = 5;
  for (auto& layer : opt.m)
    if (!layer.w.v.empty()) {
      layer.w.v[0] = 0.125f;
      break;
    }

  std::stringstream ps;
  write_params(ps, params);
  ModelParams<float> back = read_params<float>(ps);
  REQUIRE(back.layers.size() == params.layers.size());
  CHECK(back.hash == params.hash);
  for (size_t i = 0; i < params.layers.size(); ++i) {
    CHECK(back.layers[i].w.v == params.layers[i].w.v);
    CHECK(back.layers[i].b.v == params.layers[i].b.v);
    CHECK(back.layers[i].gamma.v == params.layers[i].gamma.v);
    CHECK(back.layers[i].beta.v == params.layers[i].beta.v);
  }

  std::stringstream as;
  write_adam(as, opt);
  AdamState<float> opt_back = read_adam<float>(as);
  CHECK(opt_back.t == 5);
  REQUIRE(opt_back.m.size() == opt.m.size());
  for (size_t i = 0; i < opt.m.size(); ++i) {
    CHECK(opt_back.m[i].w.v == opt.m[i].w.v);
    CHECK(opt_back.v[i].w.v == opt.v[i].w.v);
  }

  // Scalar width is tagged: a float stream refuses to load as double.
  std::stringstream ps2;
  write_params(ps2, params);
  CHECK_THROWS_AS(read_params<double>(ps2), CheckpointError);

  // Truncation is refused.
  std::stringstream ps3;
  write_params(ps3, params);
  std::string bytes = ps3.str();
  std::stringstream cut(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(read_params<float>(cut), CheckpointError);
}
