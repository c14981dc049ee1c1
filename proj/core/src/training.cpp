#include "g2g/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "g2g/errors.hpp"
#include "g2g/nn/kernels.hpp"

namespace fs = std::filesystem;

namespace g2g {

using nn::TensorF;

nn::TensorF raster_to_tensor(const Raster& r) {
  TensorF t(1, r.channels, r.height, r.width);
  for (int c = 0; c < r.channels; ++c)
    for (int y = 0; y < r.height; ++y)
      for (int x = 0; x < r.width; ++x) t.at(0, c, y, x) = r.at(x, y, c) * 2.f - 1.f;
  return t;
}

Raster tensor_to_raster(const nn::TensorF& t, int sample) {
  Raster r(t.w, t.h, t.c);
  for (int c = 0; c < t.c; ++c)
    for (int y = 0; y < t.h; ++y)
      for (int x = 0; x < t.w; ++x)
        r.at(x, y, c) = std::clamp((t.at(sample, c, y, x) + 1.f) / 2.f, 0.f, 1.f);
  return r;
}

double l1_loss(const TensorF& a, const TensorF& b) {
  if (!a.same_shape(b)) throw ContractViolation("l1_loss shape mismatch");
  double acc = 0;
  for (size_t i = 0; i < a.size(); ++i) acc += std::fabs(double(a.v[i]) - double(b.v[i]));
  return acc / static_cast<double>(a.size());
}

nn::TensorF l1_loss_grad(const TensorF& a, const TensorF& b, float scale) {
  if (!a.same_shape(b)) throw ContractViolation("l1_loss_grad shape mismatch");
  TensorF g(a.n, a.c, a.h, a.w);
  const float per = scale / static_cast<float>(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    float d = a.v[i] - b.v[i];
    g.v[i] = d > 0.f ? per : (d < 0.f ? -per : 0.f);
  }
  return g;
}

double bce_with_logits(const TensorF& logits, float target) {
  // softplus(z) - t*z, the numerically safe form of -t ln s(z) - (1-t) ln(1-s(z))
  double acc = 0;
  for (float zf : logits.v) {
    double z = zf;
    double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    acc += softplus - double(target) * z;
  }
  return acc / static_cast<double>(logits.size());
}

nn::TensorF bce_with_logits_grad(const TensorF& logits, float target, float scale) {
  TensorF g(logits.n, logits.c, logits.h, logits.w);
  const float per = scale / static_cast<float>(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) {
    double z = logits.v[i];
    double sig = 1.0 / (1.0 + std::exp(-z));
    g.v[i] = static_cast<float>((sig - double(target)) * per);
  }
  return g;
}

DualSpecs dual_specs() {
  DualSpecs s;
  s.localizer = nn::build_localizer();
  s.refiner = nn::build_refiner();
  s.critic1 = nn::build_critic1();
  s.critic2 = nn::build_critic2();
  return s;
}

namespace {

// Two valid convs + the pool/conv tail, shrunk to fit small test tensors but
// keeping the full critics' ingredients (valid convs, norm, pool head).
nn::NetworkSpec reduced_critic(const std::string& name, int in_ch, int side) {
  nn::NetworkSpec spec;
  spec.name = name;
  spec.in_channels = in_ch;
  spec.in_height = side;
  spec.in_width = side;
  auto push = [&spec](nn::LayerSpec l) { spec.layers.push_back(std::move(l)); };
  nn::LayerSpec c1;
  c1.kind = nn::LayerKind::Conv;
  c1.name = "c1_conv";
  c1.in_ch = in_ch;
  c1.out_ch = 8;
  c1.kernel = 4;
  c1.stride = 2;
  push(c1);
  nn::LayerSpec a1;
  a1.kind = nn::LayerKind::LeakyRelu;
  a1.name = "c1_lrelu";
  push(a1);
  nn::LayerSpec c2;
  c2.kind = nn::LayerKind::Conv;
  c2.name = "c2_conv";
  c2.in_ch = 8;
  c2.out_ch = 16;
  c2.kernel = 4;
  c2.stride = 2;
  push(c2);
  nn::LayerSpec n2;
  n2.kind = nn::LayerKind::BatchNorm;
  n2.name = "c2_norm";
  n2.in_ch = 16;
  n2.out_ch = 16;
  push(n2);
  nn::LayerSpec a2;
  a2.kind = nn::LayerKind::LeakyRelu;
  a2.name = "c2_lrelu";
  push(a2);
  nn::LayerSpec mp;
  mp.kind = nn::LayerKind::MaxPool;
  mp.name = "tail_pool";
  mp.kernel = 2;
  mp.stride = 1;
  push(mp);
  nn::LayerSpec head;
  head.kind = nn::LayerKind::Conv;
  head.name = "head";
  head.in_ch = 16;
  head.out_ch = 1;
  head.kernel = 1;
  head.stride = 1;
  push(head);
  nn::shape_trace(spec);
  return spec;
}

}  // namespace

DualSpecs dual_specs_reduced(int side, const std::vector<int>& widths) {
  DualSpecs s;
  s.localizer = nn::build_localizer_reduced(side, widths);
  s.refiner = nn::build_refiner_reduced(side, widths);
  s.critic1 = reduced_critic("critic1_reduced", 6, side);
  s.critic2 = reduced_critic("critic2_reduced", 9, side);
  return s;
}

BaselineSpecs baseline_specs() {
  BaselineSpecs s;
  s.generator = nn::build_baseline_generator();
  s.critic = nn::build_baseline_critic();
  return s;
}

TrainState init_train_state(const DualSpecs& specs, uint64_t seed) {
  TrainState st;
  st.specs = specs;
  st.localizer = nn::init_params<float>(specs.localizer, seed * 4 + 1);
  st.refiner = nn::init_params<float>(specs.refiner, seed * 4 + 2);
  st.critic1 = nn::init_params<float>(specs.critic1, seed * 4 + 3);
  st.critic2 = nn::init_params<float>(specs.critic2, seed * 4 + 4);
  st.localizer_opt = nn::zero_adam<float>(specs.localizer);
  st.refiner_opt = nn::zero_adam<float>(specs.refiner);
  st.critic1_opt = nn::zero_adam<float>(specs.critic1);
  st.critic2_opt = nn::zero_adam<float>(specs.critic2);
  return st;
}

BaselineState init_baseline_state(const BaselineSpecs& specs, uint64_t seed) {
  BaselineState st;
  st.specs = specs;
  st.generator = nn::init_params<float>(specs.generator, seed * 4 + 1);
  st.critic = nn::init_params<float>(specs.critic, seed * 4 + 3);
  st.generator_opt = nn::zero_adam<float>(specs.generator);
  st.critic_opt = nn::zero_adam<float>(specs.critic);
  return st;
}

namespace {

void add_inplace(TensorF& dst, const TensorF& src) {
  if (!dst.same_shape(src)) throw ContractViolation("gradient accumulation shape mismatch");
  for (size_t i = 0; i < dst.size(); ++i) dst.v[i] += src.v[i];
}

}  // namespace

StepLosses train_step(TrainState& st, const TensorF& satellite, const TensorF& gt_rgb,
                      const TensorF& overlay_rgb, const StepConfig& cfg) {
  const DualSpecs& S = st.specs;
  const float lr = static_cast<float>(cfg.lr);
  const float b1 = static_cast<float>(cfg.objective.beta1);
  const float b2 = static_cast<float>(cfg.objective.beta2);
  const float eps = static_cast<float>(cfg.objective.adam_eps);
  const double lambda = cfg.objective.lambda_l1;
  StepLosses out;

  // Stage-1 forward; the cache also records the cross-network encoder taps.
  nn::ForwardCache<float> g1c;
  TensorF fake1 = nn::net_forward(S.localizer, st.localizer, satellite, &g1c);

  TensorF pair_real = nn::concat_channels(satellite, gt_rgb);
  TensorF pair_fake = nn::concat_channels(satellite, fake1);

  // ---- critic 1: real pair up, generated pair down ----
  TensorF z1_fake_pre;
  {
    nn::ForwardCache<float> cr, cf;
    TensorF zr = nn::net_forward(S.critic1, st.critic1, pair_real, &cr);
    TensorF zf = nn::net_forward(S.critic1, st.critic1, pair_fake, &cf);
    out.d1 = bce_with_logits(zr, 1.f) + bce_with_logits(zf, 0.f);
    if (cfg.update_stage1) {
      nn::Grads<float> gd = nn::zero_grads<float>(S.critic1);
      nn::net_backward(S.critic1, st.critic1, cr, bce_with_logits_grad(zr, 1.f, 1.f), &gd);
      nn::net_backward(S.critic1, st.critic1, cf, bce_with_logits_grad(zf, 0.f, 1.f), &gd);
      nn::adam_step(st.critic1, gd, st.critic1_opt, lr, b1, b2, eps);
    }
    z1_fake_pre = std::move(zf);
  }

  // ---- stage-2 forward on [localization | satellite] plus spliced taps ----
  std::map<int, TensorF> inject;
  inject[nn::kTapEncoder1] = g1c.taps.at(nn::kTapEncoder1);
  inject[nn::kTapEncoder2] = g1c.taps.at(nn::kTapEncoder2);
  TensorF x2 = nn::concat_channels(fake1, satellite);
  nn::ForwardCache<float> g2c;
  TensorF fake2 = nn::net_forward(S.refiner, st.refiner, x2, &g2c, {}, &inject);

  TensorF nine_real = nn::concat_channels(x2, overlay_rgb);
  TensorF nine_fake = nn::concat_channels(x2, fake2);

  // ---- critic 2 (trains in both phases) ----
  {
    nn::ForwardCache<float> cr, cf;
    TensorF zr = nn::net_forward(S.critic2, st.critic2, nine_real, &cr);
    TensorF zf = nn::net_forward(S.critic2, st.critic2, nine_fake, &cf);
    out.d2 = bce_with_logits(zr, 1.f) + bce_with_logits(zf, 0.f);
    nn::Grads<float> gd = nn::zero_grads<float>(S.critic2);
    nn::net_backward(S.critic2, st.critic2, cr, bce_with_logits_grad(zr, 1.f, 1.f), &gd);
    nn::net_backward(S.critic2, st.critic2, cf, bce_with_logits_grad(zf, 0.f, 1.f), &gd);
    nn::adam_step(st.critic2, gd, st.critic2_opt, lr, b1, b2, eps);
  }

  // ---- refiner against the refreshed critic ----
  nn::ForwardCache<float> c2g;
  TensorF z2g = nn::net_forward(S.critic2, st.critic2, nine_fake, &c2g);
  out.g2_adv = bce_with_logits(z2g, 1.f);
  out.g2_l1 = l1_loss(fake2, overlay_rgb);
  out.g2_total = out.g2_adv + lambda * out.g2_l1;

  TensorF gin9 = nn::net_backward(S.critic2, st.critic2, c2g, bce_with_logits_grad(z2g, 1.f, 1.f),
                                  static_cast<nn::Grads<float>*>(nullptr));
  TensorF g_x2_adv, g_fake2;
  nn::split_channels(gin9, 6, g_x2_adv, g_fake2);
  add_inplace(g_fake2, l1_loss_grad(fake2, overlay_rgb, static_cast<float>(lambda)));

  nn::Grads<float> gg2 = nn::zero_grads<float>(S.refiner);
  std::map<int, TensorF> tap_grads;
  TensorF gin2 = nn::net_backward(S.refiner, st.refiner, g2c, g_fake2, &gg2, {}, &tap_grads);
  nn::adam_step(st.refiner, gg2, st.refiner_opt, lr, b1, b2, eps);

  // ---- localizer objective (logged always, applied only in phase 1) ----
  if (cfg.update_stage1) {
    nn::ForwardCache<float> c1g;
    TensorF z1g = nn::net_forward(S.critic1, st.critic1, pair_fake, &c1g);
    out.g1_adv = bce_with_logits(z1g, 1.f);
    out.g1_l1 = l1_loss(fake1, gt_rgb);
    out.g1_total = out.g1_adv + lambda * out.g1_l1;

    TensorF gin6 = nn::net_backward(S.critic1, st.critic1, c1g,
                                    bce_with_logits_grad(z1g, 1.f, 1.f),
                                    static_cast<nn::Grads<float>*>(nullptr));
    TensorF g_sat, g_fake1;
    nn::split_channels(gin6, 3, g_sat, g_fake1);
    add_inplace(g_fake1, l1_loss_grad(fake1, gt_rgb, static_cast<float>(lambda)));

    if (!cfg.objective.detach_stage1) {
      // Two dense return paths from the second stage: the refiner's input
      // channels and critic2's conditioning channels. The sparse skip-tap
      // path rides along in tap_grads.
      TensorF via_refiner, rest;
      nn::split_channels(gin2, 3, via_refiner, rest);
      add_inplace(g_fake1, via_refiner);
      TensorF via_critic2, rest2;
      nn::split_channels(g_x2_adv, 3, via_critic2, rest2);
      add_inplace(g_fake1, via_critic2);
    } else {
      tap_grads.clear();
    }

    nn::Grads<float> gg1 = nn::zero_grads<float>(S.localizer);
    nn::net_backward(S.localizer, st.localizer, g1c, g_fake1, &gg1, {}, &tap_grads);
    nn::adam_step(st.localizer, gg1, st.localizer_opt, lr, b1, b2, eps);
  } else {
    // Frozen stage: the losses are still computed so the log stays comparable across phases.
    out.g1_adv = bce_with_logits(z1_fake_pre, 1.f);
    out.g1_l1 = l1_loss(fake1, gt_rgb);
    out.g1_total = out.g1_adv + lambda * out.g1_l1;
  }

  st.step += 1;
  return out;
}

BaselineLosses baseline_train_step(BaselineState& st, const TensorF& satellite,
                                   const TensorF& target_rgb, const StepConfig& cfg) {
  const BaselineSpecs& S = st.specs;
  const float lr = static_cast<float>(cfg.lr);
  const float b1 = static_cast<float>(cfg.objective.beta1);
  const float b2 = static_cast<float>(cfg.objective.beta2);
  const float eps = static_cast<float>(cfg.objective.adam_eps);
  const double lambda = cfg.objective.lambda_l1;
  BaselineLosses out;

  nn::ForwardCache<float> gc;
  TensorF fake = nn::net_forward(S.generator, st.generator, satellite, &gc);
  TensorF pair_real = nn::concat_channels(satellite, target_rgb);
  TensorF pair_fake = nn::concat_channels(satellite, fake);

  {
    nn::ForwardCache<float> cr, cf;
    TensorF zr = nn::net_forward(S.critic, st.critic, pair_real, &cr);
    TensorF zf = nn::net_forward(S.critic, st.critic, pair_fake, &cf);
    out.d = bce_with_logits(zr, 1.f) + bce_with_logits(zf, 0.f);
    nn::Grads<float> gd = nn::zero_grads<float>(S.critic);
    nn::net_backward(S.critic, st.critic, cr, bce_with_logits_grad(zr, 1.f, 1.f), &gd);
    nn::net_backward(S.critic, st.critic, cf, bce_with_logits_grad(zf, 0.f, 1.f), &gd);
    nn::adam_step(st.critic, gd, st.critic_opt, lr, b1, b2, eps);
  }

  nn::ForwardCache<float> cg;
  TensorF zg = nn::net_forward(S.critic, st.critic, pair_fake, &cg);
  out.g_adv = bce_with_logits(zg, 1.f);
  out.g_l1 = l1_loss(fake, target_rgb);
  out.g_total = out.g_adv + lambda * out.g_l1;

  TensorF gin6 = nn::net_backward(S.critic, st.critic, cg, bce_with_logits_grad(zg, 1.f, 1.f),
                                  static_cast<nn::Grads<float>*>(nullptr));
  TensorF g_sat, g_fake;
  nn::split_channels(gin6, 3, g_sat, g_fake);
  add_inplace(g_fake, l1_loss_grad(fake, target_rgb, static_cast<float>(lambda)));

  nn::Grads<float> gg = nn::zero_grads<float>(S.generator);
  nn::net_backward(S.generator, st.generator, gc, g_fake, &gg);
  nn::adam_step(st.generator, gg, st.generator_opt, lr, b1, b2, eps);

  st.step += 1;
  return out;
}

SampleTensors tensors_from_triple(const SampleTriple& t, const MaskEncoding& enc) {
  SampleTensors out;
  out.satellite = raster_to_tensor(t.satellite);
  out.gt_rgb = raster_to_tensor(render_overlay(t.gt_mask, enc));
  out.overlay_rgb = raster_to_tensor(render_overlay(t.overlay_mask, enc));
  return out;
}

DualPrediction predict(const TrainState& st, const Raster& satellite) {
  TensorF sat = raster_to_tensor(satellite);
  nn::ForwardCache<float> g1c;
  TensorF fake1 = nn::net_forward(st.specs.localizer, st.localizer, sat, &g1c);
  std::map<int, TensorF> inject;
  inject[nn::kTapEncoder1] = g1c.taps.at(nn::kTapEncoder1);
  inject[nn::kTapEncoder2] = g1c.taps.at(nn::kTapEncoder2);
  TensorF x2 = nn::concat_channels(fake1, sat);
  TensorF fake2 =
      nn::net_forward(st.specs.refiner, st.refiner, x2, static_cast<nn::ForwardCache<float>*>(nullptr),
                      {}, &inject);
  DualPrediction p;
  p.localization = tensor_to_raster(fake1);
  p.refined = tensor_to_raster(fake2);
  return p;
}

Raster predict_baseline(const BaselineState& st, const Raster& satellite) {
  TensorF sat = raster_to_tensor(satellite);
  TensorF fake = nn::net_forward(st.specs.generator, st.generator, sat,
                                 static_cast<nn::ForwardCache<float>*>(nullptr));
  return tensor_to_raster(fake);
}

std::string loss_log_header() { return "phase,epoch,step,d1,g1_adv,g1_l1,d2,g2_adv,g2_l1"; }

std::string loss_log_row(const LossLogRow& row) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%d,%lld,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g", row.phase,
                row.epoch, static_cast<long long>(row.step), row.losses.d1, row.losses.g1_adv,
                row.losses.g1_l1, row.losses.d2, row.losses.g2_adv, row.losses.g2_l1);
  return buf;
}

std::vector<PhasePlan> default_phase_plan() {
  PhasePlan p1;
  p1.index = 1;
  p1.epochs = 200;
  p1.lr = 1e-3;
  p1.update_stage1 = true;
  PhasePlan p2;
  p2.index = 2;
  p2.epochs = 200;
  p2.lr = 1e-6;
  p2.update_stage1 = false;
  return {p1, p2};
}

std::string checkpoint_name(int phase, int epoch) {
  return "ckpt_phase" + std::to_string(phase) + "_epoch" + std::to_string(epoch) + ".bin";
}

namespace {

constexpr char kCheckpointMagic[8] = {'G', '2', 'G', 'C', 'K', 'P', 'T', '1'};

struct CheckpointHeader {
  uint32_t kind = 0;  // 1 = dual pair, 2 = baseline
  int32_t phase = 1;
  int32_t epochs_done = 0;
  int64_t step = 0;
};

void write_header(std::ostream& out, const CheckpointHeader& h) {
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  out.write(reinterpret_cast<const char*>(&h.kind), sizeof h.kind);
  out.write(reinterpret_cast<const char*>(&h.phase), sizeof h.phase);
  out.write(reinterpret_cast<const char*>(&h.epochs_done), sizeof h.epochs_done);
  out.write(reinterpret_cast<const char*>(&h.step), sizeof h.step);
}

CheckpointHeader read_header(std::istream& in, uint32_t expect_kind, const std::string& path) {
  char magic[8];
  CheckpointHeader h;
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw CheckpointError(path + ": not a checkpoint file");
  in.read(reinterpret_cast<char*>(&h.kind), sizeof h.kind);
  in.read(reinterpret_cast<char*>(&h.phase), sizeof h.phase);
  in.read(reinterpret_cast<char*>(&h.epochs_done), sizeof h.epochs_done);
  in.read(reinterpret_cast<char*>(&h.step), sizeof h.step);
  if (!in) throw CheckpointError(path + ": truncated header");
  if (h.kind != expect_kind)
    throw CheckpointError(path + ": checkpoint holds a different model family");
  return h;
}

void verify_hash(const std::string& path, const char* net, uint64_t stored, uint64_t wanted) {
  if (stored != wanted)
    throw CheckpointError(path + ": " + net + " weights were written for a different architecture");
}

template <typename Fn>
void atomic_file_write(const std::string& path, Fn&& fill) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot create " + tmp);
    fill(out);
    if (!out) throw IoError("failed writing " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp + " to " + path);
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainState& st) {
  atomic_file_write(path, [&](std::ostream& out) {
    CheckpointHeader h;
    h.kind = 1;
    h.phase = st.phase;
    h.epochs_done = st.epochs_done;
    h.step = st.step;
    write_header(out, h);
    nn::write_params(out, st.localizer);
    nn::write_adam(out, st.localizer_opt);
    nn::write_params(out, st.refiner);
    nn::write_adam(out, st.refiner_opt);
    nn::write_params(out, st.critic1);
    nn::write_adam(out, st.critic1_opt);
    nn::write_params(out, st.critic2);
    nn::write_adam(out, st.critic2_opt);
  });
}

void load_checkpoint(const std::string& path, TrainState& st) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(path + ": cannot open");
  CheckpointHeader h = read_header(in, 1, path);
  TrainState next;
  next.specs = st.specs;
  next.phase = h.phase;
  next.epochs_done = h.epochs_done;
  next.step = h.step;
  next.localizer = nn::read_params<float>(in);
  next.localizer_opt = nn::read_adam<float>(in);
  next.refiner = nn::read_params<float>(in);
  next.refiner_opt = nn::read_adam<float>(in);
  next.critic1 = nn::read_params<float>(in);
  next.critic1_opt = nn::read_adam<float>(in);
  next.critic2 = nn::read_params<float>(in);
  next.critic2_opt = nn::read_adam<float>(in);
  verify_hash(path, "localizer", next.localizer.hash, nn::spec_hash(st.specs.localizer));
  verify_hash(path, "refiner", next.refiner.hash, nn::spec_hash(st.specs.refiner));
  verify_hash(path, "critic1", next.critic1.hash, nn::spec_hash(st.specs.critic1));
  verify_hash(path, "critic2", next.critic2.hash, nn::spec_hash(st.specs.critic2));
  st = std::move(next);
}

void save_baseline_checkpoint(const std::string& path, const BaselineState& st) {
  atomic_file_write(path, [&](std::ostream& out) {
    CheckpointHeader h;
    h.kind = 2;
    h.phase = st.phase;
    h.epochs_done = st.epochs_done;
    h.step = st.step;
    write_header(out, h);
    nn::write_params(out, st.generator);
    nn::write_adam(out, st.generator_opt);
    nn::write_params(out, st.critic);
    nn::write_adam(out, st.critic_opt);
  });
}

void load_baseline_checkpoint(const std::string& path, BaselineState& st) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(path + ": cannot open");
  CheckpointHeader h = read_header(in, 2, path);
  BaselineState next;
  next.specs = st.specs;
  next.phase = h.phase;
  next.epochs_done = h.epochs_done;
  next.step = h.step;
  next.generator = nn::read_params<float>(in);
  next.generator_opt = nn::read_adam<float>(in);
  next.critic = nn::read_params<float>(in);
  next.critic_opt = nn::read_adam<float>(in);
  verify_hash(path, "generator", next.generator.hash, nn::spec_hash(st.specs.generator));
  verify_hash(path, "critic", next.critic.hash, nn::spec_hash(st.specs.critic));
  st = std::move(next);
}

namespace {

uint64_t mix_epoch(uint64_t seed, int phase, int epoch) {
  uint64_t x = seed ^ (static_cast<uint64_t>(phase) << 32) ^ static_cast<uint64_t>(epoch);
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// The visit order is a pure function of (seed, phase, epoch): resuming an
// interrupted run replays exactly the epochs an uninterrupted run would see.
std::vector<size_t> epoch_order(size_t n, uint64_t seed, int phase, int epoch) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::mt19937_64 rng(mix_epoch(seed, phase, epoch));
  for (size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
  return idx;
}

class LossLog {
 public:
  LossLog(const std::string& path, bool append) {
    if (path.empty()) return;
    bool fresh = !append || !fs::exists(path);
    out_.open(path, fresh ? std::ios::trunc : std::ios::app);
    if (!out_) throw IoError("cannot open loss log " + path);
    if (fresh) out_ << loss_log_header() << "\n";
  }
  void row(const LossLogRow& r) {
    if (out_.is_open()) out_ << loss_log_row(r) << "\n";
  }
  void flush() {
    if (out_.is_open()) out_.flush();
  }

 private:
  std::ofstream out_;
};

}  // namespace

void run_plan(TrainState& st, const DatasetManifest& train_set, const SampleLoader& load,
              const std::vector<PhasePlan>& phases, const TrainLoopConfig& cfg,
              const RunHooks& hooks) {
  if (train_set.entries.empty()) throw ConfigError("training manifest is empty");
  LossLog log(cfg.loss_log_path, cfg.append_log);
  bool stopped = false;
  for (const PhasePlan& ph : phases) {
    if (st.phase > ph.index) continue;
    if (st.phase < ph.index) {
      st.phase = ph.index;
      st.epochs_done = 0;
    }
    StepConfig sc;
    sc.lr = ph.lr;
    sc.update_stage1 = ph.update_stage1;
    sc.objective = cfg.objective;
    for (int e = st.epochs_done; e < ph.epochs && !stopped; ++e) {
      std::vector<size_t> order =
          epoch_order(train_set.entries.size(), cfg.shuffle_seed, ph.index, e);
      for (size_t k = 0; k < order.size() && !stopped; ++k) {
        SampleTriple t = load(train_set.entries[order[k]]);
        SampleTensors x = tensors_from_triple(t);
        StepLosses losses = train_step(st, x.satellite, x.gt_rgb, x.overlay_rgb, sc);
        if (cfg.log_every_steps > 0 && st.step % cfg.log_every_steps == 0)
          log.row({ph.index, e + 1, st.step, losses});
        if (hooks.after_step && !hooks.after_step(st, losses)) stopped = true;
      }
      if (stopped) break;
      st.epochs_done = e + 1;
      log.flush();
      bool boundary = st.epochs_done == ph.epochs;
      if (!cfg.checkpoint_dir.empty() &&
          (boundary || (cfg.checkpoint_every_epochs > 0 &&
                        st.epochs_done % cfg.checkpoint_every_epochs == 0))) {
        fs::create_directories(cfg.checkpoint_dir);
        save_checkpoint((fs::path(cfg.checkpoint_dir) / checkpoint_name(ph.index, st.epochs_done)).string(), st);
      }
      if (hooks.after_epoch) hooks.after_epoch(st);
    }
    if (stopped) break;
  }
  log.flush();
}

void run_baseline_plan(BaselineState& st, const DatasetManifest& train_set,
                       const SampleLoader& load, const std::vector<PhasePlan>& phases,
                       const TrainLoopConfig& cfg, const BaselineRunHooks& hooks) {
  if (train_set.entries.empty()) throw ConfigError("training manifest is empty");
  LossLog log(cfg.loss_log_path, cfg.append_log);
  bool stopped = false;
  for (const PhasePlan& ph : phases) {
    if (st.phase > ph.index) continue;
    if (st.phase < ph.index) {
      st.phase = ph.index;
      st.epochs_done = 0;
    }
    StepConfig sc;
    sc.lr = ph.lr;
    sc.objective = cfg.objective;
    for (int e = st.epochs_done; e < ph.epochs && !stopped; ++e) {
      std::vector<size_t> order =
          epoch_order(train_set.entries.size(), cfg.shuffle_seed, ph.index, e);
      for (size_t k = 0; k < order.size() && !stopped; ++k) {
        SampleTriple t = load(train_set.entries[order[k]]);
        SampleTensors x = tensors_from_triple(t);
        BaselineLosses bl = baseline_train_step(st, x.satellite, x.gt_rgb, sc);
        StepLosses as_row;
        as_row.d1 = bl.d;
        as_row.g1_adv = bl.g_adv;
        as_row.g1_l1 = bl.g_l1;
        as_row.g1_total = bl.g_total;
        if (cfg.log_every_steps > 0 && st.step % cfg.log_every_steps == 0)
          log.row({ph.index, e + 1, st.step, as_row});
        if (hooks.after_step && !hooks.after_step(st, bl)) stopped = true;
      }
      if (stopped) break;
      st.epochs_done = e + 1;
      log.flush();
      bool boundary = st.epochs_done == ph.epochs;
      if (!cfg.checkpoint_dir.empty() &&
          (boundary || (cfg.checkpoint_every_epochs > 0 &&
                        st.epochs_done % cfg.checkpoint_every_epochs == 0))) {
        fs::create_directories(cfg.checkpoint_dir);
        save_baseline_checkpoint(
            (fs::path(cfg.checkpoint_dir) / checkpoint_name(ph.index, st.epochs_done)).string(), st);
      }
      if (hooks.after_epoch) hooks.after_epoch(st);
    }
    if (stopped) break;
  }
  log.flush();
}

namespace {

Raster unit_to_signed(const Raster& r) {
  Raster s = r;
  for (float& v : s.values) v = v * 2.f - 1.f;
  return s;
}

}  // namespace

MaskPredictor refined_mask_predictor(const TrainState& st, const MaskEncoding& enc) {
  return [&st, enc](const SampleTriple& t) {
    DualPrediction p = predict(st, t.satellite);
    return binarize_prediction(unit_to_signed(p.refined), enc);
  };
}

MaskPredictor localizer_mask_predictor(const TrainState& st, const MaskEncoding& enc) {
  return [&st, enc](const SampleTriple& t) {
    DualPrediction p = predict(st, t.satellite);
    return binarize_prediction(unit_to_signed(p.localization), enc);
  };
}

MaskPredictor baseline_mask_predictor(const BaselineState& st, const MaskEncoding& enc) {
  return [&st, enc](const SampleTriple& t) {
    return binarize_prediction(unit_to_signed(predict_baseline(st, t.satellite)), enc);
  };
}

SplitEvaluation evaluate_split(const DatasetManifest& manifest, const SampleLoader& load,
                               const MaskPredictor& predict_mask) {
  if (manifest.entries.empty()) throw ConfigError("evaluation manifest is empty");
  ConfusionAccumulator pooled(2);
  MetricsReport sum;
  sum.iou_per_class.assign(2, 0.0);
  int images = 0;
  for (const ManifestEntry& e : manifest.entries) {
    SampleTriple t = load(e);
    Raster mask = predict_mask(t);
    ConfusionAccumulator acc(2);
    acc.add(t.gt_mask, mask);
    pooled.merge(acc);
    MetricsReport r = metrics_report(acc);
    sum.pa += r.pa;
    sum.ma += r.ma;
    sum.miou += r.miou;
    sum.fwiou += r.fwiou;
    sum.iou_building += r.iou_building;
    sum.dice_building += r.dice_building;
    for (size_t c = 0; c < sum.iou_per_class.size() && c < r.iou_per_class.size(); ++c)
      sum.iou_per_class[c] += r.iou_per_class[c];
    sum.pixels += r.pixels;
    ++images;
  }
  SplitEvaluation ev;
  ev.images = images;
  ev.micro = metrics_report(pooled);
  ev.micro.images = images;
  ev.macro = sum;
  ev.macro.pa /= images;
  ev.macro.ma /= images;
  ev.macro.miou /= images;
  ev.macro.fwiou /= images;
  ev.macro.iou_building /= images;
  ev.macro.dice_building /= images;
  for (double& v : ev.macro.iou_per_class) v /= images;
  ev.macro.images = images;
  return ev;
}

}  // namespace g2g
