#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "g2g/dataset.hpp"
#include "g2g/metrics.hpp"
#include "g2g/nn/builders.hpp"
#include "g2g/nn/network.hpp"
#include "g2g/raster.hpp"

namespace g2g {

struct ObjectiveConfig {
  double lambda_l1 = 100.0;  // reconstruction weight against the adversarial term
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  bool detach_stage1 = false;  // cut the refiner-to-localizer gradient paths
};

// [0,1] HWC raster <-> [-1,1] NCHW tensor. tensor_to_raster clamps back to
// the unit range for writing.
nn::TensorF raster_to_tensor(const Raster& r);
Raster tensor_to_raster(const nn::TensorF& t, int sample = 0);

double l1_loss(const nn::TensorF& a, const nn::TensorF& b);
nn::TensorF l1_loss_grad(const nn::TensorF& a, const nn::TensorF& b, float scale);

// Mean sigmoid cross-entropy of a logit map against an all-ones (real) or
// all-zeros (fake) target. A zero logit map scores ln 2 per side.
double bce_with_logits(const nn::TensorF& logits, float target);
nn::TensorF bce_with_logits_grad(const nn::TensorF& logits, float target, float scale);

struct DualSpecs {
  nn::NetworkSpec localizer, refiner, critic1, critic2;
};
DualSpecs dual_specs();  // production 256x256 wiring
// Same wiring on small tensors for gradient and resume tests; the critics
// shrink to a two-conv valid stack with the pool/conv tail.
DualSpecs dual_specs_reduced(int side, const std::vector<int>& widths);

struct BaselineSpecs {
  nn::NetworkSpec generator, critic;
};
BaselineSpecs baseline_specs();

struct TrainState {
  DualSpecs specs;
  nn::ModelParams<float> localizer, refiner, critic1, critic2;
  nn::AdamState<float> localizer_opt, refiner_opt, critic1_opt, critic2_opt;
  int phase = 1;
  int epochs_done = 0;  // completed epochs inside the current phase
  int64_t step = 0;     // lifetime optimizer steps
};
TrainState init_train_state(const DualSpecs& specs, uint64_t seed);

struct BaselineState {
  BaselineSpecs specs;
  nn::ModelParams<float> generator, critic;
  nn::AdamState<float> generator_opt, critic_opt;
  int phase = 1;
  int epochs_done = 0;
  int64_t step = 0;
};
BaselineState init_baseline_state(const BaselineSpecs& specs, uint64_t seed);

struct StepLosses {
  double d1 = 0, g1_adv = 0, g1_l1 = 0;
  double d2 = 0, g2_adv = 0, g2_l1 = 0;
  // The scalars the generator steps actually descend (adv + lambda * L1),
  // evaluated as single expressions; logs must recompose to these.
  double g1_total = 0, g2_total = 0;
};

struct StepConfig {
  double lr = 1e-3;
  bool update_stage1 = true;  // false: localizer/critic1 are frozen spectators
  ObjectiveConfig objective;
};

// One optimizer cycle: critic1 on (satellite, building rendering); refiner
// forward on [localization | satellite] with the localizer's encoder taps;
// critic2 on the 9-channel (localization, satellite, boundary rendering)
// stack; then the generators against the refreshed critics. With
// update_stage1 off the first stage is measured but never touched.
StepLosses train_step(TrainState& state, const nn::TensorF& satellite, const nn::TensorF& gt_rgb,
                      const nn::TensorF& overlay_rgb, const StepConfig& cfg);

struct BaselineLosses {
  double d = 0, g_adv = 0, g_l1 = 0, g_total = 0;
};
BaselineLosses baseline_train_step(BaselineState& state, const nn::TensorF& satellite,
                                   const nn::TensorF& target_rgb, const StepConfig& cfg);

// Normalized tensors for one manifest triple.
struct SampleTensors {
  nn::TensorF satellite, gt_rgb, overlay_rgb;
};
SampleTensors tensors_from_triple(const SampleTriple& t, const MaskEncoding& enc = {});

struct DualPrediction {
  Raster localization;  // [0,1] rendering of the first-stage output
  Raster refined;       // [0,1] rendering of the boundary-refined output
};
DualPrediction predict(const TrainState& state, const Raster& satellite);
Raster predict_baseline(const BaselineState& state, const Raster& satellite);

// ---- loss log (CSV) ----

struct LossLogRow {
  int phase = 1;
  int epoch = 0;
  int64_t step = 0;
  StepLosses losses;
};
std::string loss_log_header();  // phase,epoch,step,d1,g1_adv,g1_l1,d2,g2_adv,g2_l1
std::string loss_log_row(const LossLogRow& row);

// ---- phases / checkpoints ----

struct PhasePlan {
  int index = 1;
  int epochs = 200;
  double lr = 1e-3;
  bool update_stage1 = true;
};

// Two phases: 200 epochs at 1e-3 over all four networks, then 200 epochs at
// 1e-6 touching only the refiner pair.
std::vector<PhasePlan> default_phase_plan();

std::string checkpoint_name(int phase, int epoch);

// Atomic writes; loading verifies the stored spec hashes against the state's
// architecture and restores optimizer moments bit-exactly.
void save_checkpoint(const std::string& path, const TrainState& state);
void load_checkpoint(const std::string& path, TrainState& state);
void save_baseline_checkpoint(const std::string& path, const BaselineState& state);
void load_baseline_checkpoint(const std::string& path, BaselineState& state);

// ---- epoch loop ----

using SampleLoader = std::function<SampleTriple(const ManifestEntry&)>;

struct RunHooks {
  // After every step; return false to stop the whole run.
  std::function<bool(const TrainState&, const StepLosses&)> after_step;
  std::function<void(const TrainState&)> after_epoch;
};

struct TrainLoopConfig {
  uint64_t shuffle_seed = 1;
  ObjectiveConfig objective;
  int checkpoint_every_epochs = 25;  // phase boundaries always checkpoint
  std::string checkpoint_dir;        // empty: keep nothing on disk
  std::string loss_log_path;         // empty: no loss log
  bool append_log = false;           // resume appends instead of rewriting
  int log_every_steps = 1;
};

// Runs the phases in order with a stateless per-epoch shuffle (a pure
// function of seed, phase, and epoch), resuming from the state's counters.
void run_plan(TrainState& state, const DatasetManifest& train_set, const SampleLoader& load,
              const std::vector<PhasePlan>& phases, const TrainLoopConfig& cfg,
              const RunHooks& hooks = {});

struct BaselineRunHooks {
  std::function<bool(const BaselineState&, const BaselineLosses&)> after_step;
  std::function<void(const BaselineState&)> after_epoch;
};

// Baseline rows reuse the loss-log schema with the second-stage columns zero.
void run_baseline_plan(BaselineState& state, const DatasetManifest& train_set,
                       const SampleLoader& load, const std::vector<PhasePlan>& phases,
                       const TrainLoopConfig& cfg, const BaselineRunHooks& hooks = {});

// ---- evaluation ----

// Predictor: triple -> {0,1} building mask at tile size.
using MaskPredictor = std::function<Raster(const SampleTriple&)>;

MaskPredictor refined_mask_predictor(const TrainState& state, const MaskEncoding& enc = {});
MaskPredictor localizer_mask_predictor(const TrainState& state, const MaskEncoding& enc = {});
MaskPredictor baseline_mask_predictor(const BaselineState& state, const MaskEncoding& enc = {});

struct SplitEvaluation {
  MetricsReport macro;  // per-image means
  MetricsReport micro;  // pooled counts
  int images = 0;
};
SplitEvaluation evaluate_split(const DatasetManifest& manifest, const SampleLoader& load,
                               const MaskPredictor& predict_mask);

}  // namespace g2g
