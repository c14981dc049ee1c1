// Command-line front end: prepare / train / evaluate / predict / compare /
// pipeline. The CLI only orchestrates; all pixel, metric, and training logic
// lives in the core library.

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fcntl.h>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "CLI11.hpp"
#include "g2g/config.hpp"
#include "g2g/dataset.hpp"
#include "g2g/errors.hpp"
#include "g2g/metrics.hpp"
#include "g2g/training.hpp"

namespace fs = std::filesystem;
using namespace g2g;

namespace {

// Exit codes, one per error class.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;      // usage / configuration
constexpr int kExitData = 3;        // pairing, labels, file I/O
constexpr int kExitCheckpoint = 4;  // weight-file problems
constexpr int kExitInternal = 5;

std::string group_digits(long long v) {
  std::string raw = std::to_string(v);
  std::string out;
  int from_end = 0;
  for (size_t i = raw.size(); i-- > 0;) {
    out.insert(out.begin(), raw[i]);
    if (++from_end % 3 == 0 && i > 0 && raw[i - 1] != '-') out.insert(out.begin(), ',');
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot create " + tmp);
    out << text;
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp + " into place");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// One run owns its output directory for its lifetime.
class OutputDir {
 public:
  explicit OutputDir(const std::string& dir) : dir_(dir) {
    fs::create_directories(dir);
    lock_path_ = (fs::path(dir) / ".lock").string();
    int fd = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      if (errno == EEXIST)
        throw ConfigError(dir + " is owned by another run (stale? remove " + lock_path_ + ")");
      throw IoError("cannot create lockfile " + lock_path_);
    }
    std::string pid = std::to_string(::getpid()) + "\n";
    (void)!::write(fd, pid.c_str(), pid.size());
    ::close(fd);
  }
  ~OutputDir() { ::unlink(lock_path_.c_str()); }
  OutputDir(const OutputDir&) = delete;
  OutputDir& operator=(const OutputDir&) = delete;

  const std::string& path() const { return dir_; }
  std::string file(const std::string& name) const { return (fs::path(dir_) / name).string(); }

 private:
  std::string dir_;
  std::string lock_path_;
};

// Provenance: the resolved configuration lands next to every output.
void echo_config(const OutputDir& out, const RunConfig& cfg) {
  write_text_file(out.file("effective.cfg"), serialize_config(cfg));
}

// Options shared by every subcommand; flags override config-file keys, and
// G2G_OUTPUT_ROOT overrides the configured output root when no flag is given.
struct CommonOpts {
  std::string config_path, data_root, output_root, checkpoint, model;
  uint64_t seed = 0;
  CLI::Option* data_o = nullptr;
  CLI::Option* out_o = nullptr;
  CLI::Option* ckpt_o = nullptr;
  CLI::Option* model_o = nullptr;
  CLI::Option* seed_o = nullptr;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key=value run configuration file");
    data_o = cmd->add_option("--data-root", data_root, "dataset directory");
    out_o = cmd->add_option("--output-root", output_root,
                            "output directory (default from config; env G2G_OUTPUT_ROOT overrides)");
    ckpt_o = cmd->add_option("--checkpoint", checkpoint, "checkpoint to load / resume from");
    model_o = cmd->add_option("--model", model, "g2g | pix2pix");
    seed_o = cmd->add_option("--seed", seed, "master seed for init, shuffling, and fixtures");
  }

  RunConfig resolve() const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config_file(config_path);
    if (data_o->count()) cfg.data_root = data_root;
    if (const char* env = std::getenv("G2G_OUTPUT_ROOT"); env && *env && !out_o->count())
      cfg.output_root = env;
    if (out_o->count()) cfg.output_root = output_root;
    if (ckpt_o->count()) cfg.checkpoint = checkpoint;
    if (model_o->count()) {
      if (model != "g2g" && model != "pix2pix")
        throw ConfigError("unknown model '" + model + "' (expected g2g or pix2pix)");
      cfg.model = model;
    }
    if (seed_o->count()) cfg.seed = seed;
    return cfg;
  }
};

bool is_full_scale_grid(const TileGridSpec& s) {
  return s.source_side == 4053 && s.trimmed_side == 4050 && s.tile_side == 675 &&
         s.output_side == 256 && s.grid_n == 6;
}

// Fixture-sized stand-in for the orthophoto grid: same trim-and-tile shape
// (3 px trim, 6x6 grid, downscale to 256) at a quarter of the source side.
constexpr TileGridSpec kSyntheticGrid{1623, 1620, 270, 256, 6};

SplitCounts synthetic_counts(const RunConfig& cfg, int n) {
  if (cfg.train_count + cfg.val_count + cfg.test_count == n) return cfg.split_counts();
  if (n >= 3) return {n - 2, 1, 1};
  if (n == 2) return {1, 1, 0};
  return {n, 0, 0};
}

// Pair sat/gt PNGs by file name under <data_root>/sources/{sat,gt}.
std::vector<SourcePair> discover_sources(const std::string& data_root) {
  std::vector<SourcePair> out;
  fs::path sat_dir = fs::path(data_root) / "sources" / "sat";
  fs::path gt_dir = fs::path(data_root) / "sources" / "gt";
  if (!fs::is_directory(sat_dir)) return out;
  std::vector<fs::path> sats;
  for (const auto& e : fs::directory_iterator(sat_dir))
    if (e.path().extension() == ".png") sats.push_back(e.path());
  std::sort(sats.begin(), sats.end());
  for (const auto& sat : sats) {
    fs::path gt = gt_dir / sat.filename();
    if (!fs::exists(gt))
      throw PairingError(sat.string() + " has no ground-truth partner " + gt.string());
    out.push_back({sat.stem().string(), sat.string(), gt.string()});
  }
  return out;
}

int entry_count(const std::map<Split, DatasetManifest>& m, Split s) {
  auto it = m.find(s);
  return it == m.end() ? 0 : static_cast<int>(it->second.entries.size());
}

// ---- prepare ----

void run_prepare(RunConfig cfg, int synthetic_n) {
  if (synthetic_n > 0 && is_full_scale_grid(cfg.grid)) cfg.grid = kSyntheticGrid;
  cfg.grid.validate();

  OutputDir out(cfg.data_root);
  echo_config(out, cfg);

  PixelLossReport loss = pixel_loss_report(cfg.grid);
  std::cout << "pixel loss for " << cfg.grid.source_side << "px sources, direct downscale vs "
            << "tiling strategy (per tile): " << group_digits(loss.direct_loss) << " vs "
            << group_digits(loss.strategy_loss_per_tile) << " (trim accounts for "
            << group_digits(loss.trim_loss) << ")\n";

  std::vector<SourcePair> sources;
  SplitCounts counts = cfg.split_counts();
  if (synthetic_n > 0) {
    std::cout << "synthesizing " << synthetic_n << " fixture sources at "
              << cfg.grid.source_side << "px (seed " << cfg.seed << ")\n";
    sources = write_fixture_sources((fs::path(cfg.data_root) / "sources").string(),
                                    synthesize_fixture(synthetic_n, cfg.grid.source_side, cfg.seed));
    counts = synthetic_counts(cfg, synthetic_n);
  } else {
    sources = discover_sources(cfg.data_root);
    if (sources.empty()) {
      std::cout << "warning: no source pairs under " << cfg.data_root
                << "/sources; writing empty manifests\n";
      counts = {0, 0, 0};
    }
  }

  BuildManifestOptions opt;
  opt.spec = cfg.grid;
  opt.counts = counts;
  opt.seed = cfg.seed;
  opt.contour_width = cfg.contour_width;
  auto manifests = build_manifest(sources, cfg.data_root, opt);
  std::cout << "manifests: train " << entry_count(manifests, Split::Train) << " tiles, val "
            << entry_count(manifests, Split::Val) << ", test " << entry_count(manifests, Split::Test)
            << "\n";
}

// ---- train ----

DatasetManifest load_split_manifest(const RunConfig& cfg, Split split) {
  fs::path p = fs::path(cfg.data_root) / split_name(split) / "manifest.csv";
  if (!fs::exists(p))
    throw ConfigError(p.string() + " is missing; run `g2g prepare` first");
  return manifest_from_csv(split, read_text_file(p.string()), p.string());
}

// Smoke runs shrink the dataset and epochs, never the tensor shapes: tiles
// stay 256x256 so the production specs are what gets exercised.
DatasetManifest build_smoke_dataset(const RunConfig& cfg, const std::string& dir) {
  BuildManifestOptions opt;
  opt.spec = TileGridSpec{259, 256, 256, 256, 1};
  opt.counts = {2, 0, 0};
  opt.seed = cfg.seed;
  opt.contour_width = cfg.contour_width;
  auto sources = write_fixture_sources((fs::path(dir) / "sources").string(),
                                       synthesize_fixture(2, opt.spec.source_side, cfg.seed));
  return build_manifest(sources, dir, opt).at(Split::Train);
}

void run_train(const RunConfig& cfg, int epochs_per_phase, bool synthetic_smoke) {
  OutputDir out(fs::path(cfg.output_root) / ("train-" + cfg.model));
  echo_config(out, cfg);
  std::ofstream log(out.file("train.log"), std::ios::trunc);

  std::string data_root = cfg.data_root;
  DatasetManifest train_set;
  if (synthetic_smoke) {
    data_root = out.file("smoke-data");
    train_set = build_smoke_dataset(cfg, data_root);
  } else {
    train_set = load_split_manifest(cfg, Split::Train);
  }
  SampleLoader loader = [data_root](const ManifestEntry& e) {
    return load_triple(data_root, e, MaskEncoding{});
  };

  std::vector<PhasePlan> plan = cfg.model == "g2g" ? cfg.phase_plan() : cfg.baseline_plan();
  if (epochs_per_phase > 0)
    for (PhasePlan& ph : plan) ph.epochs = epochs_per_phase;

  TrainLoopConfig loop;
  loop.shuffle_seed = cfg.seed;
  loop.objective = cfg.objective;
  loop.checkpoint_every_epochs = cfg.checkpoint_every;
  loop.checkpoint_dir = out.file("checkpoints");
  loop.loss_log_path = out.file("loss_log.csv");
  loop.append_log = !cfg.checkpoint.empty();
  loop.log_every_steps = cfg.log_every;

  auto banner = [&](const std::string& line) {
    std::cout << line << "\n";
    log << line << "\n";
    log.flush();
  };

  if (cfg.model == "g2g") {
    TrainState st = init_train_state(dual_specs(), cfg.seed);
    banner("model g2g: localizer+refiner, critic maps " +
           std::to_string(nn::output_shape(st.specs.critic1).h) + "x" +
           std::to_string(nn::output_shape(st.specs.critic1).w) + " and " +
           std::to_string(nn::output_shape(st.specs.critic2).h) + "x" +
           std::to_string(nn::output_shape(st.specs.critic2).w));
    if (!cfg.checkpoint.empty()) {
      load_checkpoint(cfg.checkpoint, st);
      banner("resumed from " + cfg.checkpoint + " (phase " + std::to_string(st.phase) + ", epoch " +
             std::to_string(st.epochs_done) + ")");
    }
    run_plan(st, train_set, loader, plan, loop);
    banner("done: phase " + std::to_string(st.phase) + ", " + std::to_string(st.step) + " steps");
  } else {
    BaselineState st = init_baseline_state(baseline_specs(), cfg.seed);
    nn::Shape d = nn::output_shape(st.specs.critic);
    if (d.h != 30 || d.w != 30)
      throw ContractViolation("baseline critic logit map is not 30x30");
    banner("model pix2pix: single generator, critic logit map " + std::to_string(d.h) + "x" +
           std::to_string(d.w) + " (receptive field " +
           std::to_string(nn::analytic_receptive_field(st.specs.critic)) + "px)");
    if (!cfg.checkpoint.empty()) {
      load_baseline_checkpoint(cfg.checkpoint, st);
      banner("resumed from " + cfg.checkpoint);
    }
    run_baseline_plan(st, train_set, loader, plan, loop);
    banner("done: " + std::to_string(st.step) + " steps");
  }
}

// ---- evaluate ----

Raster gt_panel(const Raster& gt_mask) {
  Raster rgb(gt_mask.width, gt_mask.height, 3);
  for (int y = 0; y < gt_mask.height; ++y)
    for (int x = 0; x < gt_mask.width; ++x)
      for (int c = 0; c < 3; ++c) rgb.at(x, y, c) = gt_mask.at(x, y, 0) > 0.5f ? 1.f : 0.f;
  return rgb;
}

constexpr int kSeparator = 4;  // white gutter between triptych panels

Raster triptych(const Raster& input, const Raster& gt, const Raster& pred) {
  int w = input.width, h = input.height;
  Raster out(3 * w + 2 * kSeparator, h, 3, 1.f);
  auto blit = [&](const Raster& src, int x0) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) out.at(x0 + x, y, c) = src.at(x, y, c % src.channels);
  };
  blit(input, 0);
  blit(gt, w + kSeparator);
  blit(pred, 2 * (w + kSeparator));
  return out;
}

Raster signed_range(Raster r) {
  for (float& v : r.values) v = v * 2.f - 1.f;
  return r;
}

void run_evaluate(const RunConfig& cfg, const std::string& split_arg) {
  Split split = split_arg == "train" ? Split::Train : split_arg == "val" ? Split::Val : Split::Test;
  if (split_arg != "train" && split_arg != "val" && split_arg != "test")
    throw ConfigError("unknown split '" + split_arg + "'");
  if (cfg.checkpoint.empty()) throw ConfigError("evaluate needs --checkpoint");

  OutputDir out(fs::path(cfg.output_root) / ("eval-" + cfg.model + "-" + split_arg));
  echo_config(out, cfg);
  fs::create_directories(out.file("triptychs"));

  DatasetManifest man = load_split_manifest(cfg, split);
  SampleLoader loader = [&cfg](const ManifestEntry& e) {
    return load_triple(cfg.data_root, e, MaskEncoding{});
  };

  // One forward per tile: render the figure as a side effect, return the
  // binarized mask the accumulator needs.
  auto figure = [&out](const SampleTriple& t, const Raster& pred_rgb) {
    Raster fig = triptych(t.satellite, gt_panel(t.gt_mask), pred_rgb);
    write_png(out.file("triptychs/" + tile_name(t.source_id, t.row, t.col)), fig);
  };
  MaskEncoding enc;
  MaskPredictor predictor;
  TrainState dual;
  BaselineState base;
  if (cfg.model == "g2g") {
    dual = init_train_state(dual_specs(), cfg.seed);
    load_checkpoint(cfg.checkpoint, dual);
    predictor = [&](const SampleTriple& t) {
      DualPrediction p = predict(dual, t.satellite);
      figure(t, p.refined);
      return binarize_prediction(signed_range(p.refined), enc);
    };
  } else {
    base = init_baseline_state(baseline_specs(), cfg.seed);
    load_baseline_checkpoint(cfg.checkpoint, base);
    predictor = [&](const SampleTriple& t) {
      Raster p = predict_baseline(base, t.satellite);
      figure(t, p);
      return binarize_prediction(signed_range(p), enc);
    };
  }

  SplitEvaluation ev = evaluate_split(man, loader, predictor);
  write_text_file(out.file("metrics.csv"), metrics_csv(cfg.model, ev.macro, ev.micro));

  std::cout << "evaluated " << ev.images << " tiles of " << split_arg << ": macro miou "
            << ev.macro.miou << ", micro miou " << ev.micro.miou << "\n"
            << "wrote " << out.file("metrics.csv") << "\n";
}

// ---- predict ----

void run_predict(const RunConfig& cfg, const std::string& input_path) {
  if (cfg.checkpoint.empty()) throw ConfigError("predict needs --checkpoint");
  OutputDir out(fs::path(cfg.output_root) / "predict");
  echo_config(out, cfg);

  Raster sat = read_png(input_path);
  std::string stem = fs::path(input_path).stem().string();
  if (cfg.model == "g2g") {
    TrainState st = init_train_state(dual_specs(), cfg.seed);
    load_checkpoint(cfg.checkpoint, st);
    DualPrediction pred = predict(st, sat);
    write_png(out.file(stem + "_localization.png"), pred.localization);
    write_png(out.file(stem + "_refined.png"), pred.refined);
    std::cout << "wrote " << out.file(stem + "_refined.png") << "\n";
  } else {
    BaselineState st = init_baseline_state(baseline_specs(), cfg.seed);
    load_baseline_checkpoint(cfg.checkpoint, st);
    write_png(out.file(stem + "_prediction.png"), predict_baseline(st, sat));
    std::cout << "wrote " << out.file(stem + "_prediction.png") << "\n";
  }
}

// ---- compare ----

// Quoted literature column (multi-task learning network): the source reports
// only pixel accuracy and mean IoU.
const char* kLiteratureName = "Multi-task [11] (quoted)";
const char* kLiteratureCells[4] = {"0.95", "-", "0.70", "-"};

ComparisonTable comparison_with_literature(const std::vector<std::string>& report_paths) {
  std::vector<std::pair<std::string, MetricsReport>> reports;
  for (const std::string& path : report_paths) {
    auto rows = parse_metrics_csv(read_text_file(path), path);
    bool found = false;
    for (const auto& row : rows)
      if (row.scope == "macro") {
        reports.emplace_back(row.model, row.report);
        found = true;
        break;
      }
    if (!found) throw IoError(path + ": no macro row");
  }
  ComparisonTable table = compare_models(reports);
  table.model_names.push_back(kLiteratureName);
  for (int r = 0; r < 4; ++r) table.cells[static_cast<size_t>(r)].push_back(kLiteratureCells[r]);
  return table;
}

void run_compare(const RunConfig& cfg, const std::vector<std::string>& report_paths) {
  OutputDir out(fs::path(cfg.output_root) / "compare");
  echo_config(out, cfg);
  ComparisonTable table = comparison_with_literature(report_paths);
  write_text_file(out.file("comparison.csv"), table.to_csv());
  write_text_file(out.file("comparison.txt"), table.to_text());
  std::cout << table.to_text();
}

// ---- pipeline ----

void run_pipeline(const RunConfig& base, int synthetic_n, int epochs_per_phase) {
  int stage = 1;
  auto announce = [&stage](const std::string& what) {
    std::cout << "[" << stage++ << "/6] " << what << "\n";
  };

  announce("prepare");
  run_prepare(base, synthetic_n);

  std::vector<std::string> reports;
  for (const char* model : {"g2g", "pix2pix"}) {
    RunConfig cfg = base;
    cfg.model = model;
    announce("train " + cfg.model);
    run_train(cfg, epochs_per_phase, false);

    announce("evaluate " + cfg.model);
    RunConfig eval_cfg = cfg;
    int last_phase = cfg.model == "g2g" ? 2 : 1;
    int last_epoch = epochs_per_phase > 0
                         ? epochs_per_phase
                         : (cfg.model == "g2g" ? cfg.phase2_epochs : cfg.baseline_epochs);
    eval_cfg.checkpoint = (fs::path(cfg.output_root) / ("train-" + cfg.model) / "checkpoints" /
                           checkpoint_name(last_phase, last_epoch))
                              .string();
    run_evaluate(eval_cfg, "test");
    reports.push_back(
        (fs::path(cfg.output_root) / ("eval-" + cfg.model + "-test") / "metrics.csv").string());
  }

  announce("compare");
  run_compare(base, reports);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-generator building-footprint pipeline"};
  app.require_subcommand(1);

  CommonOpts prep_c, train_c, eval_c, pred_c, comp_c, pipe_c;
  int prep_synth = 0, pipe_synth = 8;
  int train_epochs = 0, pipe_epochs = 0;
  bool train_smoke = false;
  std::string eval_split = "test", pred_input;
  std::vector<std::string> comp_reports;

  CLI::App* prepare = app.add_subcommand("prepare", "trim, tile, and downscale sources into a dataset");
  prep_c.attach(prepare);
  prepare->add_option("--synthetic", prep_synth, "synthesize N fixture sources instead of reading real ones");

  CLI::App* train = app.add_subcommand("train", "train the selected model on the prepared dataset");
  train_c.attach(train);
  train->add_option("--epochs-per-phase", train_epochs, "override every phase length (smoke/debug)");
  train->add_flag("--synthetic-smoke", train_smoke,
                  "train on a tiny in-place synthetic dataset (shapes stay at 256x256)");

  CLI::App* evaluate = app.add_subcommand("evaluate", "metrics + triptych figures for one split");
  eval_c.attach(evaluate);
  evaluate->add_option("--split", eval_split, "train | val | test");

  CLI::App* predict_cmd = app.add_subcommand("predict", "run one satellite tile through the model");
  pred_c.attach(predict_cmd);
  predict_cmd->add_option("--input", pred_input, "satellite tile PNG")->required();

  CLI::App* compare = app.add_subcommand("compare", "side-by-side metric table from metrics.csv files");
  comp_c.attach(compare);
  compare->add_option("reports", comp_reports, "two or more metrics.csv files")->expected(2, -1);

  CLI::App* pipeline = app.add_subcommand("pipeline", "prepare + train + evaluate + compare, end to end");
  pipe_c.attach(pipeline);
  pipeline->add_option("--synthetic", pipe_synth, "fixture source count for the pipeline dataset");
  pipeline->add_option("--epochs-per-phase", pipe_epochs, "override every phase length");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (prepare->parsed()) run_prepare(prep_c.resolve(), prep_synth);
    else if (train->parsed()) run_train(train_c.resolve(), train_epochs, train_smoke);
    else if (evaluate->parsed()) run_evaluate(eval_c.resolve(), eval_split);
    else if (predict_cmd->parsed()) run_predict(pred_c.resolve(), pred_input);
    else if (compare->parsed()) run_compare(comp_c.resolve(), comp_reports);
    else if (pipeline->parsed()) run_pipeline(pipe_c.resolve(), pipe_synth, pipe_epochs);
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const PairingError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const InvalidLabel& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const IoError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const InvalidArgument& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
