// Process-level checks of the command line tool: exit codes, file layout,
// and the printed contract lines. The binary under test is injected by the
// build as G2G_CLI_PATH.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "doctest.h"
#include "g2g/config.hpp"
#include "g2g/metrics.hpp"
#include "g2g/raster.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace g2g;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

CliResult run_cli(const std::vector<std::string>& args, const std::string& scratch) {
  std::string capture = scratch + "/cli_capture.txt";
  std::string cmd = std::string(G2G_CLI_PATH);
  for (const std::string& a : args) cmd += " '" + a + "'";
  cmd += " > '" + capture + "' 2>&1";
  int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = testsup::read_file(capture);
  return r;
}

int line_count(const std::string& path) {
  std::string text = testsup::read_file(path);
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

uint32_t png_width(const std::string& path) {
  std::string bytes = testsup::read_file(path);
  REQUIRE(bytes.size() > 24);
  // IHDR width: big-endian u32 at offset 16.
  return (static_cast<uint32_t>(static_cast<unsigned char>(bytes[16])) << 24) |
         (static_cast<uint32_t>(static_cast<unsigned char>(bytes[17])) << 16) |
         (static_cast<uint32_t>(static_cast<unsigned char>(bytes[18])) << 8) |
         static_cast<uint32_t>(static_cast<unsigned char>(bytes[19]));
}

const char* kTinyGrid =
    "source_side=259\n"
    "trimmed_side=256\n"
    "tile_side=128\n"
    "output_side=64\n"
    "grid_n=2\n"
    "train_count=2\n"
    "val_count=1\n"
    "test_count=1\n";

}  // namespace

TEST_CASE("usage errors exit with the configuration code") {
  testsup::TempDir tmp("cli");
  CHECK(run_cli({}, tmp.path()).exit_code == 2);
  CHECK(run_cli({"--help"}, tmp.path()).exit_code == 0);
  CHECK(run_cli({"prepare", "--definitely-not-a-flag"}, tmp.path()).exit_code == 2);
  CHECK(run_cli({"train", "--model", "bogus"}, tmp.path()).exit_code == 2);
}

TEST_CASE("synthetic prepare writes the promised tile counts") {
  testsup::TempDir tmp("cli");
  std::string cfg = tmp.path() + "/tiny.cfg";
  testsup::write_file(cfg, kTinyGrid);
  std::string data = tmp.path() + "/data";

  CliResult r = run_cli({"prepare", "--config", cfg, "--data-root", data, "--synthetic", "4",
                         "--seed", "7"},
                        tmp.path());
  CHECK(r.exit_code == 0);
  // 2x2 grid -> 4 tiles per source, and 4 sources split 2/1/1.
  CHECK(line_count(data + "/train/manifest.csv") == 9);
  CHECK(line_count(data + "/val/manifest.csv") == 5);
  CHECK(line_count(data + "/test/manifest.csv") == 5);
  CHECK(fs::exists(data + "/train/sat"));
  CHECK(fs::exists(data + "/train/gt"));
  CHECK(fs::exists(data + "/train/overlay"));

  // The echoed configuration is the canonical serialization: loading it back
  // and re-serializing reproduces the same bytes.
  std::string echoed = testsup::read_file(data + "/effective.cfg");
  CHECK(serialize_config(load_config_file(data + "/effective.cfg")) == echoed);
}

TEST_CASE("synthetic prepare with the default grid yields 36 tiles per source") {
  testsup::TempDir tmp("cli");
  std::string data = tmp.path() + "/data";
  CliResult r = run_cli({"prepare", "--synthetic", "4", "--seed", "7", "--data-root", data},
                        tmp.path());
  CHECK(r.exit_code == 0);
  // No explicit split for 4 sources -> 2/1/1; every source contributes 6x6 tiles.
  CHECK(line_count(data + "/train/manifest.csv") == 73);
  CHECK(line_count(data + "/val/manifest.csv") == 37);
  CHECK(line_count(data + "/test/manifest.csv") == 37);
}

TEST_CASE("zero-source dry run warns, exits clean, and quotes the loss figures") {
  testsup::TempDir tmp("cli");
  std::string data = tmp.path() + "/data";
  fs::create_directories(data);
  CliResult r = run_cli({"prepare", "--data-root", data}, tmp.path());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("16,361,273 vs 390,089") != std::string::npos);
  CHECK(r.output.find("warning") != std::string::npos);
  CHECK(line_count(data + "/train/manifest.csv") == 1);  // header only
}

TEST_CASE("train, evaluate, predict, and compare share one smoke workspace") {
  testsup::TempDir tmp("cli");
  std::string out = tmp.path() + "/out";

  // g2g smoke: one epoch per phase on the in-place synthetic set.
  CliResult g = run_cli({"train", "--model", "g2g", "--epochs-per-phase", "1",
                         "--synthetic-smoke", "--output-root", out, "--seed", "11"},
                        tmp.path());
  REQUIRE(g.exit_code == 0);
  std::string g2g_ckpt = out + "/train-g2g/checkpoints/ckpt_phase2_epoch1.bin";
  CHECK(fs::exists(out + "/train-g2g/checkpoints/ckpt_phase1_epoch1.bin"));
  CHECK(fs::exists(g2g_ckpt));
  CHECK(testsup::read_file(out + "/train-g2g/train.log").find("12x12 and 4x4") !=
        std::string::npos);

  // Baseline smoke: single phase, and the 30x30 critic map is asserted and
  // logged.
  CliResult p = run_cli({"train", "--model", "pix2pix", "--epochs-per-phase", "1",
                         "--synthetic-smoke", "--output-root", out, "--seed", "11"},
                        tmp.path());
  REQUIRE(p.exit_code == 0);
  CHECK(testsup::read_file(out + "/train-pix2pix/train.log").find("30x30") != std::string::npos);
  CHECK(fs::exists(out + "/train-pix2pix/checkpoints/ckpt_phase1_epoch1.bin"));
  CHECK_FALSE(fs::exists(out + "/train-pix2pix/checkpoints/ckpt_phase2_epoch1.bin"));
  // Baseline rows reuse the dual-model schema with the second stage zeroed.
  std::string base_log = testsup::read_file(out + "/train-pix2pix/loss_log.csv");
  CHECK(base_log.find(",0,0,0\n") != std::string::npos);

  // Same seed, fresh output root: the loss log reproduces byte for byte.
  std::string out2 = tmp.path() + "/out-rerun";
  CliResult p2 = run_cli({"train", "--model", "pix2pix", "--epochs-per-phase", "1",
                          "--synthetic-smoke", "--output-root", out2, "--seed", "11"},
                         tmp.path());
  REQUIRE(p2.exit_code == 0);
  CHECK(testsup::read_file(out2 + "/train-pix2pix/loss_log.csv") == base_log);

  // Evaluate the trained g2g weights on the smoke split it was trained on.
  std::string smoke_data = out + "/train-g2g/smoke-data";
  CliResult ev = run_cli({"evaluate", "--model", "g2g", "--checkpoint", g2g_ckpt, "--data-root",
                          smoke_data, "--split", "train", "--output-root", out, "--seed", "11"},
                         tmp.path());
  REQUIRE(ev.exit_code == 0);
  std::string metrics = testsup::read_file(out + "/eval-g2g-train/metrics.csv");
  CHECK(metrics.rfind("model,scope,pa,ma,miou,fwiou,iou_background,iou_building,dice_building,"
                      "pixels,images\n",
                      0) == 0);
  CHECK(metrics.find("g2g,macro,") != std::string::npos);
  CHECK(metrics.find("g2g,micro,") != std::string::npos);
  int figures = 0;
  for (const auto& e : fs::directory_iterator(out + "/eval-g2g-train/triptychs")) {
    CHECK(png_width(e.path().string()) == 3 * 256 + 2 * 4);
    ++figures;
  }
  CHECK(figures == 2);

  // Predict on one smoke tile.
  std::string tile = smoke_data + "/train/sat/img000_r0_c0.png";
  CliResult pr = run_cli({"predict", "--model", "g2g", "--checkpoint", g2g_ckpt, "--input", tile,
                          "--output-root", out, "--seed", "11"},
                         tmp.path());
  REQUIRE(pr.exit_code == 0);
  CHECK(fs::exists(out + "/predict/img000_r0_c0_localization.png"));
  CHECK(fs::exists(out + "/predict/img000_r0_c0_refined.png"));

  // Compare the real report against a stored baseline report.
  MetricsReport stored;
  stored.pa = 0.89;
  stored.ma = 0.74;
  stored.miou = 0.65;
  stored.fwiou = 0.82;
  std::string stored_csv = tmp.path() + "/pix2pix_metrics.csv";
  testsup::write_file(stored_csv, metrics_csv("pix2pix", stored, stored));

  std::string cmp1 = tmp.path() + "/cmp1", cmp2 = tmp.path() + "/cmp2";
  CliResult c1 = run_cli({"compare", "--output-root", cmp1,
                          out + "/eval-g2g-train/metrics.csv", stored_csv},
                         tmp.path());
  REQUIRE(c1.exit_code == 0);
  std::string table = testsup::read_file(cmp1 + "/compare/comparison.csv");
  CHECK(table.rfind("Metrics,g2g,pix2pix,Multi-task [11] (quoted)\n", 0) == 0);
  CHECK(table.find("Mean pixel accuracy,") != std::string::npos);
  CHECK(table.find(",0.95\n") != std::string::npos);
  CHECK(table.find(",-\n") != std::string::npos);
  CHECK(table.find("Mean IoU,") != std::string::npos);
  CHECK(table.find(",0.70\n") != std::string::npos);
  CHECK(line_count(cmp1 + "/compare/comparison.csv") == 5);

  // Byte-deterministic rendering across runs.
  CliResult c2 = run_cli({"compare", "--output-root", cmp2,
                          out + "/eval-g2g-train/metrics.csv", stored_csv},
                         tmp.path());
  REQUIRE(c2.exit_code == 0);
  CHECK(testsup::read_file(cmp2 + "/compare/comparison.csv") == table);
  CHECK(testsup::read_file(cmp2 + "/compare/comparison.txt") ==
        testsup::read_file(cmp1 + "/compare/comparison.txt"));

  // A held lock in the output directory refuses a second run.
  std::string locked = tmp.path() + "/locked";
  fs::create_directories(locked + "/compare");
  testsup::write_file(locked + "/compare/.lock", "1\n");
  CHECK(run_cli({"compare", "--output-root", locked,
                 out + "/eval-g2g-train/metrics.csv", stored_csv},
                tmp.path())
            .exit_code == 2);

  // Environment override for the output root, and the flag beating it.
  std::string env_root = tmp.path() + "/env-root", flag_root = tmp.path() + "/flag-root";
  setenv("G2G_OUTPUT_ROOT", env_root.c_str(), 1);
  CHECK(run_cli({"compare", out + "/eval-g2g-train/metrics.csv", stored_csv}, tmp.path())
            .exit_code == 0);
  CHECK(fs::exists(env_root + "/compare/comparison.csv"));
  CHECK(run_cli({"compare", "--output-root", flag_root,
                 out + "/eval-g2g-train/metrics.csv", stored_csv},
                tmp.path())
            .exit_code == 0);
  CHECK(fs::exists(flag_root + "/compare/comparison.csv"));
  unsetenv("G2G_OUTPUT_ROOT");
}

TEST_CASE("error classes map to distinct exit codes") {
  testsup::TempDir tmp("cli");

  // Missing report file -> data error.
  CliResult missing = run_cli({"compare", "--output-root", tmp.path() + "/o1",
                               tmp.path() + "/nope.csv", tmp.path() + "/nope2.csv"},
                              tmp.path());
  CHECK(missing.exit_code == 3);

  // Malformed report -> data error naming the file.
  std::string bad = tmp.path() + "/bad.csv";
  testsup::write_file(bad, "this is not a metrics report\n");
  CliResult malformed =
      run_cli({"compare", "--output-root", tmp.path() + "/o2", bad, bad}, tmp.path());
  CHECK(malformed.exit_code == 3);
  CHECK(malformed.output.find("bad.csv") != std::string::npos);

  // Unpaired source image -> data error naming the orphan.
  std::string data = tmp.path() + "/data";
  fs::create_directories(data + "/sources/sat");
  fs::create_directories(data + "/sources/gt");
  write_png(data + "/sources/sat/orphan.png", Raster(8, 8, 3, 0.5f));
  CliResult unpaired = run_cli({"prepare", "--data-root", data}, tmp.path());
  CHECK(unpaired.exit_code == 3);
  CHECK(unpaired.output.find("orphan.png") != std::string::npos);

  // Training without a prepared dataset -> configuration error.
  CliResult no_manifest = run_cli({"train", "--model", "g2g", "--data-root",
                                   tmp.path() + "/absent", "--output-root", tmp.path() + "/o3"},
                                  tmp.path());
  CHECK(no_manifest.exit_code == 2);

  // A checkpoint that is not a checkpoint -> checkpoint error. The dataset
  // must exist so the failure is attributable to the weight file.
  std::string cfg = tmp.path() + "/tiny.cfg";
  testsup::write_file(cfg, kTinyGrid);
  std::string prepared = tmp.path() + "/prepared";
  REQUIRE(run_cli({"prepare", "--config", cfg, "--data-root", prepared, "--synthetic", "4",
                   "--seed", "7"},
                  tmp.path())
              .exit_code == 0);
  std::string junk = tmp.path() + "/junk.bin";
  testsup::write_file(junk, "not a checkpoint");
  CliResult badckpt = run_cli({"evaluate", "--model", "g2g", "--checkpoint", junk, "--data-root",
                               prepared, "--split", "test", "--output-root", tmp.path() + "/o4"},
                              tmp.path());
  CHECK(badckpt.exit_code == 4);
}

TEST_CASE("pipeline runs prepare, both trainings, evaluation, and compare") {
  testsup::TempDir tmp("cli");
  std::string cfg = tmp.path() + "/pipe.cfg";
  testsup::write_file(cfg,
                      "source_side=259\n"
                      "trimmed_side=256\n"
                      "tile_side=256\n"
                      "output_side=256\n"
                      "grid_n=1\n"
                      "train_count=6\n"
                      "val_count=1\n"
                      "test_count=1\n"
                      "seed=21\n");
  std::string data = tmp.path() + "/data", out = tmp.path() + "/out";

  CliResult r = run_cli({"pipeline", "--config", cfg, "--data-root", data, "--output-root", out,
                         "--synthetic", "8", "--epochs-per-phase", "1"},
                        tmp.path());
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("[6/6] compare") != std::string::npos);

  CHECK(fs::exists(out + "/train-g2g/checkpoints/ckpt_phase2_epoch1.bin"));
  CHECK(fs::exists(out + "/train-pix2pix/checkpoints/ckpt_phase1_epoch1.bin"));
  CHECK(fs::exists(out + "/eval-g2g-test/metrics.csv"));
  CHECK(fs::exists(out + "/eval-pix2pix-test/metrics.csv"));
  std::string table = testsup::read_file(out + "/compare/comparison.csv");
  CHECK(table.rfind("Metrics,g2g,pix2pix,Multi-task [11] (quoted)\n", 0) == 0);
  CHECK(line_count(out + "/compare/comparison.csv") == 5);
}
