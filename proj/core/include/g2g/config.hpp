#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "g2g/dataset.hpp"
#include "g2g/raster.hpp"
#include "g2g/training.hpp"

namespace g2g {

// Everything a run needs, as a flat key=value document. Serialization is
// canonical (fixed key order, shortest-round-trip numbers) so
// parse -> serialize -> parse is the identity.
struct RunConfig {
  std::string data_root = "data";
  std::string output_root = "out";
  std::string checkpoint;  // optional: resume/load path
  std::string model = "g2g";  // g2g | pix2pix

  uint64_t seed = 17;

  TileGridSpec grid{4053, 4050, 675, 256, 6};
  int train_count = 191;
  int val_count = 21;
  int test_count = 22;
  int contour_width = 2;

  ObjectiveConfig objective;

  int phase1_epochs = 200;
  double phase1_lr = 1e-3;
  int phase2_epochs = 200;
  double phase2_lr = 1e-6;
  int baseline_epochs = 200;
  double baseline_lr = 2e-4;

  int checkpoint_every = 25;
  int log_every = 1;

  std::vector<PhasePlan> phase_plan() const;     // two-phase schedule from the fields above
  std::vector<PhasePlan> baseline_plan() const;  // single phase at the baseline rate
  SplitCounts split_counts() const;
};

RunConfig parse_config(const std::string& text, const std::string& file_hint);
RunConfig load_config_file(const std::string& path);
std::string serialize_config(const RunConfig& cfg);

}  // namespace g2g
