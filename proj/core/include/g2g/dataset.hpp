#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "g2g/raster.hpp"

namespace g2g {

// Label values and their on-disk rendering. Ground-truth masks use
// {background, building}; the boundary-overlay target adds the contour label.
struct MaskEncoding {
  static constexpr int kBackground = 0;
  static constexpr int kBuilding = 1;
  static constexpr int kContour = 2;

  std::array<float, 3> background_rgb{0.f, 0.f, 0.f};
  std::array<float, 3> building_rgb{1.f, 1.f, 1.f};
  std::array<float, 3> contour_rgb{1.f, 0.f, 0.f};
};

// Aligned satellite / ground-truth / boundary-overlay tile set.
struct SampleTriple {
  Raster satellite;     // 3ch, [0,1]
  Raster gt_mask;       // 1ch, labels {0,1}
  Raster overlay_mask;  // 1ch, labels {0,1,2}
  std::string source_id;
  int row = 0;
  int col = 0;
};

enum class Split { Train, Val, Test };
const char* split_name(Split s);

struct ManifestEntry {
  std::string sat_path;      // relative to the dataset root
  std::string gt_path;
  std::string overlay_path;
  std::string source_id;
  int row = 0;
  int col = 0;
};

struct DatasetManifest {
  Split split = Split::Train;
  std::vector<ManifestEntry> entries;
};

std::string manifest_to_csv(const DatasetManifest& m);
DatasetManifest manifest_from_csv(Split split, const std::string& text, const std::string& file_hint);

// Marks building pixels whose 8-neighborhood (or the image border) touches
// background, then widens the band inward so it stays inside the building.
// width >= 1; width 1 is the bare boundary ring.
Raster extract_contours(const Raster& gt_mask, int width = 2);

// Per pixel: contour wins over building wins over background.
Raster overlay_contours(const Raster& gt_mask, const Raster& contours);

// Mask rendering for disk: gt as grayscale 0/1 -> black/white, overlay as
// palette RGB. Parsers invert by exact nearest color.
Raster render_gt(const Raster& gt_mask);
Raster render_overlay(const Raster& overlay_mask, const MaskEncoding& enc);
Raster parse_gt(const Raster& img);
Raster parse_overlay(const Raster& img, const MaskEncoding& enc);

struct SourcePair {
  std::string id;
  std::string satellite_path;
  std::string gt_path;
};

struct SplitCounts {
  int train = 0;
  int val = 0;
  int test = 0;
};

// Split assignment and tile enumeration without touching pixels. Assignment
// is by source image: one seeded shuffle, then contiguous slices.
struct ManifestPlan {
  std::map<Split, std::vector<std::string>> sources;
  std::map<Split, DatasetManifest> manifests;
};

ManifestPlan plan_manifest(const std::vector<std::string>& source_ids, const TileGridSpec& spec,
                           const SplitCounts& counts, uint64_t seed);

struct BuildManifestOptions {
  TileGridSpec spec;
  SplitCounts counts;
  uint64_t seed = 0;
  int contour_width = 2;
  MaskEncoding encoding;
};

// Full pipeline: trim -> grid crop -> downscale -> contour overlay, writing
// tiles under <data_root>/<split>/{sat,gt,overlay}/ plus a manifest per split.
std::map<Split, DatasetManifest> build_manifest(const std::vector<SourcePair>& sources,
                                                const std::string& data_root,
                                                const BuildManifestOptions& opt);

SampleTriple load_triple(const std::string& data_root, const ManifestEntry& e, const MaskEncoding& enc);

// Deterministic synthetic scenes: textured background plus axis-aligned and
// rotated rectangles with correlated texture in the satellite channels and
// exact rectangles in the mask.
struct FixtureSource {
  std::string id;
  Raster satellite;
  Raster gt;
};

std::vector<FixtureSource> synthesize_fixture(int n_sources, int side, uint64_t seed);

// Writes fixture sources as PNG pairs under <dir>/{sat,gt}/ and returns the
// SourcePair list build_manifest consumes.
std::vector<SourcePair> write_fixture_sources(const std::string& dir, const std::vector<FixtureSource>& sources);

}  // namespace g2g
