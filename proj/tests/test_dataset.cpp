#include <set>

#include "doctest.h"
#include "g2g/dataset.hpp"
#include "g2g/errors.hpp"
#include "test_support.hpp"

using namespace g2g;

namespace {

int count_label(const Raster& mask, int label) {
  int n = 0;
  for (float v : mask.values)
    if (static_cast<int>(v) == label) ++n;
  return n;
}

}  // namespace

TEST_CASE("contours trace the inside of the building boundary") {
  // 6x6 building centered in 10x10 background.
  Raster gt(10, 10, 1, 0.f);
  for (int y = 2; y < 8; ++y)
    for (int x = 2; x < 8; ++x) gt.at(x, y, 0) = 1.f;

  Raster ring = extract_contours(gt, 1);
  CHECK(count_label(ring, 1) == 20);  // perimeter of a 6x6 block
  CHECK(ring.at(2, 2, 0) == 1.f);
  CHECK(ring.at(4, 4, 0) == 0.f);  // interior untouched

  Raster band = extract_contours(gt, 2);
  CHECK(count_label(band, 1) == 32);  // 6x6 minus the 2x2 core
  CHECK(band.at(3, 3, 0) == 1.f);
  CHECK(band.at(4, 4, 0) == 0.f);

  // The band never leaves the building set.
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x)
      if (band.at(x, y, 0) == 1.f) CHECK(gt.at(x, y, 0) == 1.f);
}

TEST_CASE("the image border acts as background for contour purposes") {
  Raster gt(6, 6, 1, 0.f);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) gt.at(x, y, 0) = 1.f;

  Raster ring = extract_contours(gt, 1);
  CHECK(ring.at(0, 0, 0) == 1.f);  // corner pixel borders the frame
  CHECK(ring.at(1, 1, 0) == 0.f);  // fully surrounded by building

  CHECK_THROWS_AS(extract_contours(gt, 0), InvalidArgument);
  Raster not_binary(4, 4, 1, 0.5f);
  CHECK_THROWS_AS(extract_contours(not_binary, 1), InvalidLabel);
}

TEST_CASE("overlay layers contour over building over background") {
  Raster gt = testsup::mask_from(3, 1, "011");
  Raster contours = testsup::mask_from(3, 1, "001");
  Raster overlay = overlay_contours(gt, contours);
  CHECK(overlay.at(0, 0, 0) == 0.f);
  CHECK(overlay.at(1, 0, 0) == 1.f);
  CHECK(overlay.at(2, 0, 0) == 2.f);
  CHECK_THROWS_AS(overlay_contours(gt, testsup::mask_from(2, 1, "01")), InvalidArgument);
}

TEST_CASE("mask rendering and parsing round trip through png") {
  testsup::TempDir dir("masks");
  MaskEncoding enc;

  Raster overlay = testsup::mask_from(4, 2, "0120" "2101");
  write_png(dir.file("ov.png"), render_overlay(overlay, enc));
  Raster parsed = parse_overlay(read_png(dir.file("ov.png")), enc);
  CHECK(parsed.values == overlay.values);

  Raster gt = testsup::mask_from(4, 2, "0110" "1001");
  write_png(dir.file("gt.png"), render_gt(gt));
  Raster gt_back = parse_gt(read_png(dir.file("gt.png")));
  CHECK(gt_back.values == gt.values);

  // Noisy colors still map to the nearest palette entry.
  Raster noisy(1, 1, 3);
  noisy.at(0, 0, 0) = 0.9f;
  noisy.at(0, 0, 1) = 0.1f;
  noisy.at(0, 0, 2) = 0.05f;
  CHECK(parse_overlay(noisy, enc).at(0, 0, 0) == 2.f);
  CHECK_THROWS_AS(parse_overlay(Raster(2, 2, 1), enc), InvalidArgument);
}

TEST_CASE("manifest csv round trips and rejects malformed input") {
  DatasetManifest m;
  m.split = Split::Val;
  ManifestEntry e;
  e.sat_path = "val/sat/a_r0_c1.png";
  e.gt_path = "val/gt/a_r0_c1.png";
  e.overlay_path = "val/overlay/a_r0_c1.png";
  e.source_id = "a";
  e.row = 0;
  e.col = 1;
  m.entries.push_back(e);

  DatasetManifest back = manifest_from_csv(Split::Val, manifest_to_csv(m), "mem");
  REQUIRE(back.entries.size() == 1);
  CHECK(back.entries[0].sat_path == e.sat_path);
  CHECK(back.entries[0].source_id == "a");
  CHECK(back.entries[0].col == 1);

  CHECK_THROWS_AS(manifest_from_csv(Split::Val, "bogus\n", "mem"), IoError);
  CHECK_THROWS_AS(manifest_from_csv(Split::Val, "sat,gt,overlay,source_id,row,col\nonly,two\n", "mem"), IoError);
}

TEST_CASE("manifest planning splits sources and enumerates tiles") {
  std::vector<std::string> ids;
  for (int i = 0; i < 234; ++i) ids.push_back("src" + std::to_string(i));
  TileGridSpec spec{4053, 4050, 675, 256, 6};

  ManifestPlan plan = plan_manifest(ids, spec, {191, 21, 22}, 17);
  CHECK(plan.manifests[Split::Train].entries.size() == 6876);
  CHECK(plan.manifests[Split::Val].entries.size() == 756);
  CHECK(plan.manifests[Split::Test].entries.size() == 792);
  CHECK(plan.sources[Split::Train].size() == 191);
  CHECK(plan.sources[Split::Val].size() == 21);
  CHECK(plan.sources[Split::Test].size() == 22);

  // The three slices partition the inputs.
  std::set<std::string> seen;
  for (Split s : {Split::Train, Split::Val, Split::Test})
    for (const auto& id : plan.sources[s]) CHECK(seen.insert(id).second);
  CHECK(seen.size() == ids.size());

  // Stable under the same seed, permuted under another.
  ManifestPlan again = plan_manifest(ids, spec, {191, 21, 22}, 17);
  CHECK(again.sources[Split::Train] == plan.sources[Split::Train]);
  ManifestPlan other = plan_manifest(ids, spec, {191, 21, 22}, 18);
  CHECK(other.sources[Split::Train] != plan.sources[Split::Train]);

  const ManifestEntry& first = plan.manifests[Split::Train].entries[0];
  CHECK(first.sat_path == "train/sat/" + tile_name(first.source_id, 0, 0));
  CHECK(first.overlay_path == "train/overlay/" + tile_name(first.source_id, 0, 0));

  CHECK_THROWS_AS(plan_manifest(ids, spec, {200, 21, 22}, 17), ConfigError);
  CHECK_THROWS_AS(plan_manifest(ids, spec, {-1, 213, 22}, 17), ConfigError);
}

TEST_CASE("fixture synthesis is deterministic and well-formed") {
  auto a = synthesize_fixture(2, 64, 5);
  auto b = synthesize_fixture(2, 64, 5);
  REQUIRE(a.size() == 2);
  CHECK(a[0].id == b[0].id);
  CHECK(a[0].satellite.values == b[0].satellite.values);
  CHECK(a[0].gt.values == b[0].gt.values);
  CHECK(a[0].satellite.values != a[1].satellite.values);

  for (const auto& src : a) {
    CHECK(src.satellite.channels == 3);
    CHECK(src.gt.channels == 1);
    for (float v : src.satellite.values) {
      CHECK(v >= 0.f);
      CHECK(v <= 1.f);
    }
    CHECK(count_label(src.gt, 1) > 0);
    CHECK(count_label(src.gt, 0) > 0);
    CHECK(count_label(src.gt, 0) + count_label(src.gt, 1) == 64 * 64);
  }

  auto c = synthesize_fixture(2, 64, 6);
  CHECK(c[0].satellite.values != a[0].satellite.values);
}

TEST_CASE("dataset build writes tiles, masks, and manifests") {
  testsup::TempDir dir("build");
  auto sources = write_fixture_sources(dir.file("src"), synthesize_fixture(2, 259, 3));
  REQUIRE(sources.size() == 2);

  BuildManifestOptions opt;
  opt.spec = TileGridSpec{259, 256, 128, 64, 2};
  opt.counts = {1, 1, 0};
  opt.seed = 9;
  opt.contour_width = 2;
  std::string root = dir.file("data");
  auto manifests = build_manifest(sources, root, opt);

  CHECK(manifests[Split::Train].entries.size() == 4);
  CHECK(manifests[Split::Val].entries.size() == 4);
  CHECK(manifests[Split::Test].entries.empty());

  // The on-disk manifest matches what build returned.
  DatasetManifest reread = manifest_from_csv(
      Split::Train, testsup::read_file(root + "/train/manifest.csv"), "manifest.csv");
  REQUIRE(reread.entries.size() == 4);
  CHECK(reread.entries[2].sat_path == manifests[Split::Train].entries[2].sat_path);

  bool has_contour = false;  // some tile of the source must carry a boundary
  for (const ManifestEntry& entry : reread.entries) {
    SampleTriple t = load_triple(root, entry, opt.encoding);
    CHECK(t.satellite.channels == 3);
    CHECK(t.satellite.width == 64);
    CHECK(t.gt_mask.width == 64);
    CHECK(t.overlay_mask.width == 64);
    for (float v : t.gt_mask.values) CHECK((v == 0.f || v == 1.f));
    for (float v : t.overlay_mask.values) {
      CHECK((v == 0.f || v == 1.f || v == 2.f));
      if (v == 2.f) has_contour = true;
    }
    // Overlay agrees with gt wherever there is no contour.
    for (size_t i = 0; i < t.gt_mask.values.size(); ++i)
      if (t.overlay_mask.values[i] != 2.f) CHECK(t.overlay_mask.values[i] == t.gt_mask.values[i]);
  }
  CHECK(has_contour);
}

TEST_CASE("mismatched pairs are refused by name") {
  testsup::TempDir dir("pairs");
  auto fx = synthesize_fixture(1, 64, 4);
  auto small = synthesize_fixture(1, 32, 4);
  write_png(dir.file("sat.png"), fx[0].satellite);
  write_png(dir.file("gt_small.png"), render_gt(small[0].gt));
  write_png(dir.file("gt.png"), render_gt(fx[0].gt));

  BuildManifestOptions opt;
  opt.spec = TileGridSpec{64, 64, 32, 32, 2};
  opt.counts = {1, 0, 0};

  std::vector<SourcePair> mismatched{{"a", dir.file("sat.png"), dir.file("gt_small.png")}};
  CHECK_THROWS_WITH_AS(build_manifest(mismatched, dir.file("d1"), opt),
                       doctest::Contains("gt_small.png"), PairingError);

  // Source size disagreeing with the spec is also a pairing defect.
  BuildManifestOptions wrong = opt;
  wrong.spec = TileGridSpec{128, 128, 64, 64, 2};
  std::vector<SourcePair> ok{{"a", dir.file("sat.png"), dir.file("gt.png")}};
  CHECK_THROWS_AS(build_manifest(ok, dir.file("d2"), wrong), PairingError);
}
