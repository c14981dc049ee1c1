#include "g2g/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "g2g/errors.hpp"

namespace fs = std::filesystem;

namespace g2g {

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

std::string manifest_to_csv(const DatasetManifest& m) {
  std::string out = "sat,gt,overlay,source_id,row,col\n";
  for (const auto& e : m.entries) {
    out += e.sat_path + "," + e.gt_path + "," + e.overlay_path + "," + e.source_id + "," +
           std::to_string(e.row) + "," + std::to_string(e.col) + "\n";
  }
  return out;
}

DatasetManifest manifest_from_csv(Split split, const std::string& text, const std::string& file_hint) {
  DatasetManifest m;
  m.split = split;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      if (line != "sat,gt,overlay,source_id,row,col")
        throw IoError(file_hint + ": unexpected manifest header");
      header = false;
      continue;
    }
    std::vector<std::string> f;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        f.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    f.push_back(cur);
    if (f.size() != 6) throw IoError(file_hint + ": malformed manifest row: " + line);
    ManifestEntry e;
    e.sat_path = f[0];
    e.gt_path = f[1];
    e.overlay_path = f[2];
    e.source_id = f[3];
    e.row = std::stoi(f[4]);
    e.col = std::stoi(f[5]);
    m.entries.push_back(std::move(e));
  }
  return m;
}

namespace {

void require_binary(const Raster& mask, const char* who) {
  if (mask.channels != 1) throw InvalidLabel(std::string(who) + ": mask must be single channel");
  for (float v : mask.values) {
    int lab = static_cast<int>(std::lround(v));
    if ((lab != 0 && lab != 1) || std::fabs(v - lab) > 1e-4f)
      throw InvalidLabel(std::string(who) + ": mask is not binary {0,1}");
  }
}

}  // namespace

Raster extract_contours(const Raster& gt_mask, int width) {
  require_binary(gt_mask, "extract_contours");
  if (width < 1) throw InvalidArgument("contour width must be >= 1");

  const int w = gt_mask.width, h = gt_mask.height;
  auto is_building = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return false;  // implicit background frame
    return std::lround(gt_mask.at(x, y, 0)) == 1;
  };

  Raster band(w, h, 1, 0.f);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!is_building(x, y)) continue;
      bool boundary = false;
      for (int dy = -1; dy <= 1 && !boundary; ++dy)
        for (int dx = -1; dx <= 1 && !boundary; ++dx) {
          if (dx == 0 && dy == 0) continue;
          if (!is_building(x + dx, y + dy)) boundary = true;
        }
      if (boundary) band.at(x, y, 0) = 1.f;
    }

  // Widen inward: dilate the band but never leave the building set.
  for (int step = 1; step < width; ++step) {
    Raster next = band;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (band.at(x, y, 0) > 0.5f || !is_building(x, y)) continue;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            if (band.at(nx, ny, 0) > 0.5f) {
              next.at(x, y, 0) = 1.f;
              dy = 2;
              break;
            }
          }
      }
    band = std::move(next);
  }
  return band;
}

Raster overlay_contours(const Raster& gt_mask, const Raster& contours) {
  if (!gt_mask.same_shape(contours))
    throw InvalidArgument("overlay_contours: dimension mismatch");
  require_binary(gt_mask, "overlay_contours(gt)");
  require_binary(contours, "overlay_contours(contours)");

  Raster out(gt_mask.width, gt_mask.height, 1);
  for (size_t i = 0; i < out.values.size(); ++i) {
    if (contours.values[i] > 0.5f)
      out.values[i] = 2.f;
    else
      out.values[i] = gt_mask.values[i] > 0.5f ? 1.f : 0.f;
  }
  return out;
}

Raster render_gt(const Raster& gt_mask) {
  Raster out(gt_mask.width, gt_mask.height, 1);
  for (size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = gt_mask.values[i] > 0.5f ? 1.f : 0.f;
  return out;
}

Raster render_overlay(const Raster& overlay_mask, const MaskEncoding& enc) {
  Raster out(overlay_mask.width, overlay_mask.height, 3);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      int lab = static_cast<int>(std::lround(overlay_mask.at(x, y, 0)));
      const std::array<float, 3>& rgb = lab == MaskEncoding::kContour    ? enc.contour_rgb
                                        : lab == MaskEncoding::kBuilding ? enc.building_rgb
                                                                         : enc.background_rgb;
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = rgb[static_cast<size_t>(c)];
    }
  return out;
}

Raster parse_gt(const Raster& img) {
  if (img.channels != 1 && img.channels != 3)
    throw InvalidArgument("parse_gt: expected 1 or 3 channels");
  Raster out(img.width, img.height, 1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      float v = 0;
      for (int c = 0; c < img.channels; ++c) v += img.at(x, y, c);
      out.at(x, y, 0) = v / img.channels > 0.5f ? 1.f : 0.f;
    }
  return out;
}

Raster parse_overlay(const Raster& img, const MaskEncoding& enc) {
  if (img.channels != 3) throw InvalidArgument("parse_overlay: expected 3 channels");
  const std::array<float, 3>* pal[3] = {&enc.background_rgb, &enc.building_rgb, &enc.contour_rgb};
  Raster out(img.width, img.height, 1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double best_d = 0;
      int best = 0;
      for (int lab = 0; lab < 3; ++lab) {
        double d = 0;
        for (int c = 0; c < 3; ++c) {
          double diff = img.at(x, y, c) - (*pal[lab])[static_cast<size_t>(c)];
          d += diff * diff;
        }
        if (lab == 0 || d < best_d) {
          best_d = d;
          best = lab;
        }
      }
      out.at(x, y, 0) = static_cast<float>(best);
    }
  return out;
}

namespace {

// Explicit Fisher-Yates with an explicit bounded draw, so manifests do not
// depend on library-specific distribution internals.
void seeded_shuffle(std::vector<std::string>& v, uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (size_t i = v.size(); i > 1; --i) {
    uint64_t j = rng() % i;
    std::swap(v[i - 1], v[static_cast<size_t>(j)]);
  }
}

}  // namespace

ManifestPlan plan_manifest(const std::vector<std::string>& source_ids, const TileGridSpec& spec,
                           const SplitCounts& counts, uint64_t seed) {
  spec.validate();
  if (counts.train < 0 || counts.val < 0 || counts.test < 0)
    throw ConfigError("split counts must be non-negative");
  const size_t want = static_cast<size_t>(counts.train) + counts.val + counts.test;
  if (want != source_ids.size())
    throw ConfigError("split counts (" + std::to_string(want) + ") must partition the " +
                      std::to_string(source_ids.size()) + " source images");

  std::vector<std::string> order = source_ids;
  seeded_shuffle(order, seed);

  ManifestPlan plan;
  auto take = [&](Split s, size_t begin, size_t n) {
    DatasetManifest m;
    m.split = s;
    for (size_t k = 0; k < n; ++k) {
      const std::string& id = order[begin + k];
      plan.sources[s].push_back(id);
      for (int row = 0; row < spec.grid_n; ++row)
        for (int col = 0; col < spec.grid_n; ++col) {
          ManifestEntry e;
          std::string name = tile_name(id, row, col);
          std::string base = std::string(split_name(s)) + "/";
          e.sat_path = base + "sat/" + name;
          e.gt_path = base + "gt/" + name;
          e.overlay_path = base + "overlay/" + name;
          e.source_id = id;
          e.row = row;
          e.col = col;
          m.entries.push_back(std::move(e));
        }
    }
    plan.manifests[s] = std::move(m);
  };
  take(Split::Train, 0, static_cast<size_t>(counts.train));
  take(Split::Val, static_cast<size_t>(counts.train), static_cast<size_t>(counts.val));
  take(Split::Test, static_cast<size_t>(counts.train) + counts.val, static_cast<size_t>(counts.test));
  return plan;
}

namespace {

void write_text_atomic(const std::string& path, const std::string& text) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot create " + tmp);
    out << text;
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp + " to " + path);
}

}  // namespace

std::map<Split, DatasetManifest> build_manifest(const std::vector<SourcePair>& sources,
                                                const std::string& data_root,
                                                const BuildManifestOptions& opt) {
  opt.spec.validate();

  std::vector<std::string> ids;
  for (const auto& s : sources) ids.push_back(s.id);
  ManifestPlan plan = plan_manifest(ids, opt.spec, opt.counts, opt.seed);

  std::map<std::string, const SourcePair*> by_id;
  for (const auto& s : sources) by_id[s.id] = &s;

  std::map<std::string, Split> split_of;
  for (const auto& [split, list] : plan.sources)
    for (const auto& id : list) split_of[id] = split;

  for (Split s : {Split::Train, Split::Val, Split::Test}) {
    for (const char* sub : {"sat", "gt", "overlay"})
      fs::create_directories(fs::path(data_root) / split_name(s) / sub);
  }

  for (const auto& src : sources) {
    Raster sat = read_png(src.satellite_path);
    Raster gt_img = read_png(src.gt_path);
    if (sat.channels != 3)
      throw PairingError(src.satellite_path + ": satellite image must have 3 channels");
    if (sat.width != gt_img.width || sat.height != gt_img.height)
      throw PairingError(src.gt_path + ": ground truth size does not match " + src.satellite_path);
    if (sat.width != opt.spec.source_side || sat.height != opt.spec.source_side)
      throw PairingError(src.satellite_path + ": size does not match spec source side " +
                         std::to_string(opt.spec.source_side));
    Raster gt = parse_gt(gt_img);

    Raster sat_t = center_trim(sat, opt.spec.trimmed_side);
    Raster gt_t = center_trim(gt, opt.spec.trimmed_side);
    std::vector<Tile> sat_tiles = crop_grid(sat_t, opt.spec);
    std::vector<Tile> gt_tiles = crop_grid(gt_t, opt.spec);

    Split s = split_of.at(src.id);
    fs::path root = fs::path(data_root) / split_name(s);
    for (size_t i = 0; i < sat_tiles.size(); ++i) {
      const Tile& st = sat_tiles[i];
      const Tile& gtile = gt_tiles[i];
      Raster sat_out = resize(st.raster, opt.spec.output_side, opt.spec.output_side);
      Raster gt_out = resize_labels(gtile.raster, opt.spec.output_side, opt.spec.output_side);
      Raster contours = extract_contours(gt_out, opt.contour_width);
      Raster overlay = overlay_contours(gt_out, contours);

      std::string name = tile_name(src.id, st.row, st.col);
      write_png((root / "sat" / name).string(), sat_out);
      write_png((root / "gt" / name).string(), render_gt(gt_out));
      write_png((root / "overlay" / name).string(), render_overlay(overlay, opt.encoding));
    }
  }

  for (auto& [split, manifest] : plan.manifests) {
    fs::path p = fs::path(data_root) / split_name(split) / "manifest.csv";
    write_text_atomic(p.string(), manifest_to_csv(manifest));
  }
  return plan.manifests;
}

SampleTriple load_triple(const std::string& data_root, const ManifestEntry& e, const MaskEncoding& enc) {
  SampleTriple t;
  t.satellite = read_png((fs::path(data_root) / e.sat_path).string());
  t.gt_mask = parse_gt(read_png((fs::path(data_root) / e.gt_path).string()));
  t.overlay_mask = parse_overlay(read_png((fs::path(data_root) / e.overlay_path).string()), enc);
  t.source_id = e.source_id;
  t.row = e.row;
  t.col = e.col;
  if (t.satellite.width != t.gt_mask.width || t.satellite.height != t.gt_mask.height ||
      t.gt_mask.width != t.overlay_mask.width || t.gt_mask.height != t.overlay_mask.height)
    throw PairingError(e.sat_path + ": tile sizes disagree within triple");
  return t;
}

}  // namespace g2g
