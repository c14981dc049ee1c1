#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "g2g/dataset.hpp"
#include "g2g/errors.hpp"

namespace fs = std::filesystem;

namespace g2g {

namespace {

uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Stationary value noise keyed on lattice position, so the texture is a pure
// function of (seed, x, y) regardless of evaluation order.
float lattice_noise(uint64_t seed, int x, int y) {
  uint64_t h = mix64(seed ^ (static_cast<uint64_t>(static_cast<uint32_t>(x)) << 32 |
                             static_cast<uint32_t>(y)));
  return static_cast<float>(h >> 40) / static_cast<float>(1 << 24);
}

// Bilinear interpolation over the noise lattice at the given cell size.
float smooth_noise(uint64_t seed, int x, int y, int cell) {
  int gx = x / cell, gy = y / cell;
  float fx = static_cast<float>(x % cell) / cell;
  float fy = static_cast<float>(y % cell) / cell;
  float n00 = lattice_noise(seed, gx, gy);
  float n10 = lattice_noise(seed, gx + 1, gy);
  float n01 = lattice_noise(seed, gx, gy + 1);
  float n11 = lattice_noise(seed, gx + 1, gy + 1);
  float a = n00 + (n10 - n00) * fx;
  float b = n01 + (n11 - n01) * fx;
  return a + (b - a) * fy;
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive bounds
  return lo + static_cast<int>(uniform01(rng) * (hi - lo + 1));
}

struct Rect {
  double cx, cy;      // center
  double hw, hh;      // half extents
  double cs, sn;      // rotation cos/sin
  bool contains(double x, double y) const {
    double dx = x - cx, dy = y - cy;
    double u = dx * cs + dy * sn;
    double v = -dx * sn + dy * cs;
    return std::fabs(u) <= hw && std::fabs(v) <= hh;
  }
};

}  // namespace

std::vector<FixtureSource> synthesize_fixture(int n_sources, int side, uint64_t seed) {
  if (n_sources < 1) throw InvalidArgument("fixture needs at least one source");
  if (side < 32) throw InvalidArgument("fixture side must be >= 32");

  std::vector<FixtureSource> out;
  out.reserve(static_cast<size_t>(n_sources));
  for (int s = 0; s < n_sources; ++s) {
    std::mt19937_64 rng(mix64(seed ^ static_cast<uint64_t>(s + 1)));
    uint64_t tex_seed = rng();

    FixtureSource src;
    char idbuf[16];
    std::snprintf(idbuf, sizeof idbuf, "img%03d", s);
    src.id = idbuf;
    src.satellite = Raster(side, side, 3);
    src.gt = Raster(side, side, 1, 0.f);

    // A handful of footprints, kept inside a margin so trimming never clips
    // them to slivers; half extents >= 2 pixels guarantees area >= 9 after
    // any majority-vote downscale used by the tests.
    int n_rects = uniform_int(rng, 3, 6);
    std::vector<Rect> rects;
    int margin = side / 8;
    for (int r = 0; r < n_rects; ++r) {
      Rect box;
      box.cx = uniform_int(rng, margin, side - 1 - margin);
      box.cy = uniform_int(rng, margin, side - 1 - margin);
      box.hw = uniform_int(rng, side / 24 + 2, side / 8 + 2);
      box.hh = uniform_int(rng, side / 24 + 2, side / 8 + 2);
      double angle = (r % 2 == 0) ? 0.0 : uniform01(rng) * 0.7;
      box.cs = std::cos(angle);
      box.sn = std::sin(angle);
      rects.push_back(box);
    }

    int cell = std::max(4, side / 24);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        bool inside = false;
        for (const Rect& b : rects)
          if (b.contains(x, y)) {
            inside = true;
            break;
          }
        src.gt.at(x, y, 0) = inside ? 1.f : 0.f;

        float base = smooth_noise(tex_seed, x, y, cell);
        float fine = lattice_noise(tex_seed ^ 0x5151u, x, y);
        if (inside) {
          // Roof-like: bright, low texture, slightly warm.
          src.satellite.at(x, y, 0) = 0.68f + 0.22f * base + 0.05f * fine;
          src.satellite.at(x, y, 1) = 0.62f + 0.20f * base + 0.05f * fine;
          src.satellite.at(x, y, 2) = 0.58f + 0.18f * base + 0.05f * fine;
        } else {
          // Ground: darker, greener, more texture.
          src.satellite.at(x, y, 0) = 0.18f + 0.25f * base + 0.10f * fine;
          src.satellite.at(x, y, 1) = 0.30f + 0.30f * base + 0.10f * fine;
          src.satellite.at(x, y, 2) = 0.16f + 0.20f * base + 0.10f * fine;
        }
      }

    for (float& v : src.satellite.values) v = std::clamp(v, 0.f, 1.f);
    out.push_back(std::move(src));
  }
  return out;
}

std::vector<SourcePair> write_fixture_sources(const std::string& dir, const std::vector<FixtureSource>& sources) {
  fs::create_directories(fs::path(dir) / "sat");
  fs::create_directories(fs::path(dir) / "gt");
  std::vector<SourcePair> out;
  out.reserve(sources.size());
  for (const auto& s : sources) {
    SourcePair p;
    p.id = s.id;
    p.satellite_path = (fs::path(dir) / "sat" / (s.id + ".png")).string();
    p.gt_path = (fs::path(dir) / "gt" / (s.id + ".png")).string();
    write_png(p.satellite_path, s.satellite);
    write_png(p.gt_path, render_gt(s.gt));
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace g2g
