#include "g2g/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>

#include "g2g/errors.hpp"

namespace g2g {

Raster::Raster(int w, int h, int c, float fill)
    : width(w), height(h), channels(c), values(static_cast<size_t>(w) * h * c, fill) {
  if (w <= 0 || h <= 0 || c <= 0)
    throw InvalidArgument("raster dimensions must be positive");
}

void TileGridSpec::validate() const {
  if (source_side <= 0 || trimmed_side <= 0 || tile_side <= 0 || output_side <= 0 || grid_n <= 0)
    throw InvalidArgument("tile grid spec fields must be positive");
  if (trimmed_side > source_side)
    throw InvalidArgument("trimmed side exceeds source side");
  if (static_cast<long long>(grid_n) * tile_side != trimmed_side)
    throw InvalidArgument("trimmed side must equal grid_n * tile_side");
  if (output_side > tile_side)
    throw InvalidArgument("output side exceeds tile side");
}

namespace {

// Overlap of output pixel oi (at scale factor) with source pixel range;
// weights along one axis, as (first source index, per-index weights).
struct AxisSpan {
  int first;
  std::vector<double> w;
};

AxisSpan axis_span(int oi, int src_n, int dst_n) {
  const double scale = static_cast<double>(src_n) / dst_n;
  double lo = oi * scale;
  double hi = (oi + 1) * scale;
  int ilo = static_cast<int>(std::floor(lo));
  int ihi = static_cast<int>(std::ceil(hi));
  ihi = std::min(ihi, src_n);
  AxisSpan s;
  s.first = ilo;
  s.w.resize(static_cast<size_t>(ihi - ilo));
  for (int i = ilo; i < ihi; ++i) {
    double a = std::max(lo, static_cast<double>(i));
    double b = std::min(hi, static_cast<double>(i + 1));
    s.w[static_cast<size_t>(i - ilo)] = std::max(0.0, b - a);
  }
  return s;
}

}  // namespace

Raster resize(const Raster& r, int target_w, int target_h) {
  if (target_w <= 0 || target_h <= 0)
    throw InvalidArgument("resize target must be positive");
  if (target_w == r.width && target_h == r.height) return r;

  Raster out(target_w, target_h, r.channels);
  std::vector<AxisSpan> cols(static_cast<size_t>(target_w));
  for (int x = 0; x < target_w; ++x) cols[static_cast<size_t>(x)] = axis_span(x, r.width, target_w);

  const double area = (static_cast<double>(r.width) / target_w) * (static_cast<double>(r.height) / target_h);
  for (int y = 0; y < target_h; ++y) {
    AxisSpan rows = axis_span(y, r.height, target_h);
    for (int x = 0; x < target_w; ++x) {
      const AxisSpan& cs = cols[static_cast<size_t>(x)];
      for (int c = 0; c < r.channels; ++c) {
        double acc = 0.0;
        for (size_t ry = 0; ry < rows.w.size(); ++ry)
          for (size_t cx = 0; cx < cs.w.size(); ++cx)
            acc += rows.w[ry] * cs.w[cx] * r.at(cs.first + static_cast<int>(cx), rows.first + static_cast<int>(ry), c);
        out.at(x, y, c) = static_cast<float>(acc / area);
      }
    }
  }
  return out;
}

Raster resize_labels(const Raster& r, int target_w, int target_h) {
  if (target_w <= 0 || target_h <= 0)
    throw InvalidArgument("resize target must be positive");
  if (r.channels != 1)
    throw InvalidArgument("label resize expects a single-channel raster");
  if (target_w == r.width && target_h == r.height) return r;

  Raster out(target_w, target_h, 1);
  std::vector<AxisSpan> cols(static_cast<size_t>(target_w));
  for (int x = 0; x < target_w; ++x) cols[static_cast<size_t>(x)] = axis_span(x, r.width, target_w);

  for (int y = 0; y < target_h; ++y) {
    AxisSpan rows = axis_span(y, r.height, target_h);
    for (int x = 0; x < target_w; ++x) {
      const AxisSpan& cs = cols[static_cast<size_t>(x)];
      // Area-weighted vote per label; ties resolved toward the smaller label.
      std::map<int, double> vote;
      for (size_t ry = 0; ry < rows.w.size(); ++ry)
        for (size_t cx = 0; cx < cs.w.size(); ++cx) {
          int lab = static_cast<int>(std::lround(r.at(cs.first + static_cast<int>(cx), rows.first + static_cast<int>(ry), 0)));
          vote[lab] += rows.w[ry] * cs.w[cx];
        }
      int best = 0;
      double best_w = -1.0;
      for (const auto& [lab, w] : vote) {
        if (w > best_w + 1e-12) {
          best = lab;
          best_w = w;
        }
      }
      out.at(x, y, 0) = static_cast<float>(best);
    }
  }
  return out;
}

std::pair<int, int> center_trim_offsets(int source_side, int target_side) {
  int margin = source_side - target_side;
  int lead = margin / 2;
  return {lead, lead};
}

Raster center_trim(const Raster& r, int target_side) {
  if (target_side <= 0) throw InvalidArgument("trim target must be positive");
  if (target_side > r.width || target_side > r.height)
    throw InvalidArgument("trim target larger than source");
  if (target_side == r.width && target_side == r.height) return r;

  int top = center_trim_offsets(r.height, target_side).first;
  int left = center_trim_offsets(r.width, target_side).first;
  Raster out(target_side, target_side, r.channels);
  const size_t row_bytes = static_cast<size_t>(target_side) * r.channels * sizeof(float);
  for (int y = 0; y < target_side; ++y) {
    const float* src = &r.values[((static_cast<size_t>(y) + top) * r.width + left) * r.channels];
    std::memcpy(&out.values[static_cast<size_t>(y) * target_side * r.channels], src, row_bytes);
  }
  return out;
}

std::vector<Tile> crop_grid(const Raster& r, const TileGridSpec& spec) {
  spec.validate();
  if (r.width != spec.trimmed_side || r.height != spec.trimmed_side)
    throw InvalidArgument("crop_grid input must match the trimmed side of the spec");

  std::vector<Tile> tiles;
  tiles.reserve(static_cast<size_t>(spec.grid_n) * spec.grid_n);
  const int ts = spec.tile_side;
  for (int row = 0; row < spec.grid_n; ++row) {
    for (int col = 0; col < spec.grid_n; ++col) {
      Tile t;
      t.row = row;
      t.col = col;
      t.raster = Raster(ts, ts, r.channels);
      const size_t row_bytes = static_cast<size_t>(ts) * r.channels * sizeof(float);
      for (int y = 0; y < ts; ++y) {
        const float* src = &r.values[((static_cast<size_t>(row) * ts + y) * r.width + static_cast<size_t>(col) * ts) * r.channels];
        std::memcpy(&t.raster.values[static_cast<size_t>(y) * ts * r.channels], src, row_bytes);
      }
      tiles.push_back(std::move(t));
    }
  }
  return tiles;
}

PixelLossReport pixel_loss_report(const TileGridSpec& spec) {
  spec.validate();
  auto sq = [](long long v) { return v * v; };
  PixelLossReport rep;
  rep.direct_loss = sq(spec.source_side) - sq(spec.output_side);
  rep.strategy_loss_per_tile = sq(spec.tile_side) - sq(spec.output_side);
  rep.trim_loss = sq(spec.source_side) - sq(spec.trimmed_side);
  return rep;
}

std::string tile_name(const std::string& source_id, int row, int col) {
  return source_id + "_r" + std::to_string(row) + "_c" + std::to_string(col) + ".png";
}

}  // namespace g2g
