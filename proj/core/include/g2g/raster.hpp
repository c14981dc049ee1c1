#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace g2g {

// In-memory image grid. Imagery values live in [0,1] (8-bit on disk);
// label masks reuse the same container with small integer values per pixel.
// Layout is row-major with interleaved channels.
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> values;

  Raster() = default;
  Raster(int w, int h, int c, float fill = 0.f);

  float& at(int x, int y, int c) { return values[(static_cast<size_t>(y) * width + x) * channels + c]; }
  float at(int x, int y, int c) const { return values[(static_cast<size_t>(y) * width + x) * channels + c]; }
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
  bool same_shape(const Raster& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

// Geometry of the source -> trimmed -> tiles -> network-size pipeline.
// The trimmed side must divide into grid_n x grid_n full tiles.
struct TileGridSpec {
  int source_side = 0;
  int trimmed_side = 0;
  int tile_side = 0;
  int output_side = 0;
  int grid_n = 0;

  void validate() const;  // throws InvalidArgument
};

// Pixel counts lost by the two candidate preprocessing routes:
// a single whole-image downscale vs the trim/crop/per-tile-downscale strategy.
struct PixelLossReport {
  long long direct_loss = 0;             // source^2 - output^2
  long long strategy_loss_per_tile = 0;  // tile^2 - output^2
  long long trim_loss = 0;               // source^2 - trimmed^2
};

struct Tile {
  int row = 0;
  int col = 0;
  Raster raster;
};

// Area-averaging resample. Identity when the target equals the source size.
Raster resize(const Raster& r, int target_w, int target_h);

// Resample for label masks: each output pixel takes the label with the
// largest covered source area (ties -> smaller label), so labels stay legal.
Raster resize_labels(const Raster& r, int target_w, int target_h);

// Centered crop to target_side x target_side. An odd margin puts the smaller
// half at the top/left.
Raster center_trim(const Raster& r, int target_side);

// Top/left offsets center_trim uses for the given source/target sides.
std::pair<int, int> center_trim_offsets(int source_side, int target_side);

// Disjoint exact cover of the trimmed raster, row-major tile order.
std::vector<Tile> crop_grid(const Raster& r, const TileGridSpec& spec);

PixelLossReport pixel_loss_report(const TileGridSpec& spec);

// 8-bit PNG I/O, 1 or 3 channels. Round trips are lossless for 8-bit content.
Raster read_png(const std::string& path);
void write_png(const std::string& path, const Raster& r);

// Canonical tile file name: <source_id>_r<row>_c<col>.png
std::string tile_name(const std::string& source_id, int row, int col);

}  // namespace g2g
