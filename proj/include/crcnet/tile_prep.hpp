#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "crcnet/raster.hpp"

namespace crcnet {

inline constexpr int kTileSize = 224;

// One 224x224 crop; origin is the top-left pixel, always a multiple of 224.
struct Tile {
  int x = 0;
  int y = 0;
  RasterImage pixels;
};

// Per-tile boolean foreground grid over the same floor(w/224) x floor(h/224)
// layout as tile_grid.
struct TileMask {
  int grid_w = 0;
  int grid_h = 0;
  std::vector<std::uint8_t> fg;  // row-major, 1 = foreground

  bool at(int cx, int cy) const { return fg[static_cast<std::size_t>(cy) * grid_w + cx] != 0; }
};

// Two unit optical-density stain vectors with their 99th-percentile
// concentrations; stains[0] is hematoxylin (larger blue-channel OD
// component), stains[1] eosin.
struct StainProfile {
  std::array<std::array<double, 3>, 2> stains{};
  std::array<double, 2> max_concentration{};
};

// Optical density of one 8-bit channel value: -log10((v+1)/256); a bijection
// on 0..255 with od_to_byte as its inverse.
double od_of(std::uint8_t v);
std::uint8_t od_to_byte(double od);

// Widely used H&E reference stain vectors, unit-normalized, with canonical
// maximum concentrations; the default normalization target.
StainProfile reference_he_profile();

// Marks a tile foreground when at least half of its pixels have mean optical
// density above `od_threshold`. Trailing strips narrower than one tile are
// ignored, matching tile_grid.
TileMask foreground_mask(const RasterImage& img, double od_threshold = 0.15);

// Converts an external mask raster (one pixel per tile, nonzero = foreground)
// into a TileMask.
TileMask mask_from_raster(const RasterImage& mask_img);

// Non-overlapping 224x224 tiles in row-major order; edge strips discarded.
std::vector<Tile> tile_grid(const RasterImage& img);

// Macenko stain estimation: OD conversion, tissue filter (mean OD >
// beta_od), principal 2D OD plane, angle extremes at the alpha and
// (100-alpha) percentiles. Requires >= 100 tissue pixels and an OD
// covariance of rank >= 2.
StainProfile estimate_stains(const RasterImage& img, double alpha = 1.0,
                             double beta_od = 0.15);

// Unmixes with `source`, rescales each stain by the ratio of the profiles'
// maximum concentrations, remixes with `target`. Same dimensions out,
// channels clamped to [0,255].
RasterImage normalize_to(const RasterImage& img, const StainProfile& source,
                         const StainProfile& target);

}  // namespace crcnet
