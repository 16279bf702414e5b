#include "crcnet/tile_prep.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "crcnet/linalg.hpp"

namespace crcnet {

namespace {

const std::array<double, 256>& od_table() {
  static const std::array<double, 256> table = [] {
    std::array<double, 256> t{};
    for (int v = 0; v < 256; ++v) t[v] = -std::log10((v + 1) / 256.0);
    return t;
  }();
  return table;
}

double percentile(std::vector<double>& values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

// 2x3 least-squares unmixing matrix for a 3x2 stain matrix.
std::array<double, 6> stain_pinv(const StainProfile& profile) {
  const auto& s = profile.stains;
  double g00 = 0.0, g01 = 0.0, g11 = 0.0;  // Gram matrix of the two columns
  for (int c = 0; c < 3; ++c) {
    g00 += s[0][c] * s[0][c];
    g01 += s[0][c] * s[1][c];
    g11 += s[1][c] * s[1][c];
  }
  const double det = g00 * g11 - g01 * g01;
  if (std::abs(det) < 1e-12) throw std::runtime_error("degenerate stain matrix");
  const double i00 = g11 / det, i01 = -g01 / det, i11 = g00 / det;
  std::array<double, 6> p{};
  for (int c = 0; c < 3; ++c) {
    p[c] = i00 * s[0][c] + i01 * s[1][c];
    p[3 + c] = i01 * s[0][c] + i11 * s[1][c];
  }
  return p;
}

}  // namespace

double od_of(std::uint8_t v) { return od_table()[v]; }

std::uint8_t od_to_byte(double od) {
  const double v = 256.0 * std::pow(10.0, -od) - 1.0;
  const long long r = std::llround(v);
  return static_cast<std::uint8_t>(std::clamp(r, 0LL, 255LL));
}

StainProfile reference_he_profile() {
  StainProfile p;
  p.stains = {{{0.65, 0.70, 0.29}, {0.07, 0.99, 0.11}}};
  for (auto& s : p.stains) {
    const double norm = std::sqrt(s[0] * s[0] + s[1] * s[1] + s[2] * s[2]);
    for (double& c : s) c /= norm;
  }
  p.max_concentration = {1.9705, 1.0308};
  return p;
}

TileMask foreground_mask(const RasterImage& img, double od_threshold) {
  if (img.width <= 0 || img.height <= 0) throw std::invalid_argument("empty image");
  TileMask mask;
  mask.grid_w = img.width / kTileSize;
  mask.grid_h = img.height / kTileSize;
  mask.fg.assign(static_cast<std::size_t>(mask.grid_w) * mask.grid_h, 0);

  const auto& od = od_table();
  const double od_sum_threshold = 3.0 * od_threshold;  // mean of 3 channels
  const long quorum = static_cast<long>(kTileSize) * kTileSize;  // 2*count >= quorum

  const long n_tiles = static_cast<long>(mask.grid_w) * mask.grid_h;
#pragma omp parallel for schedule(static)
  for (long t = 0; t < n_tiles; ++t) {
    const int cx = static_cast<int>(t % mask.grid_w);
    const int cy = static_cast<int>(t / mask.grid_w);
    long count = 0;
    for (int y = cy * kTileSize; y < (cy + 1) * kTileSize; ++y) {
      const std::uint8_t* row = img.at(cx * kTileSize, y);
      for (int x = 0; x < kTileSize; ++x) {
        const double s = od[row[0]] + od[row[1]] + od[row[2]];
        if (s > od_sum_threshold) ++count;
        row += 3;
      }
    }
    mask.fg[static_cast<std::size_t>(t)] = 2 * count >= quorum ? 1 : 0;
  }
  return mask;
}

TileMask mask_from_raster(const RasterImage& mask_img) {
  TileMask mask;
  mask.grid_w = mask_img.width;
  mask.grid_h = mask_img.height;
  mask.fg.assign(static_cast<std::size_t>(mask.grid_w) * mask.grid_h, 0);
  for (int y = 0; y < mask_img.height; ++y)
    for (int x = 0; x < mask_img.width; ++x) {
      const std::uint8_t* px = mask_img.at(x, y);
      if (px[0] || px[1] || px[2])
        mask.fg[static_cast<std::size_t>(y) * mask.grid_w + x] = 1;
    }
  return mask;
}

std::vector<Tile> tile_grid(const RasterImage& img) {
  if (img.width < kTileSize || img.height < kTileSize)
    throw std::invalid_argument("image too small");
  const int gw = img.width / kTileSize;
  const int gh = img.height / kTileSize;

  std::vector<Tile> tiles(static_cast<std::size_t>(gw) * gh);
  const long n_tiles = static_cast<long>(gw) * gh;
#pragma omp parallel for schedule(static)
  for (long t = 0; t < n_tiles; ++t) {
    const int cx = static_cast<int>(t % gw);
    const int cy = static_cast<int>(t / gw);
    Tile& tile = tiles[static_cast<std::size_t>(t)];
    tile.x = cx * kTileSize;
    tile.y = cy * kTileSize;
    tile.pixels = RasterImage(kTileSize, kTileSize);
    for (int y = 0; y < kTileSize; ++y)
      std::memcpy(tile.pixels.at(0, y), img.at(tile.x, tile.y + y),
                  static_cast<std::size_t>(kTileSize) * 3);
  }
  return tiles;
}

StainProfile estimate_stains(const RasterImage& img, double alpha, double beta_od) {
  const std::size_t n_pixels = static_cast<std::size_t>(img.width) * img.height;
  const auto& od = od_table();
  const double od_sum_threshold = 3.0 * beta_od;

  // Moments are accumulated through integer histograms over channel values,
  // so the estimate is exactly invariant under pixel permutation and thread
  // count: the weighted sums below always run in table order.
  std::array<std::vector<std::uint64_t>, 3> chan_hist;
  for (auto& h : chan_hist) h.assign(256, 0);
  // Pair histograms for the off-diagonal second moments: (0,1), (0,2), (1,2).
  std::array<std::vector<std::uint64_t>, 3> pair_hist;
  for (auto& h : pair_hist) h.assign(256 * 256, 0);
  std::uint64_t n_tissue = 0;

#pragma omp parallel
  {
    std::array<std::vector<std::uint64_t>, 3> local_chan;
    for (auto& h : local_chan) h.assign(256, 0);
    std::array<std::vector<std::uint64_t>, 3> local_pair;
    for (auto& h : local_pair) h.assign(256 * 256, 0);
    std::uint64_t local_n = 0;

#pragma omp for schedule(static) nowait
    for (long long i = 0; i < static_cast<long long>(n_pixels); ++i) {
      const std::uint8_t* px = img.pixels.data() + i * 3;
      if (od[px[0]] + od[px[1]] + od[px[2]] <= od_sum_threshold) continue;
      ++local_n;
      local_chan[0][px[0]]++;
      local_chan[1][px[1]]++;
      local_chan[2][px[2]]++;
      local_pair[0][px[0] * 256 + px[1]]++;
      local_pair[1][px[0] * 256 + px[2]]++;
      local_pair[2][px[1] * 256 + px[2]]++;
    }

#pragma omp critical
    {
      n_tissue += local_n;
      for (int c = 0; c < 3; ++c) {
        for (int v = 0; v < 256; ++v) chan_hist[c][v] += local_chan[c][v];
        for (int v = 0; v < 256 * 256; ++v) pair_hist[c][v] += local_pair[c][v];
      }
    }
  }

  if (n_tissue < 100) throw std::runtime_error("too few tissue pixels");

  const double inv_n = 1.0 / static_cast<double>(n_tissue);
  std::array<double, 3> mean{};
  std::array<double, 3> sq{};
  for (int c = 0; c < 3; ++c) {
    double m = 0.0, s = 0.0;
    for (int v = 0; v < 256; ++v) {
      const double w = static_cast<double>(chan_hist[c][v]);
      m += w * od[v];
      s += w * od[v] * od[v];
    }
    mean[c] = m * inv_n;
    sq[c] = s * inv_n;
  }
  std::array<double, 3> cross{};  // E[od_a od_b] for (0,1), (0,2), (1,2)
  for (int k = 0; k < 3; ++k) {
    double s = 0.0;
    for (int va = 0; va < 256; ++va) {
      double inner = 0.0;
      for (int vb = 0; vb < 256; ++vb) {
        const std::uint64_t w = pair_hist[k][va * 256 + vb];
        if (w) inner += static_cast<double>(w) * od[vb];
      }
      s += inner * od[va];
    }
    cross[k] = s * inv_n;
  }

  const std::array<double, 9> cov = {
      sq[0] - mean[0] * mean[0],       cross[0] - mean[0] * mean[1],
      cross[1] - mean[0] * mean[2],    cross[0] - mean[0] * mean[1],
      sq[1] - mean[1] * mean[1],       cross[2] - mean[1] * mean[2],
      cross[1] - mean[0] * mean[2],    cross[2] - mean[1] * mean[2],
      sq[2] - mean[2] * mean[2]};

  std::array<double, 3> vals{};
  std::array<double, 9> vecs{};
  eigen_sym3(cov, vals, vecs);
  if (!(vals[0] > 0.0) || vals[1] <= vals[0] * 1e-8)
    throw std::runtime_error("degenerate stain plane");

  const std::array<double, 3> p1 = {vecs[0], vecs[3], vecs[6]};
  const std::array<double, 3> p2 = {vecs[1], vecs[4], vecs[7]};

  // Angles of the raw OD vectors within the principal plane.
  std::vector<double> angles(n_pixels, std::numeric_limits<double>::quiet_NaN());
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n_pixels); ++i) {
    const std::uint8_t* px = img.pixels.data() + i * 3;
    const double o0 = od[px[0]], o1 = od[px[1]], o2 = od[px[2]];
    if (o0 + o1 + o2 <= od_sum_threshold) continue;
    const double u = o0 * p1[0] + o1 * p1[1] + o2 * p1[2];
    const double v = o0 * p2[0] + o1 * p2[1] + o2 * p2[2];
    angles[static_cast<std::size_t>(i)] = std::atan2(v, u);
  }
  std::vector<double> tissue_angles;
  tissue_angles.reserve(n_tissue);
  for (double a : angles)
    if (!std::isnan(a)) tissue_angles.push_back(a);

  const double theta_lo = percentile(tissue_angles, alpha);
  const double theta_hi = percentile(tissue_angles, 100.0 - alpha);

  auto direction = [&](double theta) {
    std::array<double, 3> v{};
    for (int c = 0; c < 3; ++c) v[c] = std::cos(theta) * p1[c] + std::sin(theta) * p2[c];
    double sum = v[0] + v[1] + v[2];
    if (sum < 0.0)
      for (double& x : v) x = -x;
    // Stain vectors are absorbances; tiny negative leakage is clamped away.
    for (double& x : v) x = std::max(x, 0.0);
    const double norm = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (norm <= 0.0) throw std::runtime_error("degenerate stain plane");
    for (double& x : v) x /= norm;
    return v;
  };

  const auto v_lo = direction(theta_lo);
  const auto v_hi = direction(theta_hi);

  StainProfile profile;
  // Hematoxylin is the vector with the larger blue-channel OD component.
  if (v_lo[2] >= v_hi[2]) {
    profile.stains = {v_lo, v_hi};
  } else {
    profile.stains = {v_hi, v_lo};
  }

  const auto pinv = stain_pinv(profile);
  std::vector<double> conc_h(n_pixels, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> conc_e(n_pixels, std::numeric_limits<double>::quiet_NaN());
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n_pixels); ++i) {
    const std::uint8_t* px = img.pixels.data() + i * 3;
    const double o0 = od[px[0]], o1 = od[px[1]], o2 = od[px[2]];
    if (o0 + o1 + o2 <= od_sum_threshold) continue;
    conc_h[static_cast<std::size_t>(i)] = pinv[0] * o0 + pinv[1] * o1 + pinv[2] * o2;
    conc_e[static_cast<std::size_t>(i)] = pinv[3] * o0 + pinv[4] * o1 + pinv[5] * o2;
  }
  std::vector<double> ch, ce;
  ch.reserve(n_tissue);
  ce.reserve(n_tissue);
  for (std::size_t i = 0; i < n_pixels; ++i) {
    if (!std::isnan(conc_h[i])) ch.push_back(conc_h[i]);
    if (!std::isnan(conc_e[i])) ce.push_back(conc_e[i]);
  }
  profile.max_concentration[0] = percentile(ch, 99.0);
  profile.max_concentration[1] = percentile(ce, 99.0);
  return profile;
}

RasterImage normalize_to(const RasterImage& img, const StainProfile& source,
                         const StainProfile& target) {
  const auto pinv = stain_pinv(source);
  const auto& od = od_table();

  std::array<double, 2> ratio{};
  for (int s = 0; s < 2; ++s) {
    const double src = source.max_concentration[s];
    ratio[s] = src > 1e-12 ? target.max_concentration[s] / src : 1.0;
  }

  RasterImage out(img.width, img.height);
  const std::size_t n_pixels = static_cast<std::size_t>(img.width) * img.height;
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n_pixels); ++i) {
    const std::uint8_t* px = img.pixels.data() + i * 3;
    std::uint8_t* dst = out.pixels.data() + i * 3;
    const double o0 = od[px[0]], o1 = od[px[1]], o2 = od[px[2]];
    const double c_h = (pinv[0] * o0 + pinv[1] * o1 + pinv[2] * o2) * ratio[0];
    const double c_e = (pinv[3] * o0 + pinv[4] * o1 + pinv[5] * o2) * ratio[1];
    for (int c = 0; c < 3; ++c) {
      const double mixed = c_h * target.stains[0][c] + c_e * target.stains[1][c];
      dst[c] = od_to_byte(mixed);
    }
  }
  return out;
}

}  // namespace crcnet
