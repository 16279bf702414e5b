// Benchmarks the OpenMP kernels against the serial reference
// implementations and verifies that both routes agree.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "crcnet/mil.hpp"
#include "crcnet/raster.hpp"
#include "crcnet/rng.hpp"
#include "crcnet/survival.hpp"
#include "crcnet/tile_prep.hpp"
#include "ref/reference.hpp"

using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void report(const std::string& name, double serial_ms, double parallel_ms, bool ok) {
  std::printf("%-22s serial %9.2f ms   openmp %9.2f ms   speedup %5.2fx   %s\n",
              name.c_str(), serial_ms, parallel_ms, serial_ms / parallel_ms,
              ok ? "OK" : "MISMATCH");
}

void bench_c_index(std::uint64_t seed) {
  const std::size_t n = 4000;
  crcnet::CounterRng rng(seed);
  std::vector<double> risk(n);
  std::vector<crcnet::Observation> obs(n);
  for (std::size_t i = 0; i < n; ++i) {
    risk[i] = rng.next_normal();
    obs[i].time = rng.next_exponential(0.05);
    obs[i].event = rng.next_unit() < 0.7;
  }

  auto t0 = Clock::now();
  const double serial = crcnet::ref::c_index_pairs(risk, obs);
  const double serial_ms = ms_since(t0);

  t0 = Clock::now();
  const double parallel = crcnet::c_index(risk, obs);
  const double parallel_ms = ms_since(t0);

  report("c_index (n=4000)", serial_ms, parallel_ms, serial == parallel);
}

void bench_score_tiles(std::uint64_t seed) {
  crcnet::CounterRng rng(seed);
  crcnet::FeatureBag bag;
  bag.patient_id = "bench";
  bag.n_tiles = 20000;
  bag.features.resize(bag.n_tiles * crcnet::kFeatureDim);
  for (double& f : bag.features) f = rng.next_normal();
  crcnet::MILModel model;
  for (double& w : model.w) w = rng.next_normal();
  model.b = 0.25;

  auto t0 = Clock::now();
  const auto serial = crcnet::ref::score_tiles(bag, model);
  const double serial_ms = ms_since(t0);

  t0 = Clock::now();
  const auto parallel = crcnet::score_tiles(bag, model);
  const double parallel_ms = ms_since(t0);

  report("score_tiles (20k)", serial_ms, parallel_ms, serial == parallel);
}

void bench_foreground(std::uint64_t seed) {
  crcnet::CounterRng rng(seed);
  crcnet::RasterImage img(4480, 4480);
  for (auto& px : img.pixels) px = static_cast<std::uint8_t>(rng.next_below(256));

  auto t0 = Clock::now();
  const auto counts = crcnet::ref::foreground_pixel_counts(img, 0.15);
  const double serial_ms = ms_since(t0);

  t0 = Clock::now();
  const auto mask = crcnet::foreground_mask(img, 0.15);
  const double parallel_ms = ms_since(t0);

  bool ok = counts.size() == mask.fg.size();
  const long quorum = static_cast<long>(crcnet::kTileSize) * crcnet::kTileSize;
  for (std::size_t i = 0; ok && i < counts.size(); ++i)
    ok = (2 * counts[i] >= quorum) == (mask.fg[i] != 0);

  report("foreground (4480^2)", serial_ms, parallel_ms, ok);
}

void bench_stains(std::uint64_t seed) {
#ifdef _OPENMP
  // Thread-count sweep instead of a separate reference: the estimate is
  // specified to be bit-identical for any number of threads.
  crcnet::CounterRng rng(seed);
  const auto profile = crcnet::reference_he_profile();
  crcnet::RasterImage img(2240, 2240);
  for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
    const double ch = 1.2 * rng.next_unit();
    const double ce = 0.8 * rng.next_unit();
    for (int c = 0; c < 3; ++c)
      img.pixels[i + c] = crcnet::od_to_byte(ch * profile.stains[0][c] + ce * profile.stains[1][c]);
  }

  const int max_threads = omp_get_max_threads();
  omp_set_num_threads(1);
  auto t0 = Clock::now();
  const auto serial = crcnet::estimate_stains(img);
  const double serial_ms = ms_since(t0);

  omp_set_num_threads(max_threads);
  t0 = Clock::now();
  const auto parallel = crcnet::estimate_stains(img);
  const double parallel_ms = ms_since(t0);

  bool ok = true;
  for (int s = 0; s < 2; ++s)
    for (int c = 0; c < 3; ++c)
      ok = ok && serial.stains[s][c] == parallel.stains[s][c];
  ok = ok && serial.max_concentration == parallel.max_concentration;

  report("estimate_stains", serial_ms, parallel_ms, ok);

  omp_set_num_threads(1);
  t0 = Clock::now();
  const auto norm_serial = crcnet::normalize_to(img, serial, profile);
  const double norm_serial_ms = ms_since(t0);
  omp_set_num_threads(max_threads);
  t0 = Clock::now();
  const auto norm_parallel = crcnet::normalize_to(img, serial, profile);
  const double norm_parallel_ms = ms_since(t0);
  report("normalize_to", norm_serial_ms, norm_parallel_ms,
         norm_serial.pixels == norm_parallel.pixels);
#else
  (void)seed;
#endif
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP; both columns are serial\n");
#endif
  bench_c_index(11);
  bench_score_tiles(12);
  bench_foreground(13);
  bench_stains(14);
  return 0;
}
