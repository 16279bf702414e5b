#pragma once

// Naive single-threaded reference implementations. They share no code with
// the production kernels: tests compare the two routes, and the bench target
// measures the speedup of the OpenMP versions against these.

#include <array>
#include <vector>

#include "crcnet/mil.hpp"
#include "crcnet/raster.hpp"
#include "crcnet/survival.hpp"
#include "crcnet/tissue.hpp"

namespace crcnet::ref {

// Step-by-step product-limit tabulation: risk sets recounted from scratch at
// every distinct event time.
KMCurve km_tabulate(const std::vector<Observation>& obs);

// Two-group log-rank by per-time 2x2 table accumulation.
double logrank_chi2_two_group(const std::vector<Observation>& a,
                              const std::vector<Observation>& b);

// Exhaustive O(n^2) concordant-pair enumeration.
double c_index_pairs(const std::vector<double>& risk,
                     const std::vector<Observation>& obs);

// Ranks computed independently (counting smaller elements and ties), then a
// textbook Pearson correlation.
double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

// Plain serial tile scoring.
std::vector<double> score_tiles(const FeatureBag& bag, const MILModel& model);

// Per-tile count of pixels whose mean optical density exceeds the threshold.
std::vector<long> foreground_pixel_counts(const RasterImage& img, double od_threshold);

// Direct exp-normalize of logits.
std::array<double, kNumTissueClasses> softmax(
    const std::array<double, kNumTissueClasses>& logits);

}  // namespace crcnet::ref
