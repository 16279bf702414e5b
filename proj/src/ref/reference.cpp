#include "reference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "crcnet/tile_prep.hpp"

namespace crcnet::ref {

KMCurve km_tabulate(const std::vector<Observation>& obs) {
  if (obs.empty()) throw std::invalid_argument("empty cohort");

  std::vector<double> event_times;
  for (const auto& o : obs)
    if (o.event) event_times.push_back(o.time);
  std::sort(event_times.begin(), event_times.end());
  event_times.erase(std::unique(event_times.begin(), event_times.end()),
                    event_times.end());

  KMCurve curve;
  double s = 1.0;
  for (double t : event_times) {
    int at_risk = 0, deaths = 0;
    for (const auto& o : obs) {
      if (o.time >= t) ++at_risk;
      if (o.time == t && o.event) ++deaths;
    }
    s *= 1.0 - static_cast<double>(deaths) / at_risk;
    curve.times.push_back(t);
    curve.survival.push_back(s);
    curve.at_risk.push_back(at_risk);
    curve.events.push_back(deaths);
    if (!curve.median && s <= 0.5) curve.median = t;
  }
  return curve;
}

double logrank_chi2_two_group(const std::vector<Observation>& a,
                              const std::vector<Observation>& b) {
  std::vector<double> event_times;
  for (const auto& o : a)
    if (o.event) event_times.push_back(o.time);
  for (const auto& o : b)
    if (o.event) event_times.push_back(o.time);
  std::sort(event_times.begin(), event_times.end());
  event_times.erase(std::unique(event_times.begin(), event_times.end()),
                    event_times.end());
  if (event_times.empty()) throw std::runtime_error("no events");

  double observed = 0.0, expected = 0.0, variance = 0.0;
  for (double t : event_times) {
    double n1 = 0.0, n2 = 0.0, d1 = 0.0, d2 = 0.0;
    for (const auto& o : a) {
      if (o.time >= t) ++n1;
      if (o.time == t && o.event) ++d1;
    }
    for (const auto& o : b) {
      if (o.time >= t) ++n2;
      if (o.time == t && o.event) ++d2;
    }
    const double n = n1 + n2, d = d1 + d2;
    observed += d1;
    expected += d * n1 / n;
    if (n > 1.0) variance += d * (n - d) / (n - 1.0) * (n1 / n) * (n2 / n);
  }
  const double diff = observed - expected;
  if (std::abs(diff) < 1e-12) return 0.0;
  return diff * diff / variance;
}

double c_index_pairs(const std::vector<double>& risk,
                     const std::vector<Observation>& obs) {
  double concordant = 0.0, comparable = 0.0;
  const std::size_t n = obs.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      // ordered pair with i failing strictly first, once per unordered pair
      if (!(obs[i].time < obs[j].time) || !obs[i].event) continue;
      comparable += 1.0;
      if (risk[i] > risk[j]) concordant += 1.0;
      else if (risk[i] == risk[j]) concordant += 0.5;
    }
  }
  if (comparable == 0.0) throw std::runtime_error("no comparable pairs");
  return concordant / comparable;
}

namespace {

std::vector<double> counting_ranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double smaller = 0.0, equal = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (x[j] < x[i]) ++smaller;
      else if (x[j] == x[i]) ++equal;
    }
    rank[i] = smaller + (equal + 1.0) / 2.0;
  }
  return rank;
}

}  // namespace

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = counting_ranks(x);
  const auto ry = counting_ranks(y);
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += rx[i];
    sy += ry[i];
    sxx += rx[i] * rx[i];
    syy += ry[i] * ry[i];
    sxy += rx[i] * ry[i];
  }
  const double num = n * sxy - sx * sy;
  const double den = std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
  return num / den;
}

std::vector<double> score_tiles(const FeatureBag& bag, const MILModel& model) {
  std::vector<double> scores(bag.n_tiles);
  for (std::size_t i = 0; i < bag.n_tiles; ++i) {
    const double* f = bag.tile(i);
    double s = model.b;
    for (int j = 0; j < kFeatureDim; ++j) s += model.w[j] * f[j];
    scores[i] = s;
  }
  return scores;
}

std::vector<long> foreground_pixel_counts(const RasterImage& img, double od_threshold) {
  const int gw = img.width / kTileSize;
  const int gh = img.height / kTileSize;
  std::vector<long> counts(static_cast<std::size_t>(gw) * gh, 0);
  for (int cy = 0; cy < gh; ++cy) {
    for (int cx = 0; cx < gw; ++cx) {
      long count = 0;
      for (int y = 0; y < kTileSize; ++y) {
        for (int x = 0; x < kTileSize; ++x) {
          const std::uint8_t* px = img.at(cx * kTileSize + x, cy * kTileSize + y);
          const double mean_od = (od_of(px[0]) + od_of(px[1]) + od_of(px[2])) / 3.0;
          if (mean_od > od_threshold) ++count;
        }
      }
      counts[static_cast<std::size_t>(cy) * gw + cx] = count;
    }
  }
  return counts;
}

std::array<double, kNumTissueClasses> softmax(
    const std::array<double, kNumTissueClasses>& logits) {
  std::array<double, kNumTissueClasses> probs{};
  double denom = 0.0;
  for (int k = 0; k < kNumTissueClasses; ++k) denom += std::exp(logits[k]);
  for (int k = 0; k < kNumTissueClasses; ++k) probs[k] = std::exp(logits[k]) / denom;
  return probs;
}

}  // namespace crcnet::ref
