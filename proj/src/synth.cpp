#include "crcnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "crcnet/rng.hpp"

namespace crcnet {

namespace {

double draw_covariate(const CovariateSpec& spec, CounterRng& rng) {
  switch (spec.kind) {
    case CovariateSpec::Kind::Bernoulli:
      return rng.next_unit() < spec.a ? 1.0 : 0.0;
    case CovariateSpec::Kind::Normal:
      return spec.a + spec.b * rng.next_normal();
    case CovariateSpec::Kind::Uniform:
      return spec.a + (spec.b - spec.a) * rng.next_unit();
  }
  return 0.0;
}

}  // namespace

SyntheticCohort generate_cohort(const CohortSpec& spec) {
  if (spec.n < 2) throw std::invalid_argument("cohort needs at least 2 subjects");
  if (spec.baseline_rate <= 0.0 || spec.censor_rate <= 0.0)
    throw std::invalid_argument("rates must be positive");
  if (spec.covariates.size() != spec.beta_true.size())
    throw std::invalid_argument("covariate/beta dimension mismatch");

  const std::size_t p = spec.beta_true.size();
  SyntheticCohort cohort;
  cohort.obs.resize(spec.n);
  cohort.rows.resize(spec.n);

  CounterRng root(spec.seed);
  for (std::size_t i = 0; i < spec.n; ++i) {
    CounterRng rng = root.substream(i);
    CovariateRow row;
    row.values.resize(p);
    row.present.assign(p, true);
    double lp = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      row.values[j] = draw_covariate(spec.covariates[j], rng);
      lp += row.values[j] * spec.beta_true[j];
    }
    const double event_time = rng.next_exponential(spec.baseline_rate * std::exp(lp));
    const double censor_time = rng.next_exponential(spec.censor_rate);
    cohort.obs[i].time = std::min(event_time, censor_time);
    cohort.obs[i].event = event_time <= censor_time;
    cohort.rows[i] = std::move(row);
  }
  return cohort;
}

SyntheticBags generate_bags(const BagSpec& spec) {
  if (spec.n_patients < 2) throw std::invalid_argument("need at least 2 patients");
  if (spec.tiles_min < 1 || spec.tiles_max < spec.tiles_min)
    throw std::invalid_argument("bad tile range");
  if (spec.w_true.size() != kFeatureDim)
    throw std::invalid_argument("w_true must have 256 entries");

  SyntheticBags out;
  out.bags.resize(spec.n_patients);
  out.obs.resize(spec.n_patients);
  out.true_risk.resize(spec.n_patients);

  CounterRng root(spec.seed);
  for (std::size_t pnum = 0; pnum < spec.n_patients; ++pnum) {
    CounterRng rng = root.substream(pnum);
    FeatureBag bag;
    bag.patient_id = "P" + std::to_string(pnum);
    bag.tissue = spec.tissue;
    bag.n_tiles = spec.tiles_min + rng.next_below(spec.tiles_max - spec.tiles_min + 1);
    bag.features.resize(bag.n_tiles * kFeatureDim);
    double mean_score = 0.0;
    for (std::size_t t = 0; t < bag.n_tiles; ++t) {
      double* f = bag.features.data() + t * kFeatureDim;
      double s = 0.0;
      for (int j = 0; j < kFeatureDim; ++j) {
        f[j] = rng.next_normal();
        s += spec.w_true[j] * f[j];
      }
      mean_score += s;
    }
    mean_score /= static_cast<double>(bag.n_tiles);

    const double eta = mean_score + spec.noise_sigma * rng.next_normal();
    const double event_time = rng.next_exponential(spec.baseline_rate * std::exp(eta));
    const double censor_time = rng.next_exponential(spec.censor_rate);
    out.obs[pnum].time = std::min(event_time, censor_time);
    out.obs[pnum].event = event_time <= censor_time;
    out.true_risk[pnum] = eta;
    out.bags[pnum] = std::move(bag);
  }
  return out;
}

namespace {

// Direct evaluation of the one-covariate Efron partial log-likelihood; risk
// sets are rebuilt per event time on purpose so this path shares nothing
// with the Newton implementation it cross-checks.
double naive_efron_loglik(const std::vector<Observation>& obs,
                          const std::vector<double>& x, double beta) {
  std::vector<double> event_times;
  for (const auto& o : obs)
    if (o.event) event_times.push_back(o.time);
  std::sort(event_times.begin(), event_times.end());
  event_times.erase(std::unique(event_times.begin(), event_times.end()), event_times.end());

  double ll = 0.0;
  for (double t : event_times) {
    double s0 = 0.0, c0 = 0.0;
    int deaths = 0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const double r = std::exp(beta * x[i]);
      if (obs[i].time >= t) s0 += r;
      if (obs[i].time == t && obs[i].event) {
        c0 += r;
        ++deaths;
        ll += beta * x[i];
      }
    }
    for (int l = 0; l < deaths; ++l)
      ll -= std::log(s0 - (static_cast<double>(l) / deaths) * c0);
  }
  return ll;
}

}  // namespace

PartialLikelihoodArgmax brute_force_partial_likelihood(
    const std::vector<Observation>& obs, const std::vector<double>& x,
    const std::vector<double>& beta_grid) {
  if (obs.size() != x.size()) throw std::invalid_argument("length mismatch");
  if (obs.size() > 50) throw std::invalid_argument("oracle limited to 50 rows");
  if (beta_grid.size() < 3) throw std::invalid_argument("grid too small");

  std::size_t best = 0;
  double best_ll = naive_efron_loglik(obs, x, beta_grid[0]);
  for (std::size_t i = 1; i < beta_grid.size(); ++i) {
    const double ll = naive_efron_loglik(obs, x, beta_grid[i]);
    if (ll > best_ll) {
      best_ll = ll;
      best = i;
    }
  }

  PartialLikelihoodArgmax result;
  if (best == 0 || best + 1 == beta_grid.size()) {
    result.beta = beta_grid[best];
    result.at_boundary = true;
    return result;
  }

  // Golden-section refinement inside the bracketing grid cells.
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = beta_grid[best - 1], hi = beta_grid[best + 1];
  double m1 = hi - phi * (hi - lo);
  double m2 = lo + phi * (hi - lo);
  double f1 = naive_efron_loglik(obs, x, m1);
  double f2 = naive_efron_loglik(obs, x, m2);
  while (hi - lo > 1e-8) {
    if (f1 < f2) {
      lo = m1;
      m1 = m2;
      f1 = f2;
      m2 = lo + phi * (hi - lo);
      f2 = naive_efron_loglik(obs, x, m2);
    } else {
      hi = m2;
      m2 = m1;
      f2 = f1;
      m1 = hi - phi * (hi - lo);
      f1 = naive_efron_loglik(obs, x, m1);
    }
  }
  result.beta = 0.5 * (lo + hi);
  return result;
}

}  // namespace crcnet
