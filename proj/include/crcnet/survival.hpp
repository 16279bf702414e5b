#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "crcnet/linalg.hpp"

namespace crcnet {

// One subject's follow-up: time in months, event = true when the death was
// observed, false when follow-up ended first (right censoring).
struct Observation {
  double time = 0.0;
  bool event = false;
};

// Product-limit survival curve. Rows exist at distinct event times only;
// censored-only times shrink the risk set but add no row.
struct KMCurve {
  std::vector<double> times;
  std::vector<double> survival;
  std::vector<int> at_risk;
  std::vector<int> events;
  std::optional<double> median;  // smallest time with S(t) <= 0.5
};

struct LogRankResult {
  double chi2 = 0.0;
  int df = 0;
  double p = 1.0;
};

// Covariate vector with a per-entry presence mask; rows with any missing
// entry are dropped (complete-case) by fit_cox.
struct CovariateRow {
  std::vector<double> values;
  std::vector<bool> present;

  bool complete() const {
    for (bool b : present)
      if (!b) return false;
    return true;
  }
};

struct CoxFit {
  std::vector<double> beta;
  std::vector<double> se;
  std::vector<double> hr;       // exp(beta)
  std::vector<double> ci_low;   // exp(beta - z*se)
  std::vector<double> ci_high;  // exp(beta + z*se)
  std::vector<double> p;        // two-sided Wald
  double c_index = 0.5;
  double loglik = 0.0;
  std::size_t n_used = 0;
  std::size_t n_events = 0;
  int iterations = 0;
  bool converged = false;
};

struct SpearmanResult {
  double rho = 0.0;
  double p = 1.0;
};

// Singular observed information; `column` is the offending design column.
struct collinear_error : std::runtime_error {
  int column;
  explicit collinear_error(int col)
      : std::runtime_error("collinear covariates (column " + std::to_string(col) + ")"),
        column(col) {}
};

// 95% Wald interval half-width multiplier.
inline constexpr double kWaldZ = 1.959964;

KMCurve km_estimate(const std::vector<Observation>& obs);

// Step-function evaluation of a KM curve: S(t) of the last event time <= t,
// 1.0 before the first event.
double km_survival_at(const KMCurve& curve, double t);

LogRankResult logrank_test(const std::vector<std::vector<Observation>>& groups);

// Harrell's concordance of a risk score against observed survival.
// Comparable pairs are those with distinct times where the shorter time is
// an event; tied risk scores earn 0.5.
double c_index(const std::vector<double>& risk, const std::vector<Observation>& obs);

// Spearman rank correlation with mid-ranks for ties; p from the
// t-approximation with n-2 degrees of freedom.
SpearmanResult spearman_test(const std::vector<double>& x, const std::vector<double>& y);

// Efron partial log-likelihood of a Cox model, with optional analytic score
// and observed information. `design` is the n x p complete-case matrix.
double cox_loglik(const std::vector<Observation>& obs, const Matrix& design,
                  const std::vector<double>& beta,
                  std::vector<double>* score = nullptr, Matrix* info = nullptr);

// Newton-Raphson fit of the Efron partial likelihood. Converges when
// max|score| < 1e-9 or the relative log-likelihood change drops below 1e-9,
// capped at 50 iterations; |beta| running past 500 signals separation.
CoxFit fit_cox(const std::vector<Observation>& obs,
               const std::vector<CovariateRow>& rows);

// "H.HH(L.LL,U.UU)" table cell for one coefficient.
std::string format_hr(const CoxFit& fit, std::size_t index);

// Log-rank / Wald significance stars:
//   "***" p <= 0.001, "**" p <= 0.01, "*" p <= 0.05, "." p <= 0.1.
std::string significance_stars(double p);

// p-value cell with stars appended; values below 1e-4 print as "<0.0001".
std::string format_p(double p);

// Upper-tail probabilities used by the tests above.
double chi2_sf(double x, int df);
double normal_sf(double z);
double student_t_sf(double t, double df);

}  // namespace crcnet
