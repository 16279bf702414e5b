#include "crcnet/survival.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <string>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace crcnet {

namespace {

void check_observations(const std::vector<Observation>& obs) {
  for (const auto& o : obs) {
    if (!std::isfinite(o.time) || o.time < 0.0)
      throw std::invalid_argument("observation time must be finite and non-negative");
  }
}

std::vector<std::size_t> order_by_time(const std::vector<Observation>& obs, bool descending) {
  std::vector<std::size_t> idx(obs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return descending ? obs[a].time > obs[b].time : obs[a].time < obs[b].time;
  });
  return idx;
}

}  // namespace

double chi2_sf(double x, int df) {
  if (x <= 0.0) return 1.0;
  boost::math::chi_squared dist(df);
  return boost::math::cdf(boost::math::complement(dist, x));
}

double normal_sf(double z) {
  boost::math::normal dist;
  return boost::math::cdf(boost::math::complement(dist, z));
}

double student_t_sf(double t, double df) {
  boost::math::students_t dist(df);
  return boost::math::cdf(boost::math::complement(dist, t));
}

KMCurve km_estimate(const std::vector<Observation>& obs) {
  if (obs.empty()) throw std::invalid_argument("empty cohort");
  check_observations(obs);

  const auto idx = order_by_time(obs, /*descending=*/false);
  KMCurve curve;
  double s = 1.0;
  std::size_t i = 0;
  const std::size_t n = obs.size();
  while (i < n) {
    const double t = obs[idx[i]].time;
    const int at_risk = static_cast<int>(n - i);
    int deaths = 0;
    std::size_t j = i;
    for (; j < n && obs[idx[j]].time == t; ++j)
      if (obs[idx[j]].event) ++deaths;
    if (deaths > 0) {
      s *= 1.0 - static_cast<double>(deaths) / at_risk;
      curve.times.push_back(t);
      curve.survival.push_back(s);
      curve.at_risk.push_back(at_risk);
      curve.events.push_back(deaths);
      if (!curve.median && s <= 0.5) curve.median = t;
    }
    i = j;
  }
  return curve;
}

double km_survival_at(const KMCurve& curve, double t) {
  double s = 1.0;
  for (std::size_t i = 0; i < curve.times.size() && curve.times[i] <= t; ++i)
    s = curve.survival[i];
  return s;
}

LogRankResult logrank_test(const std::vector<std::vector<Observation>>& groups) {
  const std::size_t k = groups.size();
  if (k < 2) throw std::invalid_argument("log-rank test needs at least 2 groups");
  for (const auto& g : groups) {
    if (g.empty()) throw std::invalid_argument("log-rank group is empty");
    check_observations(g);
  }

  // Per-group times sorted ascending; at-risk counts maintained by sweep.
  std::vector<std::vector<Observation>> sorted(k);
  for (std::size_t g = 0; g < k; ++g) {
    sorted[g] = groups[g];
    std::sort(sorted[g].begin(), sorted[g].end(),
              [](const Observation& a, const Observation& b) { return a.time < b.time; });
  }

  std::vector<double> event_times;
  for (const auto& g : sorted)
    for (const auto& o : g)
      if (o.event) event_times.push_back(o.time);
  if (event_times.empty()) throw std::runtime_error("no events");
  std::sort(event_times.begin(), event_times.end());
  event_times.erase(std::unique(event_times.begin(), event_times.end()), event_times.end());

  std::vector<std::size_t> cursor(k, 0);  // first subject with time >= current t
  std::vector<double> observed(k, 0.0), expected(k, 0.0);
  Matrix var(k - 1, k - 1);

  for (double t : event_times) {
    double n_total = 0.0, d_total = 0.0;
    std::vector<double> n_g(k), d_g(k);
    for (std::size_t g = 0; g < k; ++g) {
      auto& v = sorted[g];
      while (cursor[g] < v.size() && v[cursor[g]].time < t) ++cursor[g];
      n_g[g] = static_cast<double>(v.size() - cursor[g]);
      double d = 0.0;
      for (std::size_t j = cursor[g]; j < v.size() && v[j].time == t; ++j)
        if (v[j].event) d += 1.0;
      d_g[g] = d;
      n_total += n_g[g];
      d_total += d;
    }
    if (d_total == 0.0) continue;
    const double hyper = n_total > 1.0
                             ? d_total * (n_total - d_total) / (n_total - 1.0)
                             : 0.0;
    for (std::size_t g = 0; g < k; ++g) {
      observed[g] += d_g[g];
      expected[g] += d_total * n_g[g] / n_total;
    }
    for (std::size_t g = 0; g + 1 < k; ++g) {
      for (std::size_t l = 0; l + 1 < k; ++l) {
        const double delta = g == l ? 1.0 : 0.0;
        var(g, l) += hyper * (n_g[g] / n_total) * (delta - n_g[l] / n_total);
      }
    }
  }

  LogRankResult result;
  result.df = static_cast<int>(k - 1);

  double max_diff = 0.0;
  for (std::size_t g = 0; g < k; ++g)
    max_diff = std::max(max_diff, std::abs(observed[g] - expected[g]));
  if (max_diff < 1e-12) {
    result.chi2 = 0.0;
    result.p = 1.0;
    return result;
  }

  std::vector<double> diff(k - 1), solved;
  for (std::size_t g = 0; g + 1 < k; ++g) diff[g] = observed[g] - expected[g];
  if (!cholesky_solve(var, diff, solved))
    throw std::runtime_error("degenerate log-rank variance");
  double chi2 = 0.0;
  for (std::size_t g = 0; g + 1 < k; ++g) chi2 += diff[g] * solved[g];
  result.chi2 = std::max(0.0, chi2);
  result.p = chi2_sf(result.chi2, result.df);
  return result;
}

double c_index(const std::vector<double>& risk, const std::vector<Observation>& obs) {
  if (risk.size() != obs.size())
    throw std::invalid_argument("risk and observation lengths differ");
  const std::size_t n = obs.size();
  check_observations(obs);

  // Per-subject partial counts; merged serially afterwards so the result is
  // identical for any thread count (all increments are multiples of 0.5 and
  // exactly representable anyway).
  std::vector<double> conc(n, 0.0), total(n, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double c = 0.0, tot = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      std::size_t early = i, late = j;
      if (obs[j].time < obs[i].time) {
        early = j;
        late = i;
      } else if (obs[i].time == obs[j].time) {
        continue;  // no ordering of failure times
      }
      if (!obs[early].event) continue;
      tot += 1.0;
      if (risk[early] > risk[late]) c += 1.0;
      else if (risk[early] == risk[late]) c += 0.5;
    }
    conc[i] = c;
    total[i] = tot;
  }
  double c_sum = 0.0, t_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    c_sum += conc[i];
    t_sum += total[i];
  }
  if (t_sum == 0.0) throw std::runtime_error("no comparable pairs");
  return c_sum / t_sum;
}

namespace {

std::vector<double> midranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && x[idx[j]] == x[idx[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j - 1) + 1.0;  // 1-based mid-rank
    for (std::size_t l = i; l < j; ++l) rank[idx[l]] = mid;
    i = j;
  }
  return rank;
}

}  // namespace

SpearmanResult spearman_test(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("length mismatch");
  const std::size_t n = x.size();
  if (n < 3) throw std::invalid_argument("spearman test needs at least 3 pairs");

  const auto rx = midranks(x);
  const auto ry = midranks(y);

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw std::runtime_error("zero rank variance");

  SpearmanResult res;
  res.rho = sxy / std::sqrt(sxx * syy);
  const double df = static_cast<double>(n) - 2.0;
  const double denom = 1.0 - res.rho * res.rho;
  if (denom <= 0.0) {
    res.p = 0.0;
  } else {
    const double t = std::abs(res.rho) * std::sqrt(df / denom);
    res.p = 2.0 * student_t_sf(t, df);
  }
  return res;
}

double cox_loglik(const std::vector<Observation>& obs, const Matrix& design,
                  const std::vector<double>& beta, std::vector<double>* score,
                  Matrix* info) {
  const std::size_t n = obs.size();
  const std::size_t p = design.cols;

  std::vector<double> eta(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double e = 0.0;
    for (std::size_t j = 0; j < p; ++j) e += design(i, j) * beta[j];
    eta[i] = e;
  }

  if (score) score->assign(p, 0.0);
  if (info) *info = Matrix(p, p);

  const auto idx = order_by_time(obs, /*descending=*/true);

  double ll = 0.0;
  double s0 = 0.0;
  std::vector<double> s1(p, 0.0), c1(p, 0.0), d1(p, 0.0);
  Matrix s2, c2;
  if (info) {
    s2 = Matrix(p, p);
    c2 = Matrix(p, p);
  }

  std::size_t i = 0;
  while (i < n) {
    const double t = obs[idx[i]].time;
    int deaths = 0;
    double c0 = 0.0;
    std::fill(c1.begin(), c1.end(), 0.0);
    if (info) std::fill(c2.a.begin(), c2.a.end(), 0.0);

    std::size_t j = i;
    for (; j < n && obs[idx[j]].time == t; ++j) {
      const std::size_t k = idx[j];
      const double r = std::exp(eta[k]);
      s0 += r;
      for (std::size_t a = 0; a < p; ++a) {
        const double xa = design(k, a);
        s1[a] += r * xa;
        if (info)
          for (std::size_t b = 0; b <= a; ++b) s2(a, b) += r * xa * design(k, b);
      }
      if (obs[k].event) {
        ++deaths;
        c0 += r;
        ll += eta[k];
        for (std::size_t a = 0; a < p; ++a) {
          const double xa = design(k, a);
          c1[a] += r * xa;
          if (score) (*score)[a] += xa;
          if (info)
            for (std::size_t b = 0; b <= a; ++b) c2(a, b) += r * xa * design(k, b);
        }
      }
    }

    // Efron correction: the l-th tied death sees the risk-set sums with a
    // fraction l/d of the deaths' own contributions removed.
    for (int l = 0; l < deaths; ++l) {
      const double f = static_cast<double>(l) / deaths;
      const double d0 = s0 - f * c0;
      ll -= std::log(d0);
      if (score || info) {
        for (std::size_t a = 0; a < p; ++a) d1[a] = (s1[a] - f * c1[a]) / d0;
        if (score)
          for (std::size_t a = 0; a < p; ++a) (*score)[a] -= d1[a];
        if (info) {
          for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = 0; b <= a; ++b)
              (*info)(a, b) += (s2(a, b) - f * c2(a, b)) / d0 - d1[a] * d1[b];
        }
      }
    }
    i = j;
  }

  if (info)
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = a + 1; b < p; ++b) (*info)(a, b) = (*info)(b, a);

  return ll;
}

CoxFit fit_cox(const std::vector<Observation>& obs,
               const std::vector<CovariateRow>& rows) {
  if (obs.size() != rows.size())
    throw std::invalid_argument("observation/covariate length mismatch");
  check_observations(obs);

  // Complete-case deletion.
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].complete()) keep.push_back(i);
  if (keep.empty()) throw std::runtime_error("no usable rows");

  const std::size_t p = rows[keep[0]].values.size();
  if (p == 0) throw std::invalid_argument("no covariates");
  const std::size_t n = keep.size();

  std::vector<Observation> sub(n);
  Matrix design(n, p);
  std::size_t n_events = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = rows[keep[i]];
    if (row.values.size() != p) throw std::invalid_argument("ragged covariate rows");
    sub[i] = obs[keep[i]];
    if (sub[i].event) ++n_events;
    for (std::size_t j = 0; j < p; ++j) design(i, j) = row.values[j];
  }
  if (n_events == 0) throw std::runtime_error("no events");

  std::vector<double> beta(p, 0.0), score;
  Matrix info;
  double ll = cox_loglik(sub, design, beta, &score, &info);

  CoxFit fit;
  const int max_iter = 50;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    double max_score = 0.0;
    for (double s : score) max_score = std::max(max_score, std::abs(s));
    if (max_score < 1e-9) {
      fit.converged = true;
      break;
    }

    std::vector<double> step;
    int bad = -1;
    if (!cholesky_solve(info, score, step, &bad)) throw collinear_error(bad);

    // Step-halving keeps the partial likelihood non-decreasing.
    double new_ll = 0.0;
    std::vector<double> cand(p);
    double scale = 1.0;
    for (int half = 0; half < 30; ++half) {
      for (std::size_t j = 0; j < p; ++j) cand[j] = beta[j] + scale * step[j];
      new_ll = cox_loglik(sub, design, cand, nullptr, nullptr);
      if (std::isfinite(new_ll) && new_ll >= ll) break;
      scale *= 0.5;
    }

    beta = cand;
    for (double b : beta)
      if (std::abs(b) > 500.0) throw std::runtime_error("separation");

    const double rel_change = std::abs(new_ll - ll) / (std::abs(ll) + 1e-9);
    ll = cox_loglik(sub, design, beta, &score, &info);
    if (rel_change < 1e-9) {
      fit.converged = true;
      ++iter;
      break;
    }
  }

  Matrix inv;
  int bad = -1;
  if (!cholesky_inverse(info, inv, &bad)) throw collinear_error(bad);

  fit.beta = beta;
  fit.loglik = ll;
  fit.n_used = n;
  fit.n_events = n_events;
  fit.iterations = iter;
  fit.se.resize(p);
  fit.hr.resize(p);
  fit.ci_low.resize(p);
  fit.ci_high.resize(p);
  fit.p.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    fit.se[j] = std::sqrt(inv(j, j));
    fit.hr[j] = std::exp(beta[j]);
    fit.ci_low[j] = std::exp(beta[j] - kWaldZ * fit.se[j]);
    fit.ci_high[j] = std::exp(beta[j] + kWaldZ * fit.se[j]);
    fit.p[j] = fit.se[j] > 0.0 ? 2.0 * normal_sf(std::abs(beta[j]) / fit.se[j]) : 1.0;
  }

  std::vector<double> lp(n);
  for (std::size_t i = 0; i < n; ++i) {
    double e = 0.0;
    for (std::size_t j = 0; j < p; ++j) e += design(i, j) * beta[j];
    lp[i] = e;
  }
  try {
    fit.c_index = c_index(lp, sub);
  } catch (const std::runtime_error&) {
    fit.c_index = 0.5;  // concordance undefined (no comparable pairs)
  }
  return fit;
}

std::string format_hr(const CoxFit& fit, std::size_t index) {
  if (index >= fit.hr.size()) throw std::out_of_range("coefficient index");
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f(%.2f,%.2f)", fit.hr[index],
                fit.ci_low[index], fit.ci_high[index]);
  return buf;
}

std::string significance_stars(double p) {
  if (p <= 0.001) return "***";
  if (p <= 0.01) return "**";
  if (p <= 0.05) return "*";
  if (p <= 0.1) return ".";
  return "";
}

std::string format_p(double p) {
  if (p < 1e-4) return "<0.0001" + significance_stars(p);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", p);
  return buf + significance_stars(p);
}

}  // namespace crcnet
