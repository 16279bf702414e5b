#include "crcnet/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace crcnet {

int cholesky_factor(Matrix& m, double pivot_tol) {
  const std::size_t n = m.rows;
  // Scale-aware pivot floor: a column whose diagonal collapses relative to
  // the largest diagonal is treated as singular.
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(m(i, i)));
  const double floor = pivot_tol * std::max(max_diag, 1.0);

  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= m(j, k) * m(j, k);
    if (!(d > floor)) return static_cast<int>(j);
    d = std::sqrt(d);
    m(j, j) = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= m(i, k) * m(j, k);
      m(i, j) = s / d;
    }
  }
  return -1;
}

bool cholesky_solve(const Matrix& m, const std::vector<double>& b,
                    std::vector<double>& x, int* bad_pivot) {
  Matrix l = m;
  const int bad = cholesky_factor(l);
  if (bad >= 0) {
    if (bad_pivot) *bad_pivot = bad;
    return false;
  }
  const std::size_t n = m.rows;
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
    y[i] = s / l(i, i);
  }
  x.assign(n, 0.0);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
    x[ii] = s / l(ii, ii);
  }
  return true;
}

bool cholesky_inverse(const Matrix& m, Matrix& inv, int* bad_pivot) {
  const std::size_t n = m.rows;
  inv = Matrix(n, n);
  std::vector<double> e(n, 0.0), col;
  for (std::size_t j = 0; j < n; ++j) {
    std::fill(e.begin(), e.end(), 0.0);
    e[j] = 1.0;
    if (!cholesky_solve(m, e, col, bad_pivot)) return false;
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
  }
  return true;
}

void eigen_sym3(const std::array<double, 9>& m, std::array<double, 3>& vals,
                std::array<double, 9>& vecs) {
  double a[3][3] = {{m[0], m[1], m[2]}, {m[3], m[4], m[5]}, {m[6], m[7], m[8]}};
  double v[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = std::abs(a[0][1]) + std::abs(a[0][2]) + std::abs(a[1][2]);
    if (off == 0.0) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double apq = a[p][q];
        a[p][p] -= t * apq;
        a[q][q] += t * apq;
        a[p][q] = a[q][p] = 0.0;
        for (int k = 0; k < 3; ++k) {
          if (k != p && k != q) {
            const double akp = a[k][p], akq = a[k][q];
            a[k][p] = a[p][k] = c * akp - s * akq;
            a[k][q] = a[q][k] = s * akp + c * akq;
          }
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }

  int order[3] = {0, 1, 2};
  std::sort(order, order + 3,
            [&](int i, int j) { return a[i][i] > a[j][j]; });
  for (int c = 0; c < 3; ++c) {
    const int src = order[c];
    vals[c] = a[src][src];
    // Deterministic sign: largest-|entry| component positive.
    int arg = 0;
    for (int r = 1; r < 3; ++r)
      if (std::abs(v[r][src]) > std::abs(v[arg][src])) arg = r;
    const double sign = v[arg][src] < 0 ? -1.0 : 1.0;
    for (int r = 0; r < 3; ++r) vecs[r * 3 + c] = sign * v[r][src];
  }
}

}  // namespace crcnet
