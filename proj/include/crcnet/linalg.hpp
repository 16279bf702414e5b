#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace crcnet {

// Minimal dense row-major matrix; everything downstream is tiny (p x p with
// p the covariate count, or 3 x k for stain math).
struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

// In-place Cholesky factorization of a symmetric positive-definite matrix.
// Returns the index of the first non-positive pivot, or -1 on success.
int cholesky_factor(Matrix& m, double pivot_tol = 1e-12);

// Solves m * x = b for SPD m. Returns false (and leaves x untouched) when a
// pivot collapses, i.e. the system is singular to working precision.
bool cholesky_solve(const Matrix& m, const std::vector<double>& b,
                    std::vector<double>& x, int* bad_pivot = nullptr);

// Inverse of an SPD matrix via Cholesky; returns false when singular.
bool cholesky_inverse(const Matrix& m, Matrix& inv, int* bad_pivot = nullptr);

// Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi rotations.
// Eigenvalues are returned in descending order with matching unit
// eigenvectors (columns of `vecs`); the sign of each eigenvector is fixed so
// its largest-magnitude entry is positive.
void eigen_sym3(const std::array<double, 9>& m, std::array<double, 3>& vals,
                std::array<double, 9>& vecs);

}  // namespace crcnet
