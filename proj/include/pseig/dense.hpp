#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pseig/sparse.hpp"

namespace pseig {

/// Small row-major square matrix used for Rayleigh-Ritz and as an oracle.
struct DenseMatrix {
  std::size_t n = 0;
  std::vector<double> a;

  DenseMatrix() = default;
  explicit DenseMatrix(std::size_t size) : n(size), a(size * size, 0.0) {}
  static DenseMatrix identity(std::size_t size);
  static DenseMatrix from(const SparseMatrix& m);

  double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

struct DenseEigen {
  std::vector<double> values;                // ascending
  std::vector<std::vector<double>> vectors;  // Bs-orthonormal, vectors[k] pairs values[k]
};

/// All eigenpairs of M v = lambda Bs v (M symmetric, Bs SPD), via Cholesky
/// reduction to a standard problem and cyclic Jacobi rotations.
/// Throws DataError when Bs is not SPD.
DenseEigen dense_sym_eig(const DenseMatrix& m, const DenseMatrix& bs);
DenseEigen dense_sym_eig(const DenseMatrix& m);

/// Lower-triangular Cholesky factor in place; throws DataError on failure.
void dense_cholesky(DenseMatrix& a);
std::vector<double> dense_solve_spd(DenseMatrix a, std::span<const double> rhs);

} // namespace pseig
