#pragma once

#include <string>
#include <vector>

#include "pseig/solvers.hpp"
#include "pseig/sparse.hpp"

namespace pseig {

struct SolverConfig {
  double sigma = 0.0;
  double tol = 1e-10;
  int k_max = 100;
  Vector x0;     // empty: all ones
  Vector x_prev; // LOPCG x_{-1}; empty: first unit vector
  std::vector<Vector> deflation; // B-orthonormal vectors to project out
  ShiftInvertOptions backend{};
  Exec exec = Exec::parallel;

  void validate(std::size_t n) const;
};

struct EigResult {
  double eigenvalue = 0.0;
  Vector eigenvector; // B-normalised, largest-magnitude entry positive
  int iterations = 0;
  std::vector<double> residual_history; // index k: ||A x_k - lambda_k B x_k||_2, k = 0 is the start
  std::vector<double> rayleigh_history;
  bool converged = false;
  double sigma = 0.0;
};

/// x^T A x / x^T B x. Throws DataError when x^T B x <= 0.
double rayleigh_quotient(const SparseMatrix& a, const SparseMatrix& b, std::span<const double> x);

/// Shifted inverse power iteration x_k = P B x_{k-1}, B-normalised.
EigResult inverse_power(const SparseMatrix& a, const SparseMatrix& b, const SolverConfig& cfg);
EigResult inverse_power(const SparseMatrix& a, const SparseMatrix& b, const ShiftInvert& p,
                        const SolverConfig& cfg);

/// Locally optimal preconditioned CG with Rayleigh-Ritz over
/// span{x_{k-1}, P r_{k-1}, x_{k-2}}.
EigResult lopcg(const SparseMatrix& a, const SparseMatrix& b, const SolverConfig& cfg);
EigResult lopcg(const SparseMatrix& a, const SparseMatrix& b, const ShiftInvert& p,
                const SolverConfig& cfg);

struct DeflatedResult {
  std::vector<EigResult> pairs; // ascending
  bool converged = true;        // false when a sub-run stagnated (list is then partial)
};

/// m smallest eigenpairs by sequential LOPCG with B-orthogonal deflation.
DeflatedResult deflated_smallest_k(const SparseMatrix& a, const SparseMatrix& b, const SolverConfig& cfg,
                                   int m);
DeflatedResult deflated_smallest_k(const SparseMatrix& a, const SparseMatrix& b, const ShiftInvert& p,
                                   const SolverConfig& cfg, int m);

/// CSV with header k,residual,rayleigh.
void write_history_csv(const std::string& path, const EigResult& r);

/// Scale x so its entry of largest magnitude is positive.
void fix_sign(std::span<double> x);

} // namespace pseig
