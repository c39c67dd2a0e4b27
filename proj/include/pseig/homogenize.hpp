#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pseig/assembly.hpp"
#include "pseig/solvers.hpp"

namespace pseig {

enum class CorrectorBackend : std::uint8_t { automatic, cholesky, cg };

struct CorrectorOptions {
  CorrectorBackend backend = CorrectorBackend::automatic;
  double tol = 1e-10;             // relative residual of the corrector solve
  int max_iter = 50000;
  std::size_t cholesky_limit = 5'000; // automatic: Cholesky up to this many DOFs
  // Condition on the fixed-direction faces. Natural by default; Dirichlet
  // makes the system definite and skips the mean normalisation.
  Boundary y_boundary = Boundary::neumann;
  Exec exec = Exec::parallel;
};

/// Periodic (x) / natural (y) cell-problem solutions theta_i, one per
/// expanding direction, normalised to zero rho-weighted mean.
std::vector<ScalarField> solve_correctors(std::shared_ptr<const Mesh> cell, const ScalarFunction& rho,
                                          const CorrectorOptions& opt = {});

struct HomogenizedCoefficients {
  int p = 0;
  std::vector<double> d_bar; // p x p, row-major
  double c_bar = 0.0;

  double d(int i, int j) const { return d_bar[static_cast<std::size_t>(i * p + j)]; }
  bool diagonal(double tol) const;
  /// Default off-diagonal tolerance 1e-6 * trace / p.
  double default_offdiag_tol() const;
};

/// D_ij = int rho (delta_ij + d theta_j / d x_i), C = int rho over the cell.
HomogenizedCoefficients homogenized_coefficients(const Mesh& cell, const ScalarFunction& rho,
                                                 std::span<const ScalarField> theta);

struct LimitEigenpair {
  double nu = 0.0;
  std::vector<int> index;     // multi-index m (analytic case)
  double normalization = 0.0; // N = 2^{p/2} / sqrt(C)
  ScalarField numeric;        // set by the numeric fallback

  /// u_0 at x (only the first p coordinates are used).
  double value(const Point& x) const;
};

/// nu = pi^2 sum_i D_ii m_i^2 / C, u = N prod sin(m_i pi x_i), ascending in nu.
/// Throws ConfigError when D is not diagonal within tol (negative: default).
std::vector<LimitEigenpair> analytic_limit_eigenpairs(const HomogenizedCoefficients& hc, int m_max,
                                                      double tol = -1.0);

/// -div(D grad u) = nu C u on (0,1)^p with Dirichlet data, Q2 mesh.
std::vector<LimitEigenpair> numeric_limit_eigenpairs(const HomogenizedCoefficients& hc, int m_max,
                                                     int cells = 32);

/// Analytic when D is diagonal, numeric otherwise.
std::vector<LimitEigenpair> limit_eigenpairs(const HomogenizedCoefficients& hc, int m_max);

/// True when nu_m and nu_{m+1} coincide within 1e-6 nu_m.
bool degenerate(double nu_m, double nu_next);

/// x_i' = <x2,t_i>_B x2 + <x3,t_i>_B x3, B-renormalised. Throws SolverError
/// when a target is B-orthogonal to span{x2, x3}.
std::pair<Vector, Vector> align_degenerate_pair(std::span<const double> x2, std::span<const double> x3,
                                                std::span<const double> t2, std::span<const double> t3,
                                                const SparseMatrix& b);

struct HomogenizedModel {
  HomogenizedCoefficients coeffs;
  std::vector<ScalarField> correctors;
  std::vector<LimitEigenpair> limit;
};

HomogenizedModel homogenize(std::shared_ptr<const Mesh> cell, const ScalarFunction& rho, int m_max,
                            const CorrectorOptions& opt = {});

/// Flat key = value block: p, C, D entries, nu list and multi-indices.
std::string serialize(const HomogenizedModel& model);

} // namespace pseig
