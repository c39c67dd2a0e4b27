#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "pseig/sparse.hpp"

namespace pseig {

/// Reverse Cuthill-McKee permutation of the (symmetrised) pattern.
/// Returns perm with perm[new] = old.
std::vector<std::int32_t> reverse_cuthill_mckee(const SparseMatrix& m);

/// Bandwidth max |i - j| over the nonzeros of P M P^T.
std::size_t bandwidth(const SparseMatrix& m, std::span<const std::int32_t> perm);

/// Envelope (skyline) Cholesky factor of an SPD sparse matrix in RCM order.
class EnvelopeCholesky {
public:
  /// Throws ShiftTooLargeError on a non-positive pivot and SolverError when
  /// the envelope would exceed `max_entries`.
  explicit EnvelopeCholesky(const SparseMatrix& m, std::size_t max_entries = 350'000'000);

  void solve(std::span<const double> rhs, std::span<double> x) const;
  std::size_t rows() const { return n_; }
  std::size_t envelope_size() const { return values_.size(); }

private:
  std::size_t n_ = 0;
  std::vector<std::int32_t> perm_; // new -> old
  std::vector<std::int32_t> first_;
  std::vector<std::size_t> offset_;
  std::vector<double> values_;
};

using LinearOperator = std::function<void(std::span<const double>, std::span<double>)>;

struct CgOptions {
  double rel_tol = 1e-12;
  int max_iter = 20000;
  Exec exec = Exec::parallel;
};

struct CgResult {
  std::vector<double> x;
  int iterations = 0;
  double rel_residual = 0.0;
  bool converged = false;
  std::vector<double> residual_history; // preconditioned residual norms sqrt(r^T z)
};

/// Jacobi-preconditioned conjugate gradients for op(x) = b with SPD (or
/// consistent positive semidefinite) op. Throws ShiftTooLargeError when a
/// search direction has non-positive curvature.
CgResult conjugate_gradient(const LinearOperator& op, std::span<const double> diag,
                            std::span<const double> rhs, const CgOptions& opt,
                            std::span<const double> x0 = {});

enum class Backend : std::uint8_t { cholesky, cg };

struct ShiftInvertOptions {
  Backend backend = Backend::cholesky;
  CgOptions cg{};
  std::size_t max_envelope = 350'000'000;
};

/// The shift-and-invert operator P = (A - sigma B)^{-1}.
class ShiftInvert {
public:
  ShiftInvert(const SparseMatrix& a, const SparseMatrix& b, double sigma,
              const ShiftInvertOptions& opt = {});

  double sigma() const { return sigma_; }
  std::size_t rows() const { return n_; }
  Backend backend() const { return backend_; }

  /// x = (A - sigma B)^{-1} rhs
  void apply(std::span<const double> rhs, std::span<double> x) const;
  Vector apply(std::span<const double> rhs) const;

private:
  std::size_t n_ = 0;
  double sigma_ = 0.0;
  Backend backend_ = Backend::cholesky;
  CgOptions cg_{};
  SparseMatrix shifted_;
  Vector diag_;
  std::unique_ptr<EnvelopeCholesky> factor_;
};

Vector shift_invert_apply(const SparseMatrix& a, const SparseMatrix& b, double sigma,
                          std::span<const double> rhs, const ShiftInvertOptions& opt = {});

} // namespace pseig
