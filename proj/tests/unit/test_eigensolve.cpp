#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "helpers.hpp"
#include "pseig/eigensolve.hpp"
#include "pseig/errors.hpp"
#include "pseig/pipeline.hpp"

using namespace pseig;
using std::numbers::pi;

namespace {

SparseMatrix diag(std::vector<double> d) { return SparseMatrix::diagonal(d); }

double b_distance_up_to_sign(const SparseMatrix& b, const Vector& x, const Vector& y) {
  Vector d = x;
  const double s = bilinear(b, x, y) < 0.0 ? 1.0 : -1.0;
  axpy(s, y, d);
  return std::sqrt(std::max(bilinear(b, d, d), 0.0));
}

} // namespace

TEST(Rayleigh, Examples) {
  const auto i2 = SparseMatrix::identity(2);
  EXPECT_DOUBLE_EQ(rayleigh_quotient(i2, i2, std::vector<double>{0.3, -2.0}), 1.0);
  EXPECT_DOUBLE_EQ(rayleigh_quotient(diag({1, 2}), i2, std::vector<double>{0.0, 1.0}), 2.0);
  EXPECT_DOUBLE_EQ(rayleigh_quotient(diag({1, 2}), diag({2, 1}), std::vector<double>{1.0, 1.0}), 1.0);
  EXPECT_THROW(rayleigh_quotient(i2, i2, std::vector<double>{0.0, 0.0}), DataError);
}

TEST(SolverConfig, Validation) {
  const auto a = diag({1, 2, 3});
  const auto b = SparseMatrix::identity(3);
  SolverConfig c;
  c.tol = 0.0;
  EXPECT_THROW(lopcg(a, b, c), ConfigError);
  c = {};
  c.k_max = 0;
  EXPECT_THROW(inverse_power(a, b, c), ConfigError);
  c = {};
  c.x0 = {1.0, 1.0};
  EXPECT_THROW(lopcg(a, b, c), ConfigError);
  c = {};
  c.x0 = {1.0, 0.0, 0.0};
  c.deflation = {{1.0, 0.0, 0.0}};
  EXPECT_THROW(inverse_power(a, b, c), SolverError);
}

TEST(InversePower, DiagonalPencil) {
  const auto a = diag({1, 2, 3});
  const auto b = SparseMatrix::identity(3);
  SolverConfig c;
  c.k_max = 500;
  const EigResult r0 = inverse_power(a, b, c);
  ASSERT_TRUE(r0.converged);
  EXPECT_NEAR(r0.eigenvalue, 1.0, 1e-12);
  EXPECT_NEAR(r0.eigenvector[0], 1.0, 1e-10);
  EXPECT_NEAR(bilinear(b, r0.eigenvector, r0.eigenvector), 1.0, 1e-10);

  c.sigma = 0.9;
  const EigResult r9 = inverse_power(a, b, c);
  ASSERT_TRUE(r9.converged);
  EXPECT_NEAR(r9.eigenvalue, 1.0, 1e-12);
  EXPECT_LT(r9.iterations, r0.iterations);
}

TEST(InversePower, ConvergenceFactorLaw) {
  std::vector<double> d{1.0, 1.5};
  for (int i = 0; i < 20; ++i) d.push_back(3.0 + i);
  const auto a = diag(d);
  const auto b = SparseMatrix::identity(d.size());
  for (double sigma : {0.0, 0.5, -1.0}) {
    SolverConfig c;
    c.sigma = sigma;
    c.tol = 1e-13;
    c.k_max = 1000;
    const EigResult r = inverse_power(a, b, c);
    ASSERT_TRUE(r.converged);
    const auto& h = r.residual_history;
    ASSERT_GE(h.size(), 7u);
    const std::size_t k = h.size() - 1;
    const double factor = std::pow(h[k] / h[k - 5], 0.2);
    const double expected = std::abs(1.0 - sigma) / std::abs(1.5 - sigma);
    EXPECT_NEAR(factor, expected, 0.1 * expected) << "sigma " << sigma;
  }
}

TEST(InversePower, LaplaceMatchesDense) {
  const auto pr = test::unit_square_laplace(20);
  const auto dense = test::dense_spectrum(pr.pencil);
  SolverConfig c;
  c.k_max = 500;
  c.tol = 1e-9;
  const EigResult r = inverse_power(pr.pencil.a, pr.pencil.b, c);
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.eigenvalue, dense.values[0], 1e-8);
  EXPECT_NEAR(r.eigenvalue, 2 * pi * pi, 0.15);
}

TEST(Lopcg, DiagonalPencil) {
  const auto a = diag({1, 2, 3});
  const auto b = SparseMatrix::identity(3);
  SolverConfig c;
  const EigResult r = lopcg(a, b, c);
  ASSERT_TRUE(r.converged);
  EXPECT_LE(r.iterations, 1);
  EXPECT_NEAR(r.eigenvalue, 1.0, 1e-14);

  c.x0 = {0.0, 1.0, 1.0};
  const EigResult s = lopcg(a, b, c);
  ASSERT_TRUE(s.converged);
  EXPECT_LE(s.iterations, 5);
  EXPECT_NEAR(s.eigenvalue, 1.0, 1e-10);

  c.x0 = {1.0, 1.0, 1.0};
  c.x_prev = {0.0, 1.0, -1.0};
  const EigResult t = lopcg(a, b, c);
  ASSERT_TRUE(t.converged);
  EXPECT_NEAR(t.eigenvalue, 1.0, 1e-10);
}

TEST(Lopcg, StagnationIsReported) {
  const auto pr = test::unit_square_laplace(16);
  SolverConfig c;
  c.k_max = 2;
  c.tol = 1e-14;
  const EigResult r = lopcg(pr.pencil.a, pr.pencil.b, c);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 2);
  EXPECT_EQ(r.residual_history.size(), 3u);
}

TEST(Deflation, DiagonalPencil) {
  const auto a = diag({1, 2, 3});
  const auto b = SparseMatrix::identity(3);
  SolverConfig c;
  c.x_prev = {0.3, 0.2, 0.1};
  c.x0 = {1.0, 0.7, 0.4};
  const auto r = deflated_smallest_k(a, b, c, 3);
  ASSERT_TRUE(r.converged);
  ASSERT_EQ(r.pairs.size(), 3u);
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(r.pairs[static_cast<std::size_t>(k)].eigenvalue, k + 1.0, 1e-10);
    EXPECT_NEAR(std::abs(r.pairs[static_cast<std::size_t>(k)].eigenvector[static_cast<std::size_t>(k)]), 1.0, 1e-8);
  }
}

TEST(Deflation, LaplaceDegeneratePair) {
  const auto pr = test::unit_square_laplace(16);
  SolverConfig c;
  c.k_max = 300;
  const auto r = deflated_smallest_k(pr.pencil.a, pr.pencil.b, c, 3);
  ASSERT_TRUE(r.converged);
  const auto dense = test::dense_spectrum(pr.pencil);
  EXPECT_NEAR(r.pairs[0].eigenvalue, 2 * pi * pi, 0.3);
  EXPECT_NEAR(r.pairs[1].eigenvalue, 5 * pi * pi, 1.5);
  EXPECT_NEAR(r.pairs[2].eigenvalue, 5 * pi * pi, 1.5);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(r.pairs[static_cast<std::size_t>(k)].eigenvalue, dense.values[static_cast<std::size_t>(k)], 1e-7);
  // The computed pair spans the dense eigenspace of the double eigenvalue.
  for (int k = 1; k <= 2; ++k) {
    const auto& x = r.pairs[static_cast<std::size_t>(k)].eigenvector;
    const double c1 = bilinear(pr.pencil.b, x, dense.vectors[1]);
    const double c2 = bilinear(pr.pencil.b, x, dense.vectors[2]);
    EXPECT_NEAR(c1 * c1 + c2 * c2, 1.0, 1e-7);
  }
}

TEST(Properties, DeflationOrthogonality) {
  CoefficientSpec coeff;
  coeff.rho = [](const Point& z) { return 1.0 + 0.5 * std::sin(2 * pi * z[0]) * std::sin(pi * z[1]); };
  coeff.potential = [](const Point& z) { return 20.0 * z[1] * z[1]; };
  const auto pr = test::box_problem({1, 1, 2.0, 1.0}, {16, 8}, 1, {Boundary::dirichlet, Boundary::dirichlet}, coeff);
  SolverConfig c;
  c.k_max = 400;
  for (double sigma : {0.0, 5.0}) {
    c.sigma = sigma;
    const auto r = deflated_smallest_k(pr.pencil.a, pr.pencil.b, c, 4);
    ASSERT_TRUE(r.converged);
    for (std::size_t i = 0; i < r.pairs.size(); ++i) {
      if (i) { EXPECT_LE(r.pairs[i - 1].eigenvalue, r.pairs[i].eigenvalue + 1e-10); }
      for (std::size_t j = 0; j < i; ++j)
        EXPECT_LE(std::abs(bilinear(pr.pencil.b, r.pairs[i].eigenvector, r.pairs[j].eigenvector)), 1e-8);
    }
  }
}

TEST(Properties, LopcgRayleighMonotone) {
  std::vector<test::Problem> problems;
  problems.push_back(test::unit_square_laplace(20));
  CoefficientSpec w;
  w.rho = [](const Point& z) { return 2.0 + std::cos(2 * pi * z[0]); };
  w.potential = [](const Point& z) { return 100.0 * std::sin(pi * z[0]) * std::sin(pi * z[0]) * z[1] * z[1]; };
  problems.push_back(test::box_problem({1, 1, 4.0, 1.0}, {40, 10}, 1, {Boundary::dirichlet, Boundary::dirichlet}, w));
  problems.push_back(test::box_problem({2, 1, 1.0, 1.0}, {6, 6, 6}, 2, {Boundary::periodic, Boundary::dirichlet}, w));
  for (const auto& pr : problems) {
    SolverConfig base;
    base.k_max = 400;
    const double lambda1 = lopcg(pr.pencil.a, pr.pencil.b, base).eigenvalue;
    for (double frac : {0.0, 0.5, 0.99}) {
      SolverConfig c = base;
      c.sigma = frac * lambda1;
      const EigResult r = lopcg(pr.pencil.a, pr.pencil.b, c);
      EXPECT_TRUE(r.converged);
      const auto& h = r.rayleigh_history;
      for (std::size_t k = 1; k < h.size(); ++k)
        EXPECT_LE(h[k], h[k - 1] + 1e-12 * std::max(1.0, std::abs(h[k - 1])));
    }
  }
}

TEST(Properties, OrderingPreservation) {
  ExperimentConfig cfg = default_config(Experiment::precond_compare);
  cfg.cells_per_unit = 12;
  const ShiftReport sh = experiment_shift(cfg);
  const auto mesh = expanding_mesh(cfg, 2.0);
  const DofMap d = build_dof_map(*mesh, {Boundary::dirichlet, Boundary::dirichlet});
  CoefficientSpec coeff;
  coeff.potential = as_function(expanding_potential(cfg, 2.0));
  const Pencil p = assemble_pencil(*mesh, d, coeff);
  SolverConfig c;
  c.k_max = 5000;
  c.tol = 1e-9;
  const EigResult r0 = inverse_power(p.a, p.b, c);
  c.sigma = sh.sigma;
  const EigResult rs = inverse_power(p.a, p.b, c);
  ASSERT_TRUE(r0.converged);
  ASSERT_TRUE(rs.converged);
  EXPECT_LT(rs.iterations, r0.iterations);
  EXPECT_NEAR(r0.eigenvalue, rs.eigenvalue, 1e-8);
  EXPECT_LE(b_distance_up_to_sign(p.b, r0.eigenvector, rs.eigenvector), 1e-6);
  EXPECT_NEAR(r0.eigenvalue, test::dense_spectrum(p).values[0], 1e-8);
}

TEST(Properties, OracleEquivalence) {
  std::vector<test::Problem> problems;
  problems.push_back(test::box_problem({1, 1, 1.0, 1.0}, {9, 9}, 1, {}));
  CoefficientSpec w;
  w.rho = [](const Point& z) { return 1.0 + std::pow(std::sin(pi * z[1]), 2) * (2.0 + std::cos(2 * pi * z[0])); };
  problems.push_back(test::box_problem({1, 1, 1.0, 1.0}, {12, 12}, 1, {Boundary::periodic, Boundary::dirichlet}, w));
  CoefficientSpec v;
  v.potential = [](const Point& z) { return 100.0 * std::pow(std::sin(pi * z[0]) * z[1], 2); };
  problems.push_back(test::box_problem({1, 1, 1.0, 1.0}, {6, 6}, 2, {Boundary::periodic, Boundary::dirichlet}, v));
  for (const auto& pr : problems) {
    ASSERT_LE(pr.dofs->n_free, 200u);
    const auto dense = test::dense_spectrum(pr.pencil);
    for (double frac : {0.0, 0.9}) {
      SolverConfig c;
      c.k_max = 3000;
      c.tol = 1e-10;
      c.sigma = frac * dense.values[0];
      for (int solver = 0; solver < 2; ++solver) {
        const EigResult r = solver ? lopcg(pr.pencil.a, pr.pencil.b, c) : inverse_power(pr.pencil.a, pr.pencil.b, c);
        ASSERT_TRUE(r.converged);
        EXPECT_NEAR(r.eigenvalue, dense.values[0], 1e-8);
        EXPECT_LE(b_distance_up_to_sign(pr.pencil.b, r.eigenvector, dense.vectors[0]), 1e-6);
      }
    }
  }
}

TEST(History, FixSign) {
  Vector x{0.1, -3.0, 2.0};
  fix_sign(x);
  EXPECT_EQ(x[1], 3.0);
  EXPECT_EQ(x[0], -0.1);
}
