#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "helpers.hpp"
#include "pseig/assembly.hpp"
#include "pseig/errors.hpp"
#include "pseig/homogenize.hpp"

using namespace pseig;
using std::numbers::pi;

TEST(Quadrature, GaussLegendreIsExact) {
  for (int n = 1; n <= 5; ++n) {
    const auto q = gauss_legendre(n);
    for (int deg = 0; deg < 2 * n; ++deg) {
      double s = 0.0;
      for (std::size_t i = 0; i < q.points.size(); ++i) s += q.weights[i] * std::pow(q.points[i], deg);
      EXPECT_NEAR(s, 1.0 / (deg + 1), 1e-14);
    }
  }
}

TEST(Quadrature, ReferenceElementPartitionOfUnity) {
  for (int dim = 1; dim <= 3; ++dim) {
    for (int order = 1; order <= 2; ++order) {
      const auto el = make_reference_element(dim, order);
      double wsum = 0.0;
      for (int q = 0; q < el.n_quad; ++q) {
        wsum += el.weights[static_cast<std::size_t>(q)];
        double s = 0.0;
        double g[3] = {0.0, 0.0, 0.0};
        for (int a = 0; a < el.n_local; ++a) {
          s += el.n(q, a);
          for (int d = 0; d < dim; ++d) g[d] += el.dn(q, a, d);
        }
        EXPECT_NEAR(s, 1.0, 1e-14);
        for (int d = 0; d < dim; ++d) EXPECT_NEAR(g[d], 0.0, 1e-13);
      }
      EXPECT_NEAR(wsum, 1.0, 1e-14);
    }
  }
}

TEST(Assembly, ConstantsWithNeumann) {
  for (int order = 1; order <= 2; ++order) {
    const auto pr = test::box_problem({1, 1, 2.0, 0.5}, {6, 3}, order, {Boundary::neumann, Boundary::neumann});
    const std::vector<double> ones(pr.dofs->n_free, 1.0);
    const auto a1 = spmv(pr.pencil.a, ones);
    for (double v : a1) EXPECT_NEAR(v, 0.0, 1e-12);
    EXPECT_NEAR(bilinear(pr.pencil.b, ones, ones), 1.0, 1e-13);
  }
  // Masked domain: the mass of constants is the active area.
  auto mesh = std::make_shared<const Mesh>(mask_cells(build_box_mesh({1, 1, 1.0, 1.0}, std::vector<int>{8, 8}, 1),
                                                      [](const Point& z) { return z[0] + z[1] < 1.0; }));
  const DofMap d = build_dof_map(*mesh, {Boundary::neumann, Boundary::neumann}, BarrierMode::natural);
  const Pencil p = assemble_pencil(*mesh, d, {});
  const std::vector<double> ones(d.n_free, 1.0);
  EXPECT_NEAR(bilinear(p.b, ones, ones), mesh->active_count() / 64.0, 1e-13);
}

TEST(Assembly, ConstantPotentialMassIsExact) {
  CoefficientSpec c;
  c.potential = [](const Point&) { return 3.0; };
  const auto pr = test::box_problem({2, 1, 1.0, 2.0}, {3, 2, 4}, 2, {Boundary::neumann, Boundary::neumann}, c);
  const std::vector<double> ones(pr.dofs->n_free, 1.0);
  EXPECT_NEAR(bilinear(pr.pencil.a, ones, ones), 3.0 * 2.0, 1e-12);
  EXPECT_NEAR(bilinear(pr.pencil.b, ones, ones), 2.0, 1e-13);
}

TEST(Assembly, LaplaceGroundState) {
  const auto pr = test::unit_square_laplace(20);
  const auto e = test::dense_spectrum(pr.pencil);
  EXPECT_NEAR(e.values[0], 2 * pi * pi, 0.15);
  EXPECT_GT(e.values[0], 2 * pi * pi);
}

TEST(Assembly, SymmetryAndDefiniteness) {
  std::mt19937 gen(12);
  CoefficientSpec c;
  c.rho = [](const Point& z) { return 1.0 + 0.5 * std::sin(2 * pi * z[0]) * z[1]; };
  c.potential = [](const Point& z) { return 10.0 * z[0] * z[1]; };
  for (int order = 1; order <= 2; ++order) {
    for (Boundary bx : {Boundary::dirichlet, Boundary::periodic}) {
      const auto pr = test::box_problem({1, 1, 1.0, 1.0}, {6, 5}, order, {bx, Boundary::dirichlet}, c);
      EXPECT_LE(asymmetry(pr.pencil.a), 1e-12 * pr.pencil.a.max_abs());
      EXPECT_LE(asymmetry(pr.pencil.b), 1e-12 * pr.pencil.b.max_abs());
      for (int t = 0; t < 100; ++t) {
        const auto x = test::random_vector(pr.dofs->n_free, gen);
        EXPECT_GT(bilinear(pr.pencil.b, x, x), 0.0);
        EXPECT_GT(bilinear(pr.pencil.a, x, x), 0.0);
      }
    }
  }
}

TEST(Assembly, SerialMatchesParallel) {
  CoefficientSpec c;
  c.rho = [](const Point& z) { return 2.0 + std::cos(2 * pi * z[0]) + z[2]; };
  c.potential = [](const Point& z) { return 50.0 * std::sin(pi * z[1]) * std::sin(pi * z[1]); };
  const DomainSpec d{2, 1, 1.0, 1.0};
  const auto s = test::box_problem(d, {5, 4, 3}, 2, {Boundary::periodic, Boundary::dirichlet}, c, Exec::serial);
  const auto p = test::box_problem(d, {5, 4, 3}, 2, {Boundary::periodic, Boundary::dirichlet}, c, Exec::parallel);
  ASSERT_TRUE(s.pencil.a.same_pattern(p.pencil.a));
  const double sa = s.pencil.a.max_abs(), sb = s.pencil.b.max_abs();
  for (std::size_t k = 0; k < s.pencil.a.nnz(); ++k) {
    EXPECT_NEAR(s.pencil.a.values()[k], p.pencil.a.values()[k], 1e-12 * sa);
    EXPECT_NEAR(s.pencil.b.values()[k], p.pencil.b.values()[k], 1e-12 * sb);
  }
}

TEST(Assembly, NestedMeshesBoundFromAbove) {
  // Exact Dirichlet Laplace eigenvalues on (0,2)x(0,1): pi^2 (i^2/4 + j^2).
  std::vector<double> exact;
  for (int i = 1; i <= 6; ++i) {
    for (int j = 1; j <= 3; ++j) exact.push_back(pi * pi * (i * i / 4.0 + j * j));
  }
  std::sort(exact.begin(), exact.end());
  std::vector<double> prev;
  for (int n : {2, 4, 8}) {
    const auto pr = test::box_problem({1, 1, 2.0, 1.0}, {2 * n, n}, 1, {Boundary::dirichlet, Boundary::dirichlet});
    const auto e = test::dense_spectrum(pr.pencil);
    const std::size_t m = std::min<std::size_t>(4, e.values.size());
    for (std::size_t k = 0; k < m; ++k) {
      EXPECT_GE(e.values[k], exact[k] - 1e-9);
      if (!prev.empty() && k < prev.size()) { EXPECT_LE(e.values[k], prev[k] + 1e-9); }
    }
    prev.assign(e.values.begin(), e.values.begin() + static_cast<std::ptrdiff_t>(m));
  }
}

TEST(Assembly, BadCoefficients) {
  CoefficientSpec neg;
  neg.rho = [](const Point& z) { return z[0] - 0.5; };
  EXPECT_THROW(test::box_problem({1, 1, 1.0, 1.0}, {4, 4}, 1, {}, neg), DataError);
  CoefficientSpec nan;
  nan.potential = [](const Point&) { return std::numeric_limits<double>::quiet_NaN(); };
  EXPECT_THROW(test::box_problem({1, 1, 1.0, 1.0}, {4, 4}, 1, {}, nan), DataError);
}

TEST(Corrector, TrivialWeightsGiveZeroRhs) {
  auto mesh = std::make_shared<const Mesh>(build_box_mesh({1, 1, 1.0, 1.0}, std::vector<int>{8, 8}, 1));
  const DofMap d = build_dof_map(*mesh, {Boundary::periodic, Boundary::neumann});
  for (const ScalarFunction& rho : std::vector<ScalarFunction>{
           [](const Point&) { return 1.0; }, [](const Point& z) { return 1.0 + z[1] * z[1]; }}) {
    const auto sys = assemble_corrector_system(*mesh, d, rho, 0);
    for (double f : sys.f) EXPECT_NEAR(f, 0.0, 1e-14);
  }
}

TEST(Corrector, HarmonicMean) {
  auto mesh = std::make_shared<const Mesh>(build_box_mesh({1, 1, 1.0, 1.0}, std::vector<int>{64, 2}, 2));
  const ScalarFunction rho = [](const Point& z) { return 2.0 + std::cos(2 * pi * z[0]); };
  const auto theta = solve_correctors(mesh, rho);
  const auto hc = homogenized_coefficients(*mesh, rho, theta);
  EXPECT_NEAR(hc.d(0, 0), std::sqrt(3.0), 1e-6);
  EXPECT_NEAR(hc.c_bar, 2.0, 1e-10);
}

TEST(Corrector, DirectionMustExpand) {
  auto mesh = std::make_shared<const Mesh>(build_box_mesh({1, 1, 1.0, 1.0}, std::vector<int>{8, 2}, 1));
  const DofMap d = build_dof_map(*mesh, {Boundary::periodic, Boundary::neumann});
  EXPECT_THROW(assemble_corrector_system(*mesh, d, [](const Point&) { return 1.0; }, 1), ConfigError);
}

TEST(FieldNorms, Examples) {
  auto mesh = std::make_shared<const Mesh>(build_box_mesh({1, 1, 1.0, 1.0}, std::vector<int>{32, 32}, 1));
  auto dofs = std::make_shared<const DofMap>(build_dof_map(*mesh, {Boundary::dirichlet, Boundary::dirichlet}));
  const ScalarField u = interpolate(mesh, dofs, [](const Point& z) { return std::sin(pi * z[0]) * std::sin(pi * z[1]); });
  const ScalarField zero(mesh, dofs, Vector(dofs->n_free, 0.0));
  EXPECT_NEAR(field_norms(u, zero).l2_error, 0.5, 2e-3);
  EXPECT_EQ(field_norms(u, u).l2_error, 0.0);

  Vector c = u.coeffs();
  const double n = std::sqrt(field_norms(u, u).inner);
  for (double& v : c) v /= n;
  const ScalarField un(mesh, dofs, c);
  for (double& v : c) v = -v;
  const ScalarField vn(mesh, dofs, c);
  EXPECT_NEAR(field_norms(un, vn).relative_error, 2.0, 1e-12);

  auto other = std::make_shared<const Mesh>(build_box_mesh({1, 1, 1.0, 1.0}, std::vector<int>{4, 4}, 1));
  auto od = std::make_shared<const DofMap>(build_dof_map(*other, {}));
  EXPECT_THROW(field_norms(u, ScalarField(other, od, Vector(od->n_free, 0.0))), ConfigError);
}

TEST(ScalarField, PeriodicExtensionAndInterpolation) {
  auto mesh = std::make_shared<const Mesh>(build_box_mesh({1, 1, 1.0, 1.0}, std::vector<int>{10, 10}, 2));
  auto dofs = std::make_shared<const DofMap>(build_dof_map(*mesh, {Boundary::periodic, Boundary::dirichlet}));
  const auto f = [](const Point& z) { return std::cos(2 * pi * z[0]) * z[1] * (1.0 - z[1]); };
  const ScalarField u = interpolate(mesh, dofs, f);
  const ScalarField e(mesh, dofs, u.coeffs(), true);
  const Point a{0.37, 0.41, 0.0}, b{3.37, 0.41, 0.0};
  EXPECT_NEAR(e.value(b), e.value(a), 1e-12);
  EXPECT_NEAR(u.value(a), f(a), 1e-3);
  // Q2 interpolates quadratics exactly in y.
  EXPECT_NEAR(u.value({0.0, 0.25, 0.0}), f({0.0, 0.25, 0.0}), 1e-14);
}

TEST(Integrate, Polynomial) {
  const Mesh m = build_box_mesh({2, 1, 1.0, 1.0}, std::vector<int>{2, 3, 2}, 2);
  EXPECT_NEAR(integrate(m, [](const Point& z) { return z[0] * z[0] * z[1] * z[2]; }), 1.0 / 12.0, 1e-14);
}
