#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "pseig/errors.hpp"
#include "pseig/grid.hpp"

using namespace pseig;

TEST(Grid, NodeAndCellCounts) {
  const Mesh a = build_box_mesh({1, 1, 1.0, 1.0}, std::vector<int>{2, 2}, 1);
  EXPECT_EQ(a.n_nodes(), 9u);
  EXPECT_EQ(a.n_cells(), 4u);

  const Mesh b = build_box_mesh({1, 1, 2.0, 1.0}, std::vector<int>{4, 2}, 2);
  EXPECT_EQ(b.n_nodes(), 45u);

  const Mesh c = build_box_mesh({2, 1, 1.0, 1.0}, std::vector<int>{10, 10, 10}, 1);
  EXPECT_EQ(c.n_nodes(), 1331u);
}

TEST(Grid, CoordinatesAreLatticePoints) {
  const Mesh m = build_box_mesh({1, 1, 3.0, 1.0}, std::vector<int>{7, 3}, 2);
  const double hx = 3.0 / 14.0;
  for (int i = 0; i < m.nodes_along(0); ++i) EXPECT_EQ(m.node_coord(0, i), i * hx);
  EXPECT_DOUBLE_EQ(m.node_coord(0, m.nodes_along(0) - 1), 3.0);
  EXPECT_DOUBLE_EQ(m.spacing(1), 1.0 / 3.0);
}

TEST(Grid, Errors) {
  EXPECT_THROW(build_box_mesh({1, 1, 1.0, 1.0}, std::vector<int>{2, 2, 2}, 1), ConfigError);
  EXPECT_THROW(build_box_mesh({1, 1, 1.0, 1.0}, std::vector<int>{2, 0}, 1), ConfigError);
  EXPECT_THROW(build_box_mesh({1, 1, 1.0, 1.0}, std::vector<int>{2, 2}, 3), ConfigError);
  EXPECT_THROW(build_box_mesh({2, 2, 1.0, 1.0}, std::vector<int>{2, 2, 2, 2}, 1), ConfigError);
  EXPECT_THROW(build_box_mesh({1, 1, -1.0, 1.0}, std::vector<int>{2, 2}, 1), ConfigError);
  const Mesh m = build_box_mesh({1, 1, 1.0, 1.0}, std::vector<int>{2, 2}, 1);
  EXPECT_THROW(mask_cells(m, [](const Point&) { return false; }), ConfigError);
}

TEST(Grid, DiskMask) {
  const Mesh m = build_box_mesh({1, 1, 4.0, 4.0}, std::vector<int>{4, 4}, 1);
  const Mesh d = mask_cells(m, [](const Point& z) { return std::hypot(z[0] - 2.0, z[1] - 2.0) < 2.0; });
  EXPECT_EQ(d.active_count(), 12u);
  EXPECT_FALSE(d.active(0));
  EXPECT_FALSE(d.active(3));
  EXPECT_FALSE(d.active(12));
  EXPECT_FALSE(d.active(15));

  const Mesh same = mask_cells(m, [](const Point&) { return true; });
  EXPECT_EQ(same.active_count(), m.n_cells());
  EXPECT_FALSE(same.masked());
}

TEST(Grid, SingleDiskMaskMatchesEnumeration) {
  const int n = 24;
  const Mesh m = build_box_mesh({1, 1, 2.0, 2.0}, std::vector<int>{n, n}, 1, {0.0, -1.0, 0.0});
  const Mesh d = mask_cells(m, [](const Point& z) { return std::hypot(z[0] - 1.0, z[1]) < 1.0; });
  std::size_t expected = 0;
  const double h = 2.0 / n;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const double x = (i + 0.5) * h, y = -1.0 + (j + 0.5) * h;
      if (std::hypot(x - 1.0, y) < 1.0) ++expected;
    }
  }
  EXPECT_EQ(d.active_count(), expected);
}

TEST(Grid, MaskIntersects) {
  const Mesh m = build_box_mesh({1, 1, 1.0, 1.0}, std::vector<int>{8, 8}, 1);
  const Mesh a = mask_cells(m, [](const Point& z) { return z[0] < 0.5; });
  const Mesh b = mask_cells(a, [](const Point& z) { return z[1] < 0.5; });
  EXPECT_EQ(a.active_count(), 32u);
  EXPECT_EQ(b.active_count(), 16u);
}

TEST(DofMap, OneDimensional) {
  const Mesh m = build_box_mesh({0, 1, 1.0, 1.0}, std::vector<int>{4}, 1);
  EXPECT_EQ(build_dof_map(m, {Boundary::dirichlet, Boundary::dirichlet}).n_free, 3u);
  EXPECT_EQ(build_dof_map(m, {Boundary::dirichlet, Boundary::periodic}).n_free, 4u);
  EXPECT_EQ(build_dof_map(m, {Boundary::dirichlet, Boundary::neumann}).n_free, 5u);
}

TEST(DofMap, PeriodicXDirichletY) {
  const Mesh m = build_box_mesh({1, 1, 1.0, 1.0}, std::vector<int>{2, 2}, 1);
  EXPECT_EQ(build_dof_map(m, {Boundary::periodic, Boundary::dirichlet}).n_free, 2u);
}

TEST(DofMap, AllDirichletCount) {
  for (int n1 : {2, 3, 7}) {
    for (int n2 : {2, 5}) {
      const Mesh m = build_box_mesh({1, 1, 1.0, 1.0}, std::vector<int>{n1, n2}, 1);
      EXPECT_EQ(build_dof_map(m, {Boundary::dirichlet, Boundary::dirichlet}).n_free,
                static_cast<std::size_t>((n1 - 1) * (n2 - 1)));
    }
  }
}

TEST(DofMap, Invariants) {
  const Mesh m = build_box_mesh({2, 1, 1.0, 1.0}, std::vector<int>{3, 4, 2}, 2);
  for (Boundary bx : {Boundary::dirichlet, Boundary::neumann, Boundary::periodic}) {
    for (Boundary by : {Boundary::dirichlet, Boundary::neumann, Boundary::periodic}) {
      const DofMap d = build_dof_map(m, {bx, by});
      EXPECT_GT(d.n_free, 0u);
      EXPECT_LE(d.n_free, m.n_nodes());
      std::vector<int> preimages(d.n_free, 0);
      std::set<std::size_t> reps;
      for (std::size_t n = 0; n < m.n_nodes(); ++n) {
        const std::size_t r = d.periodic_rep[n];
        EXPECT_EQ(d.periodic_rep[r], r);
        EXPECT_EQ(d.dof(n), d.dof(r));
        if (d.dof(n) != kNoDof) {
          ++preimages[static_cast<std::size_t>(d.dof(n))];
          reps.insert(r);
        }
      }
      for (int c : preimages) EXPECT_GE(c, 1);
      EXPECT_EQ(reps.size(), d.n_free);
    }
  }
}

TEST(DofMap, PeriodicIdentificationCommutes) {
  // Identify x then y by hand and compare with the map's classes.
  const int nx = 4, ny = 3;
  const Mesh m = build_box_mesh({1, 1, 1.0, 1.0}, std::vector<int>{nx, ny}, 1);
  const DofMap d = build_dof_map(m, {Boundary::periodic, Boundary::periodic});
  auto cls_xy = [&](int i, int j) { return (j % ny) * nx + (i % nx); };
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      for (int j2 = 0; j2 <= ny; ++j2) {
        for (int i2 = 0; i2 <= nx; ++i2) {
          const bool same = cls_xy(i, j) == cls_xy(i2, j2);
          const auto a = m.node_id({i, j, 0});
          const auto b = m.node_id({i2, j2, 0});
          EXPECT_EQ(same, d.dof(a) == d.dof(b));
        }
      }
    }
  }
  EXPECT_EQ(d.n_free, static_cast<std::size_t>(nx * ny));
}

TEST(DofMap, MaskedSubsetOfUnmasked) {
  const Mesh m = build_box_mesh({1, 1, 2.0, 2.0}, std::vector<int>{10, 10}, 1);
  const Mesh d = mask_cells(m, [](const Point& z) { return std::hypot(z[0] - 1.0, z[1] - 1.0) < 0.9; });
  for (Boundary b : {Boundary::dirichlet, Boundary::neumann}) {
    const DofMap full = build_dof_map(m, {b, b});
    for (BarrierMode mode : {BarrierMode::eliminate, BarrierMode::natural}) {
      const DofMap part = build_dof_map(d, {b, b}, mode);
      EXPECT_LT(part.n_free, full.n_free);
      for (std::size_t n = 0; n < m.n_nodes(); ++n) {
        if (part.dof(n) != kNoDof) { EXPECT_NE(full.dof(n), kNoDof); }
      }
    }
  }
}

TEST(DofMap, PeriodicWithIncompatibleMask) {
  const Mesh m = build_box_mesh({1, 1, 1.0, 1.0}, std::vector<int>{4, 4}, 1);
  const Mesh d = mask_cells(m, [](const Point& z) { return z[0] > 0.25 || z[1] > 0.5; });
  EXPECT_THROW(build_dof_map(d, {Boundary::periodic, Boundary::dirichlet}), ConfigError);
}

TEST(Mesh, Summary) {
  const Mesh m = build_box_mesh({1, 1, 1.0, 1.0}, std::vector<int>{2, 2}, 1);
  const DofMap d = build_dof_map(m, {Boundary::dirichlet, Boundary::dirichlet});
  const std::string s = summary(m, &d);
  EXPECT_NE(s.find("n_free"), std::string::npos);
}
