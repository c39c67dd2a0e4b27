#pragma once

#include <memory>
#include <random>
#include <vector>

#include "pseig/assembly.hpp"
#include "pseig/dense.hpp"
#include "pseig/grid.hpp"

namespace pseig::test {

struct Problem {
  std::shared_ptr<const Mesh> mesh;
  std::shared_ptr<const DofMap> dofs;
  Pencil pencil;
};

inline Problem box_problem(const DomainSpec& d, std::vector<int> cells, int order, const BoundarySpec& bc,
                           const CoefficientSpec& coeff = {}, Exec exec = Exec::parallel) {
  Problem pr;
  pr.mesh = std::make_shared<const Mesh>(build_box_mesh(d, cells, order));
  pr.dofs = std::make_shared<const DofMap>(build_dof_map(*pr.mesh, bc));
  pr.pencil = assemble_pencil(*pr.mesh, *pr.dofs, coeff, exec);
  return pr;
}

inline Problem unit_square_laplace(int n, Boundary b = Boundary::dirichlet) {
  return box_problem({1, 1, 1.0, 1.0}, {n, n}, 1, {b, b});
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937& gen, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(gen);
  return v;
}

inline DenseEigen dense_spectrum(const Pencil& p) {
  return dense_sym_eig(DenseMatrix::from(p.a), DenseMatrix::from(p.b));
}

} // namespace pseig::test
