#pragma once

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "pseig/grid.hpp"
#include "pseig/sparse.hpp"

namespace pseig {

using ScalarFunction = std::function<double(const Point&)>;
using Matrix3 = std::array<std::array<double, 3>, 3>;

inline constexpr Matrix3 kIdentity3{{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};

/// Gauss-Legendre rule with n points on [0,1].
struct Quadrature1D {
  std::vector<double> points;
  std::vector<double> weights;
};
Quadrature1D gauss_legendre(int n);

/// Lagrange basis of the given order on [0,1] with equispaced nodes:
/// values and first derivatives at t.
void lagrange_basis(int order, double t, std::span<double> value, std::span<double> deriv);

/// Tensor-product Q1/Q2 reference element on [0,1]^dim with tensor Gauss
/// quadrature. Local nodes and quadrature points are ordered x fastest.
struct ReferenceElement {
  int dim = 0;
  int order = 1;
  int n_local = 0;
  int n_quad = 0;
  std::vector<Point> points;     // reference coordinates
  std::vector<double> weights;   // reference weights (sum to 1)
  std::vector<double> shape;     // [q * n_local + a]
  std::vector<double> grad;      // [(q * n_local + a) * dim + d], reference derivative

  double n(int q, int a) const { return shape[static_cast<std::size_t>(q * n_local + a)]; }
  double dn(int q, int a, int d) const {
    return grad[static_cast<std::size_t>((q * n_local + a) * dim + d)];
  }
};
ReferenceElement make_reference_element(int dim, int order, int points_per_dir = 0);

/// Physical position of reference point `ref` inside `cell`.
Point map_to_cell(const Mesh& mesh, std::size_t cell, const Point& ref);

/// Finite element function: coefficients per free DOF on a mesh/dofmap pair.
/// Eliminated nodes carry the value zero.
class ScalarField {
public:
  ScalarField() = default;
  ScalarField(std::shared_ptr<const Mesh> mesh, std::shared_ptr<const DofMap> dofs, Vector coeffs,
              bool periodic_extension = false);

  const Mesh& mesh() const { return *mesh_; }
  const DofMap& dofs() const { return *dofs_; }
  std::shared_ptr<const Mesh> mesh_ptr() const { return mesh_; }
  std::shared_ptr<const DofMap> dofs_ptr() const { return dofs_; }
  const Vector& coeffs() const { return coeffs_; }
  Vector& coeffs() { return coeffs_; }
  bool periodic_extension() const { return periodic_extension_; }

  /// Point value. With periodic extension, the expanding coordinates are
  /// reduced modulo the mesh length before lookup.
  double value(const Point& z) const;
  Point gradient(const Point& z) const;
  /// Value at a node (zero for eliminated nodes).
  double node_value(std::size_t node) const;
  ScalarFunction as_function() const;

private:
  Point reduce(const Point& z) const;

  std::shared_ptr<const Mesh> mesh_;
  std::shared_ptr<const DofMap> dofs_;
  Vector coeffs_;
  bool periodic_extension_ = false;
};

/// Coefficients of -div(rho D grad u) + V u = lambda rho u. Empty functions
/// mean rho = 1 and V = 0.
struct CoefficientSpec {
  ScalarFunction rho;
  ScalarFunction potential;
  Matrix3 diffusion = kIdentity3;
};

struct Pencil {
  SparseMatrix a; // stiffness + potential mass
  SparseMatrix b; // weighted mass
};

/// Sparsity pattern coupling every pair of DOFs that share an active cell.
SparseMatrix build_pattern(const Mesh& mesh, const DofMap& dofs, Exec exec = Exec::parallel);

/// Assemble (A, B) over the active cells. Throws DataError for negative or
/// non-finite rho and non-finite V.
Pencil assemble_pencil(const Mesh& mesh, const DofMap& dofs, const CoefficientSpec& coeff,
                       Exec exec = Exec::parallel);

struct CorrectorSystem {
  SparseMatrix k; // rho-weighted stiffness
  Vector f;       // f_j = -int rho e_i . grad v_j
};

/// Cell problem for direction `dir` (0-based, < p). Throws DataError when the
/// right-hand side is not orthogonal to constants.
CorrectorSystem assemble_corrector_system(const Mesh& mesh, const DofMap& dofs,
                                          const ScalarFunction& rho, int dir,
                                          Exec exec = Exec::parallel);

struct FieldNorms {
  double l2_error = 0.0;       // ||u - v||, rho-weighted
  double relative_error = 0.0; // ||u - v|| / ||v||
  double inner = 0.0;          // int rho u v
};

/// Quadrature-evaluated norms on the common mesh. Throws ConfigError when the
/// fields live on different meshes.
FieldNorms field_norms(const ScalarField& u, const ScalarField& v, const ScalarFunction& rho = {});

/// Nodal interpolant of f.
ScalarField interpolate(std::shared_ptr<const Mesh> mesh, std::shared_ptr<const DofMap> dofs,
                        const ScalarFunction& f);

/// int g over the active cells with tensor Gauss quadrature
/// (order+1 points per direction unless given).
double integrate(const Mesh& mesh, const ScalarFunction& g, int points_per_dir = 0);

} // namespace pseig
