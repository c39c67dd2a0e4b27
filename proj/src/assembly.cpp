#include "pseig/assembly.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <string>

#include "pseig/errors.hpp"

namespace pseig {

Quadrature1D gauss_legendre(int n) {
  if (n < 1 || n > 32) throw ConfigError("gauss_legendre: point count must be in [1, 32]");
  Quadrature1D q;
  q.points.resize(static_cast<std::size_t>(n));
  q.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute the derivative at the converged root
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = pk;
    }
    dp = n == 1 ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    const auto j = static_cast<std::size_t>(n - 1 - i);
    q.points[j] = 0.5 * (x + 1.0);
    q.weights[j] = 0.5 * w;
  }
  return q;
}

void lagrange_basis(int order, double t, std::span<double> value, std::span<double> deriv) {
  if (order == 1) {
    value[0] = 1.0 - t;
    value[1] = t;
    deriv[0] = -1.0;
    deriv[1] = 1.0;
  } else if (order == 2) {
    value[0] = 2.0 * (t - 0.5) * (t - 1.0);
    value[1] = -4.0 * t * (t - 1.0);
    value[2] = 2.0 * t * (t - 0.5);
    deriv[0] = 4.0 * t - 3.0;
    deriv[1] = -8.0 * t + 4.0;
    deriv[2] = 4.0 * t - 1.0;
  } else {
    throw ConfigError("lagrange_basis: order must be 1 or 2");
  }
}

ReferenceElement make_reference_element(int dim, int order, int points_per_dir) {
  if (dim < 1 || dim > kMaxDim) throw ConfigError("reference element: dimension must be 1..3");
  if (order != 1 && order != 2) throw ConfigError("reference element: order must be 1 or 2");
  const int nq1 = points_per_dir > 0 ? points_per_dir : order + 1;
  const Quadrature1D rule = gauss_legendre(nq1);
  const int n1 = order + 1;

  ReferenceElement e;
  e.dim = dim;
  e.order = order;
  e.n_local = 1;
  e.n_quad = 1;
  for (int d = 0; d < dim; ++d) {
    e.n_local *= n1;
    e.n_quad *= nq1;
  }
  // 1D tables
  std::vector<double> v1(static_cast<std::size_t>(nq1 * n1)), d1(static_cast<std::size_t>(nq1 * n1));
  for (int q = 0; q < nq1; ++q) {
    lagrange_basis(order, rule.points[static_cast<std::size_t>(q)],
                   std::span<double>(v1).subspan(static_cast<std::size_t>(q * n1), static_cast<std::size_t>(n1)),
                   std::span<double>(d1).subspan(static_cast<std::size_t>(q * n1), static_cast<std::size_t>(n1)));
  }
  e.points.resize(static_cast<std::size_t>(e.n_quad));
  e.weights.resize(static_cast<std::size_t>(e.n_quad));
  e.shape.resize(static_cast<std::size_t>(e.n_quad * e.n_local));
  e.grad.resize(static_cast<std::size_t>(e.n_quad * e.n_local * dim));
  for (int q = 0; q < e.n_quad; ++q) {
    int qi[kMaxDim] = {0, 0, 0};
    int rem = q;
    double w = 1.0;
    Point pt{0.0, 0.0, 0.0};
    for (int d = 0; d < dim; ++d) {
      qi[d] = rem % nq1;
      rem /= nq1;
      pt[static_cast<std::size_t>(d)] = rule.points[static_cast<std::size_t>(qi[d])];
      w *= rule.weights[static_cast<std::size_t>(qi[d])];
    }
    e.points[static_cast<std::size_t>(q)] = pt;
    e.weights[static_cast<std::size_t>(q)] = w;
    for (int a = 0; a < e.n_local; ++a) {
      int ai[kMaxDim] = {0, 0, 0};
      int ra = a;
      for (int d = 0; d < dim; ++d) {
        ai[d] = ra % n1;
        ra /= n1;
      }
      double val = 1.0;
      for (int d = 0; d < dim; ++d) val *= v1[static_cast<std::size_t>(qi[d] * n1 + ai[d])];
      e.shape[static_cast<std::size_t>(q * e.n_local + a)] = val;
      for (int d = 0; d < dim; ++d) {
        double g = 1.0;
        for (int k = 0; k < dim; ++k) {
          const auto idx = static_cast<std::size_t>(qi[k] * n1 + ai[k]);
          g *= (k == d) ? d1[idx] : v1[idx];
        }
        e.grad[static_cast<std::size_t>((q * e.n_local + a) * dim + d)] = g;
      }
    }
  }
  return e;
}

Point map_to_cell(const Mesh& mesh, std::size_t cell, const Point& ref) {
  const Index c = mesh.cell_index(cell);
  Point z{0.0, 0.0, 0.0};
  for (int d = 0; d < mesh.dim(); ++d) {
    const auto k = static_cast<std::size_t>(d);
    z[k] = mesh.origin()[k] + (c[k] + ref[k]) * mesh.spacing(d);
  }
  return z;
}

// ---------------------------------------------------------------- ScalarField

ScalarField::ScalarField(std::shared_ptr<const Mesh> mesh, std::shared_ptr<const DofMap> dofs,
                         Vector coeffs, bool periodic_extension)
    : mesh_(std::move(mesh)), dofs_(std::move(dofs)), coeffs_(std::move(coeffs)),
      periodic_extension_(periodic_extension) {
  if (!mesh_ || !dofs_) throw ConfigError("ScalarField: mesh and dofmap are required");
  if (coeffs_.size() != dofs_->n_free) {
    throw DataError("ScalarField: coefficient count " + std::to_string(coeffs_.size()) +
                    " does not match " + std::to_string(dofs_->n_free) + " free DOFs");
  }
}

Point ScalarField::reduce(const Point& z) const {
  if (!periodic_extension_) return z;
  Point r = z;
  for (int d = 0; d < mesh_->domain().p; ++d) {
    const auto k = static_cast<std::size_t>(d);
    const double period = mesh_->length(d);
    double t = std::fmod(z[k] - mesh_->origin()[k], period);
    if (t < 0.0) t += period;
    r[k] = mesh_->origin()[k] + t;
  }
  return r;
}

double ScalarField::node_value(std::size_t node) const {
  const auto k = dofs_->dof(node);
  return k == kNoDof ? 0.0 : coeffs_[static_cast<std::size_t>(k)];
}

double ScalarField::value(const Point& z) const {
  Point local;
  const std::size_t cell = mesh_->locate(reduce(z), local);
  const int dim = mesh_->dim();
  const int n1 = mesh_->order() + 1;
  double v1[kMaxDim][3];
  double d1[kMaxDim][3];
  for (int d = 0; d < dim; ++d) lagrange_basis(mesh_->order(), local[static_cast<std::size_t>(d)], v1[d], d1[d]);
  std::size_t nodes[27];
  const int nloc = mesh_->nodes_per_cell();
  mesh_->cell_nodes(cell, std::span<std::size_t>(nodes, static_cast<std::size_t>(nloc)));
  double s = 0.0;
  for (int a = 0; a < nloc; ++a) {
    double w = 1.0;
    int r = a;
    for (int d = 0; d < dim; ++d) {
      w *= v1[d][r % n1];
      r /= n1;
    }
    s += w * node_value(nodes[a]);
  }
  return s;
}

Point ScalarField::gradient(const Point& z) const {
  Point local;
  const std::size_t cell = mesh_->locate(reduce(z), local);
  const int dim = mesh_->dim();
  const int n1 = mesh_->order() + 1;
  double v1[kMaxDim][3];
  double d1[kMaxDim][3];
  for (int d = 0; d < dim; ++d) lagrange_basis(mesh_->order(), local[static_cast<std::size_t>(d)], v1[d], d1[d]);
  std::size_t nodes[27];
  const int nloc = mesh_->nodes_per_cell();
  mesh_->cell_nodes(cell, std::span<std::size_t>(nodes, static_cast<std::size_t>(nloc)));
  Point g{0.0, 0.0, 0.0};
  for (int a = 0; a < nloc; ++a) {
    int ai[kMaxDim] = {0, 0, 0};
    int r = a;
    for (int d = 0; d < dim; ++d) {
      ai[d] = r % n1;
      r /= n1;
    }
    const double u = node_value(nodes[a]);
    for (int d = 0; d < dim; ++d) {
      double w = 1.0;
      for (int k = 0; k < dim; ++k) w *= (k == d) ? d1[k][ai[k]] : v1[k][ai[k]];
      g[static_cast<std::size_t>(d)] += w * u / mesh_->spacing(d);
    }
  }
  return g;
}

ScalarFunction ScalarField::as_function() const {
  auto self = std::make_shared<const ScalarField>(*this);
  return [self](const Point& z) { return self->value(z); };
}

// ---------------------------------------------------------------- pattern

SparseMatrix build_pattern(const Mesh& mesh, const DofMap& dofs, Exec exec) {
  const std::size_t n = dofs.n_free;
  if (n == 0) throw ConfigError("build_pattern: no free DOFs");
  // preimage nodes of every dof
  std::vector<std::size_t> pre_ptr(n + 1, 0);
  for (std::size_t node = 0; node < mesh.n_nodes(); ++node) {
    const auto k = dofs.dof(node);
    if (k != kNoDof) ++pre_ptr[static_cast<std::size_t>(k) + 1];
  }
  for (std::size_t i = 0; i < n; ++i) pre_ptr[i + 1] += pre_ptr[i];
  std::vector<std::size_t> pre(pre_ptr[n]);
  {
    std::vector<std::size_t> fill(pre_ptr.begin(), pre_ptr.end() - 1);
    for (std::size_t node = 0; node < mesh.n_nodes(); ++node) {
      const auto k = dofs.dof(node);
      if (k != kNoDof) pre[fill[static_cast<std::size_t>(k)]++] = node;
    }
  }

  const int nloc = mesh.nodes_per_cell();
  auto row_entries = [&](std::size_t row, std::vector<std::int32_t>& out) {
    out.clear();
    std::size_t around[8];
    std::size_t nodes[27];
    for (std::size_t p = pre_ptr[row]; p < pre_ptr[row + 1]; ++p) {
      const int count = mesh.cells_around(pre[p], around);
      for (int c = 0; c < count; ++c) {
        if (!mesh.active(around[c])) continue;
        mesh.cell_nodes(around[c], std::span<std::size_t>(nodes, static_cast<std::size_t>(nloc)));
        for (int a = 0; a < nloc; ++a) {
          const auto k = dofs.dof(nodes[a]);
          if (k != kNoDof) out.push_back(k);
        }
      }
    }
    out.push_back(static_cast<std::int32_t>(row));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  };

  std::vector<std::size_t> rp(n + 1, 0);
  const auto rows = static_cast<std::ptrdiff_t>(n);
  if (exec == Exec::serial) {
    std::vector<std::int32_t> buf;
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
      row_entries(static_cast<std::size_t>(i), buf);
      rp[static_cast<std::size_t>(i) + 1] = buf.size();
    }
  } else {
#pragma omp parallel
    {
      std::vector<std::int32_t> buf;
#pragma omp for schedule(static)
      for (std::ptrdiff_t i = 0; i < rows; ++i) {
        row_entries(static_cast<std::size_t>(i), buf);
        rp[static_cast<std::size_t>(i) + 1] = buf.size();
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) rp[i + 1] += rp[i];
  std::vector<std::int32_t> cols(rp[n]);
  auto fill_row = [&](std::size_t i, std::vector<std::int32_t>& buf) {
    row_entries(i, buf);
    std::copy(buf.begin(), buf.end(), cols.begin() + static_cast<std::ptrdiff_t>(rp[i]));
  };
  if (exec == Exec::serial) {
    std::vector<std::int32_t> buf;
    for (std::ptrdiff_t i = 0; i < rows; ++i) fill_row(static_cast<std::size_t>(i), buf);
  } else {
#pragma omp parallel
    {
      std::vector<std::int32_t> buf;
#pragma omp for schedule(static)
      for (std::ptrdiff_t i = 0; i < rows; ++i) fill_row(static_cast<std::size_t>(i), buf);
    }
  }
  return SparseMatrix::from_pattern(n, std::move(rp), std::move(cols));
}

// ---------------------------------------------------------------- element loop

namespace {

struct Scratch {
  std::vector<std::size_t> nodes;
  std::vector<std::int32_t> dofs;
  std::vector<double> ke;
  std::vector<double> me;
  std::vector<double> fe;
  std::vector<double> grad; // physical gradients [a * dim + d]
};

enum Fault : int { none = 0, negative_rho = 1, nonfinite_rho = 2, nonfinite_v = 3 };

// Cells sorted into colours such that two cells of one colour never share a
// node, including across periodic faces: per direction the colour is c mod 2,
// with the last cell of an odd count given its own colour.
std::vector<std::vector<std::size_t>> colour_cells(const Mesh& mesh) {
  std::vector<std::vector<std::size_t>> colours(27);
  for (std::size_t cell = 0; cell < mesh.n_cells(); ++cell) {
    if (!mesh.active(cell)) continue;
    const Index c = mesh.cell_index(cell);
    int colour = 0;
    int stride = 1;
    for (int d = 0; d < mesh.dim(); ++d) {
      const int n = mesh.cells()[static_cast<std::size_t>(d)];
      const int ci = c[static_cast<std::size_t>(d)];
      const int cd = (n > 1 && n % 2 == 1 && ci == n - 1) ? 2 : ci % 2;
      colour += cd * stride;
      stride *= 3;
    }
    colours[static_cast<std::size_t>(colour)].push_back(cell);
  }
  return colours;
}

template <class Kernel>
void for_each_cell(const Mesh& mesh, Exec exec, const Kernel& kernel) {
  const int nloc = mesh.nodes_per_cell();
  auto make_scratch = [&] {
    Scratch s;
    s.nodes.resize(static_cast<std::size_t>(nloc));
    s.dofs.resize(static_cast<std::size_t>(nloc));
    s.ke.resize(static_cast<std::size_t>(nloc * nloc));
    s.me.resize(static_cast<std::size_t>(nloc * nloc));
    s.fe.resize(static_cast<std::size_t>(nloc));
    s.grad.resize(static_cast<std::size_t>(nloc * mesh.dim()));
    return s;
  };
  if (exec == Exec::serial) {
    Scratch s = make_scratch();
    for (std::size_t cell = 0; cell < mesh.n_cells(); ++cell) {
      if (mesh.active(cell)) kernel(cell, s);
    }
    return;
  }
  const auto colours = colour_cells(mesh);
  for (const auto& list : colours) {
    const auto count = static_cast<std::ptrdiff_t>(list.size());
    if (count == 0) continue;
#pragma omp parallel
    {
      Scratch s = make_scratch();
#pragma omp for schedule(static)
      for (std::ptrdiff_t i = 0; i < count; ++i) kernel(list[static_cast<std::size_t>(i)], s);
    }
  }
}

void raise_fault(int fault) {
  switch (fault) {
    case negative_rho: throw DataError("assembly: negative weight rho at a quadrature point");
    case nonfinite_rho: throw DataError("assembly: non-finite weight rho at a quadrature point");
    case nonfinite_v: throw DataError("assembly: non-finite potential at a quadrature point");
    default: break;
  }
}

void fill_gradients(const ReferenceElement& ref, const Mesh& mesh, int q, Scratch& s) {
  for (int a = 0; a < ref.n_local; ++a) {
    for (int d = 0; d < ref.dim; ++d) {
      s.grad[static_cast<std::size_t>(a * ref.dim + d)] = ref.dn(q, a, d) / mesh.spacing(d);
    }
  }
}

double cell_volume(const Mesh& mesh) {
  double v = 1.0;
  for (int d = 0; d < mesh.dim(); ++d) v *= mesh.spacing(d);
  return v;
}

void gather_dofs(const Mesh& mesh, const DofMap& dofs, std::size_t cell, Scratch& s) {
  mesh.cell_nodes(cell, s.nodes);
  for (std::size_t a = 0; a < s.nodes.size(); ++a) s.dofs[a] = dofs.dof(s.nodes[a]);
}

} // namespace

namespace {

Pencil assemble_impl(const Mesh& mesh, const DofMap& dofs, const CoefficientSpec& coeff, Exec exec,
                     bool with_mass) {
  const int dim = mesh.dim();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double dij = coeff.diffusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      const double dji = coeff.diffusion[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
      if (!std::isfinite(dij) || std::abs(dij - dji) > 1e-14 * (std::abs(dij) + std::abs(dji))) {
        throw ConfigError("assemble_pencil: diffusion matrix must be finite and symmetric");
      }
    }
  }
  if (dofs.node_to_dof.size() != mesh.n_nodes()) throw ConfigError("assemble_pencil: dofmap does not match mesh");

  Pencil out;
  out.a = build_pattern(mesh, dofs, exec);
  if (with_mass) out.b = out.a;
  const ReferenceElement ref = make_reference_element(dim, mesh.order());
  const double vol = cell_volume(mesh);
  const int nloc = ref.n_local;
  std::atomic<int> fault{none};
  auto va = out.a.values();
  auto vb = out.b.values();
  const SparseMatrix& pattern = out.a;

  auto kernel = [&](std::size_t cell, Scratch& s) {
    std::fill(s.ke.begin(), s.ke.end(), 0.0);
    std::fill(s.me.begin(), s.me.end(), 0.0);
    for (int q = 0; q < ref.n_quad; ++q) {
      const Point z = map_to_cell(mesh, cell, ref.points[static_cast<std::size_t>(q)]);
      const double rho = coeff.rho ? coeff.rho(z) : 1.0;
      const double v = coeff.potential ? coeff.potential(z) : 0.0;
      if (!std::isfinite(rho)) fault = nonfinite_rho;
      else if (rho < 0.0) fault = negative_rho;
      if (!std::isfinite(v)) fault = nonfinite_v;
      const double w = ref.weights[static_cast<std::size_t>(q)] * vol;
      fill_gradients(ref, mesh, q, s);
      for (int a = 0; a < nloc; ++a) {
        const double* ga = &s.grad[static_cast<std::size_t>(a * dim)];
        double dga[kMaxDim] = {0.0, 0.0, 0.0};
        for (int d = 0; d < dim; ++d) {
          for (int e = 0; e < dim; ++e) {
            dga[d] += coeff.diffusion[static_cast<std::size_t>(d)][static_cast<std::size_t>(e)] * ga[e];
          }
        }
        const double na = ref.n(q, a);
        for (int b = a; b < nloc; ++b) {
          const double* gb = &s.grad[static_cast<std::size_t>(b * dim)];
          double stiff = 0.0;
          for (int d = 0; d < dim; ++d) stiff += dga[d] * gb[d];
          const double nn = na * ref.n(q, b);
          s.ke[static_cast<std::size_t>(a * nloc + b)] += w * (rho * stiff + v * nn);
          s.me[static_cast<std::size_t>(a * nloc + b)] += w * rho * nn;
        }
      }
    }
    gather_dofs(mesh, dofs, cell, s);
    for (int a = 0; a < nloc; ++a) {
      const auto ra = s.dofs[static_cast<std::size_t>(a)];
      if (ra == kNoDof) continue;
      for (int b = 0; b < nloc; ++b) {
        const auto cb = s.dofs[static_cast<std::size_t>(b)];
        if (cb == kNoDof) continue;
        const auto idx = static_cast<std::size_t>(a <= b ? a * nloc + b : b * nloc + a);
        const auto pos = static_cast<std::size_t>(pattern.find(static_cast<std::size_t>(ra), cb));
        va[pos] += s.ke[idx];
        if (with_mass) vb[pos] += s.me[idx];
      }
    }
  };
  for_each_cell(mesh, exec, kernel);
  raise_fault(fault.load());
  return out;
}

} // namespace

Pencil assemble_pencil(const Mesh& mesh, const DofMap& dofs, const CoefficientSpec& coeff, Exec exec) {
  return assemble_impl(mesh, dofs, coeff, exec, true);
}

CorrectorSystem assemble_corrector_system(const Mesh& mesh, const DofMap& dofs, const ScalarFunction& rho,
                                          int dir, Exec exec) {
  if (dir < 0 || dir >= mesh.domain().p) {
    throw ConfigError("assemble_corrector_system: direction must index an expanding direction");
  }
  CoefficientSpec spec;
  spec.rho = rho;
  CorrectorSystem sys;
  sys.k = std::move(assemble_impl(mesh, dofs, spec, exec, false).a);
  sys.f.assign(dofs.n_free, 0.0);

  const ReferenceElement ref = make_reference_element(mesh.dim(), mesh.order());
  const double vol = cell_volume(mesh);
  const int nloc = ref.n_local;
  double magnitude = 0.0;
  // serial: the right-hand side is cheap and this keeps the sum deterministic
  Scratch s;
  s.nodes.resize(static_cast<std::size_t>(nloc));
  s.dofs.resize(static_cast<std::size_t>(nloc));
  s.fe.resize(static_cast<std::size_t>(nloc));
  for (std::size_t cell = 0; cell < mesh.n_cells(); ++cell) {
    if (!mesh.active(cell)) continue;
    std::fill(s.fe.begin(), s.fe.end(), 0.0);
    for (int q = 0; q < ref.n_quad; ++q) {
      const Point z = map_to_cell(mesh, cell, ref.points[static_cast<std::size_t>(q)]);
      const double r = rho ? rho(z) : 1.0;
      const double w = ref.weights[static_cast<std::size_t>(q)] * vol;
      for (int a = 0; a < nloc; ++a) {
        s.fe[static_cast<std::size_t>(a)] -= w * r * ref.dn(q, a, dir) / mesh.spacing(dir);
      }
    }
    gather_dofs(mesh, dofs, cell, s);
    for (int a = 0; a < nloc; ++a) {
      const auto k = s.dofs[static_cast<std::size_t>(a)];
      if (k == kNoDof) continue;
      sys.f[static_cast<std::size_t>(k)] += s.fe[static_cast<std::size_t>(a)];
      magnitude += std::abs(s.fe[static_cast<std::size_t>(a)]);
    }
  }
  // consistency only makes sense when no node is eliminated
  bool all_free = true;
  for (std::size_t node = 0; node < mesh.n_nodes() && all_free; ++node) {
    if (dofs.dof(node) == kNoDof && mesh.node_in_use(node)) all_free = false;
  }
  double total = 0.0;
  for (double v : sys.f) total += v;
  if (all_free && std::abs(total) > 1e-10 * std::max(magnitude, 1e-300)) {
    throw DataError("assemble_corrector_system: right-hand side is not orthogonal to constants (sum " +
                    std::to_string(total) + ")");
  }
  return sys;
}

// ---------------------------------------------------------------- norms

namespace {

bool same_mesh(const Mesh& a, const Mesh& b) {
  return a.dim() == b.dim() && a.order() == b.order() && a.cells() == b.cells() &&
         a.origin() == b.origin() && a.domain().L == b.domain().L && a.domain().ell == b.domain().ell &&
         a.active_mask() == b.active_mask();
}

} // namespace

FieldNorms field_norms(const ScalarField& u, const ScalarField& v, const ScalarFunction& rho) {
  if (u.mesh_ptr() != v.mesh_ptr() && !same_mesh(u.mesh(), v.mesh())) {
    throw ConfigError("field_norms: fields live on different meshes");
  }
  const Mesh& mesh = u.mesh();
  const ReferenceElement ref = make_reference_element(mesh.dim(), mesh.order());
  const double vol = cell_volume(mesh);
  const int nloc = ref.n_local;
  std::vector<std::size_t> nodes(static_cast<std::size_t>(nloc));
  std::vector<double> ul(static_cast<std::size_t>(nloc)), vl(static_cast<std::size_t>(nloc));
  double err2 = 0.0, ref2 = 0.0, inner = 0.0;
  for (std::size_t cell = 0; cell < mesh.n_cells(); ++cell) {
    if (!mesh.active(cell)) continue;
    mesh.cell_nodes(cell, nodes);
    for (int a = 0; a < nloc; ++a) {
      ul[static_cast<std::size_t>(a)] = u.node_value(nodes[static_cast<std::size_t>(a)]);
      vl[static_cast<std::size_t>(a)] = v.node_value(nodes[static_cast<std::size_t>(a)]);
    }
    for (int q = 0; q < ref.n_quad; ++q) {
      double uq = 0.0, vq = 0.0;
      for (int a = 0; a < nloc; ++a) {
        uq += ref.n(q, a) * ul[static_cast<std::size_t>(a)];
        vq += ref.n(q, a) * vl[static_cast<std::size_t>(a)];
      }
      double w = ref.weights[static_cast<std::size_t>(q)] * vol;
      if (rho) w *= rho(map_to_cell(mesh, cell, ref.points[static_cast<std::size_t>(q)]));
      err2 += w * (uq - vq) * (uq - vq);
      ref2 += w * vq * vq;
      inner += w * uq * vq;
    }
  }
  FieldNorms out;
  out.l2_error = std::sqrt(err2);
  out.relative_error = ref2 > 0.0 ? out.l2_error / std::sqrt(ref2) : out.l2_error;
  out.inner = inner;
  return out;
}

ScalarField interpolate(std::shared_ptr<const Mesh> mesh, std::shared_ptr<const DofMap> dofs,
                        const ScalarFunction& f) {
  Vector c(dofs->n_free, 0.0);
  for (std::size_t k = 0; k < dofs->n_free; ++k) c[k] = f(mesh->node_point(dofs->dof_node[k]));
  return ScalarField(std::move(mesh), std::move(dofs), std::move(c));
}

double integrate(const Mesh& mesh, const ScalarFunction& g, int points_per_dir) {
  const ReferenceElement ref = make_reference_element(mesh.dim(), mesh.order(), points_per_dir);
  const double vol = cell_volume(mesh);
  double s = 0.0;
  for (std::size_t cell = 0; cell < mesh.n_cells(); ++cell) {
    if (!mesh.active(cell)) continue;
    for (int q = 0; q < ref.n_quad; ++q) {
      s += ref.weights[static_cast<std::size_t>(q)] * vol *
           g(map_to_cell(mesh, cell, ref.points[static_cast<std::size_t>(q)]));
    }
  }
  return s;
}

} // namespace pseig
