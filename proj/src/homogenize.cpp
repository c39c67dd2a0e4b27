#include "pseig/homogenize.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include "pseig/eigensolve.hpp"
#include "pseig/errors.hpp"

namespace pseig {

namespace {

constexpr double kPi = std::numbers::pi;

Vector solve_pinned_cholesky(const SparseMatrix& k, const Vector& f) {
  SparseMatrix pinned = k;
  auto vals = pinned.values();
  // row 0 and column 0 become the identity; the RHS is consistent, so the
  // pinned solution solves the singular system too
  for (std::size_t kk = pinned.row_ptr()[0]; kk < pinned.row_ptr()[1]; ++kk) {
    const auto j = static_cast<std::size_t>(pinned.cols()[kk]);
    vals[kk] = (j == 0) ? 1.0 : 0.0;
    if (j != 0) {
      const auto pos = pinned.find(j, 0);
      if (pos >= 0) vals[static_cast<std::size_t>(pos)] = 0.0;
    }
  }
  Vector rhs = f;
  rhs[0] = 0.0;
  const EnvelopeCholesky chol(pinned);
  Vector x(f.size());
  chol.solve(rhs, x);
  return x;
}

Vector solve_cg(const SparseMatrix& k, Vector f, const CorrectorOptions& opt, bool singular) {
  if (singular) {
    // remove the component along the constant nullspace so the system is consistent
    double mean = 0.0;
    for (double v : f) mean += v;
    mean /= static_cast<double>(f.size());
    for (double& v : f) v -= mean;
  }
  const Vector diag = k.diagonal_values();
  const Exec exec = opt.exec;
  LinearOperator op = [&k, exec](std::span<const double> in, std::span<double> out) { spmv(k, in, out, exec); };
  CgOptions cg;
  cg.rel_tol = opt.tol;
  cg.max_iter = opt.max_iter;
  cg.exec = exec;
  CgResult r = conjugate_gradient(op, diag, f, cg);
  if (!r.converged) {
    throw SolverError("solve_correctors: CG stopped at relative residual " + std::to_string(r.rel_residual) +
                      " after " + std::to_string(r.iterations) + " iterations");
  }
  return std::move(r.x);
}

double weighted_mean(const ScalarField& u, const ScalarFunction& rho) {
  ScalarField one(u.mesh_ptr(), u.dofs_ptr(), Vector(u.dofs().n_free, 1.0));
  const double mass = field_norms(one, one, rho).inner;
  return field_norms(u, one, rho).inner / mass;
}

} // namespace

std::vector<ScalarField> solve_correctors(std::shared_ptr<const Mesh> cell, const ScalarFunction& rho,
                                          const CorrectorOptions& opt) {
  const int p = cell->domain().p;
  if (p < 1) throw ConfigError("solve_correctors: the cell needs at least one expanding direction");
  auto dofs = std::make_shared<const DofMap>(build_dof_map(*cell, {Boundary::periodic, opt.y_boundary}));

  std::vector<ScalarField> out;
  for (int i = 0; i < p; ++i) {
    CorrectorSystem sys = assemble_corrector_system(*cell, *dofs, rho, i, opt.exec);
    const bool definite = opt.y_boundary == Boundary::dirichlet && cell->domain().q > 0;
    const bool use_cholesky =
        opt.backend == CorrectorBackend::cholesky ||
        (opt.backend == CorrectorBackend::automatic && dofs->n_free <= opt.cholesky_limit);
    Vector theta;
    // A right-hand side at rounding level (x-independent weight) has theta = 0.
    const double fscale = sys.k.max_abs() * std::sqrt(static_cast<double>(sys.f.size()));
    if (norm2(sys.f, opt.exec) <= 1e-13 * fscale) {
      out.emplace_back(cell, dofs, Vector(sys.f.size(), 0.0), true);
      continue;
    }
    if (definite && use_cholesky) {
      theta.resize(sys.f.size());
      EnvelopeCholesky(sys.k).solve(sys.f, theta);
    } else if (use_cholesky) {
      theta = solve_pinned_cholesky(sys.k, sys.f);
    } else {
      theta = solve_cg(sys.k, sys.f, opt, !definite);
    }

    // residual check on the singular system
    const Vector kt = spmv(sys.k, theta, opt.exec);
    double r2 = 0.0, f2 = 0.0;
    for (std::size_t j = 0; j < theta.size(); ++j) {
      r2 += (kt[j] - sys.f[j]) * (kt[j] - sys.f[j]);
      f2 += sys.f[j] * sys.f[j];
    }
    if (f2 > 0.0 && std::sqrt(r2 / f2) > std::max(opt.tol, 1e-10) * 10.0) {
      throw SolverError("solve_correctors: residual " + std::to_string(std::sqrt(r2 / f2)) +
                        " above tolerance for direction " + std::to_string(i));
    }
    ScalarField field(cell, dofs, std::move(theta), true);
    if (!definite) {
      const double mean = weighted_mean(field, rho);
      for (double& v : field.coeffs()) v -= mean;
    }
    out.push_back(std::move(field));
  }
  return out;
}

bool HomogenizedCoefficients::diagonal(double tol) const {
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      if (i != j && std::abs(d(i, j)) > tol) return false;
    }
  }
  return true;
}

double HomogenizedCoefficients::default_offdiag_tol() const {
  double tr = 0.0;
  for (int i = 0; i < p; ++i) tr += d(i, i);
  return 1e-6 * tr / std::max(p, 1);
}

HomogenizedCoefficients homogenized_coefficients(const Mesh& cell, const ScalarFunction& rho,
                                                 std::span<const ScalarField> theta) {
  const int p = cell.domain().p;
  if (static_cast<int>(theta.size()) != p) throw ConfigError("homogenized_coefficients: need one corrector per direction");
  for (const auto& t : theta) {
    const Mesh& m = t.mesh();
    if (m.cells() != cell.cells() || m.order() != cell.order() || m.dim() != cell.dim() ||
        m.domain().L != cell.domain().L || m.domain().ell != cell.domain().ell) {
      throw ConfigError("homogenized_coefficients: corrector mesh does not match the cell mesh");
    }
  }
  const int dim = cell.dim();
  const ReferenceElement ref = make_reference_element(dim, cell.order());
  double vol = 1.0;
  for (int d = 0; d < dim; ++d) vol *= cell.spacing(d);
  const int nloc = ref.n_local;

  HomogenizedCoefficients hc;
  hc.p = p;
  hc.d_bar.assign(static_cast<std::size_t>(p * p), 0.0);
  std::vector<std::size_t> nodes(static_cast<std::size_t>(nloc));
  std::vector<double> local(static_cast<std::size_t>(nloc * p));
  for (std::size_t c = 0; c < cell.n_cells(); ++c) {
    if (!cell.active(c)) continue;
    cell.cell_nodes(c, nodes);
    for (int j = 0; j < p; ++j) {
      for (int a = 0; a < nloc; ++a) {
        local[static_cast<std::size_t>(j * nloc + a)] = theta[static_cast<std::size_t>(j)].node_value(nodes[static_cast<std::size_t>(a)]);
      }
    }
    for (int q = 0; q < ref.n_quad; ++q) {
      const double r = rho ? rho(map_to_cell(cell, c, ref.points[static_cast<std::size_t>(q)])) : 1.0;
      const double w = ref.weights[static_cast<std::size_t>(q)] * vol * r;
      hc.c_bar += w;
      for (int j = 0; j < p; ++j) {
        for (int i = 0; i < p; ++i) {
          double g = 0.0;
          for (int a = 0; a < nloc; ++a) g += ref.dn(q, a, i) * local[static_cast<std::size_t>(j * nloc + a)];
          g /= cell.spacing(i);
          hc.d_bar[static_cast<std::size_t>(i * p + j)] += w * ((i == j ? 1.0 : 0.0) + g);
        }
      }
    }
  }
  return hc;
}

double LimitEigenpair::value(const Point& x) const {
  if (numeric.mesh_ptr()) return numeric.value(x);
  double v = normalization;
  for (std::size_t i = 0; i < index.size(); ++i) v *= std::sin(index[i] * kPi * x[i]);
  return v;
}

std::vector<LimitEigenpair> analytic_limit_eigenpairs(const HomogenizedCoefficients& hc, int m_max, double tol) {
  if (m_max < 1) throw ConfigError("analytic_limit_eigenpairs: m_max must be >= 1");
  if (hc.p < 1 || hc.p > kMaxDim) throw ConfigError("analytic_limit_eigenpairs: p must be 1..3");
  if (!(hc.c_bar > 0.0)) throw DataError("analytic_limit_eigenpairs: C must be positive");
  const double t = tol < 0.0 ? hc.default_offdiag_tol() : tol;
  if (!hc.diagonal(t)) {
    throw ConfigError("analytic_limit_eigenpairs: homogenized diffusion is not diagonal; use the numeric fallback");
  }
  const int p = hc.p;
  const double norm = std::pow(2.0, 0.5 * p) / std::sqrt(hc.c_bar);
  std::vector<LimitEigenpair> all;
  std::vector<int> idx(static_cast<std::size_t>(p), 1);
  while (true) {
    LimitEigenpair e;
    double s = 0.0;
    for (int i = 0; i < p; ++i) s += hc.d(i, i) * idx[static_cast<std::size_t>(i)] * idx[static_cast<std::size_t>(i)];
    e.nu = kPi * kPi * s / hc.c_bar;
    e.index = idx;
    e.normalization = norm;
    all.push_back(std::move(e));
    int k = 0;
    while (k < p && ++idx[static_cast<std::size_t>(k)] > m_max) idx[static_cast<std::size_t>(k++)] = 1;
    if (k == p) break;
  }
  std::stable_sort(all.begin(), all.end(), [](const LimitEigenpair& a, const LimitEigenpair& b) {
    if (std::abs(a.nu - b.nu) > 1e-12 * std::max(a.nu, b.nu)) return a.nu < b.nu;
    return std::lexicographical_compare(a.index.rbegin(), a.index.rend(), b.index.rbegin(), b.index.rend());
  });
  all.resize(static_cast<std::size_t>(m_max));
  return all;
}

std::vector<LimitEigenpair> numeric_limit_eigenpairs(const HomogenizedCoefficients& hc, int m_max, int cells) {
  if (hc.p < 1 || hc.p > 2) throw ConfigError("numeric_limit_eigenpairs: supported for p = 1 or 2");
  const DomainSpec dom{hc.p, 0, 1.0, 1.0};
  const std::vector<int> c(static_cast<std::size_t>(hc.p), cells);
  auto mesh = std::make_shared<const Mesh>(build_box_mesh(dom, c, 2));
  auto dofs = std::make_shared<const DofMap>(build_dof_map(*mesh, {Boundary::dirichlet, Boundary::dirichlet}));
  CoefficientSpec spec;
  const double cb = hc.c_bar;
  spec.rho = [cb](const Point&) { return cb; };
  spec.diffusion = Matrix3{};
  for (int i = 0; i < hc.p; ++i) {
    for (int j = 0; j < hc.p; ++j) {
      spec.diffusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 0.5 * (hc.d(i, j) + hc.d(j, i)) / cb;
    }
  }
  // D / C with rho = C gives -div(D grad u) = nu C u
  const Pencil pen = assemble_pencil(*mesh, *dofs, spec);
  SolverConfig cfg;
  cfg.tol = 1e-9;
  cfg.k_max = 2000;
  const DeflatedResult res = deflated_smallest_k(pen.a, pen.b, cfg, m_max);
  if (!res.converged) throw SolverError("numeric_limit_eigenpairs: eigensolver did not converge");
  std::vector<LimitEigenpair> out;
  for (const auto& r : res.pairs) {
    LimitEigenpair e;
    e.nu = r.eigenvalue;
    e.numeric = ScalarField(mesh, dofs, r.eigenvector);
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<LimitEigenpair> limit_eigenpairs(const HomogenizedCoefficients& hc, int m_max) {
  if (hc.diagonal(hc.default_offdiag_tol())) return analytic_limit_eigenpairs(hc, m_max);
  return numeric_limit_eigenpairs(hc, m_max);
}

bool degenerate(double nu_m, double nu_next) { return std::abs(nu_m - nu_next) <= 1e-6 * std::abs(nu_m); }

std::pair<Vector, Vector> align_degenerate_pair(std::span<const double> x2, std::span<const double> x3,
                                                std::span<const double> t2, std::span<const double> t3,
                                                const SparseMatrix& b) {
  const std::size_t n = x2.size();
  if (x3.size() != n || t2.size() != n || t3.size() != n || b.rows() != n) {
    throw DataError("align_degenerate_pair: size mismatch");
  }
  const Vector bx2 = spmv(b, x2);
  const Vector bx3 = spmv(b, x3);
  auto project = [&](std::span<const double> t) {
    const double a2 = dot(bx2, t);
    const double a3 = dot(bx3, t);
    Vector y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = a2 * x2[i] + a3 * x3[i];
    const double nb = std::sqrt(std::max(bilinear(b, y, y), 0.0));
    const double nt = std::sqrt(std::max(bilinear(b, t, t), 0.0));
    if (!(nb > 1e-12 * nt)) throw SolverError("align_degenerate_pair: target is orthogonal to the eigenspace");
    for (double& v : y) v /= nb;
    return y;
  };
  return {project(t2), project(t3)};
}

HomogenizedModel homogenize(std::shared_ptr<const Mesh> cell, const ScalarFunction& rho, int m_max,
                            const CorrectorOptions& opt) {
  HomogenizedModel model;
  model.correctors = solve_correctors(cell, rho, opt);
  model.coeffs = homogenized_coefficients(*cell, rho, model.correctors);
  model.limit = limit_eigenpairs(model.coeffs, m_max);
  return model;
}

std::string serialize(const HomogenizedModel& model) {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  const auto& hc = model.coeffs;
  out << "p = " << hc.p << '\n';
  out << "C = " << hc.c_bar << '\n';
  for (int i = 0; i < hc.p; ++i) {
    for (int j = 0; j < hc.p; ++j) out << "D" << i + 1 << j + 1 << " = " << hc.d(i, j) << '\n';
  }
  for (std::size_t m = 0; m < model.limit.size(); ++m) {
    const auto& e = model.limit[m];
    out << "nu" << m + 1 << " = " << e.nu << '\n';
    if (!e.index.empty()) {
      out << "index" << m + 1 << " =";
      for (int k : e.index) out << ' ' << k;
      out << '\n';
      out << "N" << m + 1 << " = " << e.normalization << '\n';
    }
  }
  return out.str();
}

} // namespace pseig
