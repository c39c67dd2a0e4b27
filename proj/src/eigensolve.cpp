#include "pseig/eigensolve.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "pseig/dense.hpp"
#include "pseig/errors.hpp"

namespace pseig {

void SolverConfig::validate(std::size_t n) const {
  if (!(tol > 0.0)) throw ConfigError("solver: TOL must be positive");
  if (k_max < 1) throw ConfigError("solver: k_max must be >= 1");
  if (!x0.empty() && x0.size() != n) throw ConfigError("solver: x0 has the wrong length");
  if (!x_prev.empty() && x_prev.size() != n) throw ConfigError("solver: x_{-1} has the wrong length");
  for (const auto& y : deflation) {
    if (y.size() != n) throw ConfigError("solver: deflation vector has the wrong length");
  }
}

double rayleigh_quotient(const SparseMatrix& a, const SparseMatrix& b, std::span<const double> x) {
  const double den = bilinear(b, x, x);
  if (!(den > 0.0)) throw DataError("rayleigh_quotient: x^T B x must be positive");
  return bilinear(a, x, x) / den;
}

void fix_sign(std::span<double> x) {
  std::size_t imax = 0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (std::abs(x[i]) > std::abs(x[imax])) imax = i;
  }
  if (!x.empty() && x[imax] < 0.0) {
    for (double& v : x) v = -v;
  }
}

namespace {

struct Workspace {
  const SparseMatrix& a;
  const SparseMatrix& b;
  const SolverConfig& cfg;
  Vector ax, bx;

  double bnorm(std::span<const double> x) {
    spmv(b, x, bx, cfg.exec);
    return std::sqrt(std::max(dot(x, bx, cfg.exec), 0.0));
  }

  // x <- x - sum <x, y>_B y over the deflation set
  void deflate(std::span<double> x) {
    if (cfg.deflation.empty()) return;
    for (int pass = 0; pass < 2; ++pass) {
      spmv(b, x, bx, cfg.exec);
      for (const auto& y : cfg.deflation) axpy(-dot(y, bx, cfg.exec), y, x, cfg.exec);
    }
  }

  // B-normalise x in place and return (lambda, residual)
  std::pair<double, double> evaluate(std::span<double> x) {
    const double nb = bnorm(x);
    if (!(nb > 0.0)) throw SolverError("eigensolver: iterate collapsed to zero (start vector in the deflated space?)");
    for (double& v : x) v /= nb;
    spmv(a, x, ax, cfg.exec);
    spmv(b, x, bx, cfg.exec);
    const double lambda = dot(x, ax, cfg.exec) / dot(x, bx, cfg.exec);
    double r2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = ax[i] - lambda * bx[i];
      r2 += r * r;
    }
    return {lambda, std::sqrt(r2)};
  }
};

Vector start_vector(const SolverConfig& cfg, std::size_t n) {
  return cfg.x0.empty() ? Vector(n, 1.0) : cfg.x0;
}

Vector previous_vector(const SolverConfig& cfg, std::size_t n) {
  if (!cfg.x_prev.empty()) return cfg.x_prev;
  Vector e(n, 0.0);
  e[0] = 1.0;
  return e;
}

void finish(EigResult& r, Vector&& x, double lambda) {
  fix_sign(x);
  r.eigenvector = std::move(x);
  r.eigenvalue = lambda;
}

} // namespace

EigResult inverse_power(const SparseMatrix& a, const SparseMatrix& b, const SolverConfig& cfg) {
  const ShiftInvert p(a, b, cfg.sigma, cfg.backend);
  return inverse_power(a, b, p, cfg);
}

EigResult inverse_power(const SparseMatrix& a, const SparseMatrix& b, const ShiftInvert& p,
                        const SolverConfig& cfg) {
  const std::size_t n = a.rows();
  cfg.validate(n);
  Workspace ws{a, b, cfg, Vector(n), Vector(n)};
  EigResult res;
  res.sigma = p.sigma();
  Vector x = start_vector(cfg, n);
  ws.deflate(x);
  auto [lambda, resid] = ws.evaluate(x);
  res.residual_history.push_back(resid);
  res.rayleigh_history.push_back(lambda);
  Vector bx(n);
  int k = 0;
  while (!(resid < cfg.tol) && k < cfg.k_max) {
    ++k;
    spmv(b, x, bx, cfg.exec);
    p.apply(bx, x);
    ws.deflate(x);
    std::tie(lambda, resid) = ws.evaluate(x);
    res.residual_history.push_back(resid);
    res.rayleigh_history.push_back(lambda);
  }
  res.iterations = k;
  res.converged = resid < cfg.tol;
  finish(res, std::move(x), lambda);
  return res;
}

EigResult lopcg(const SparseMatrix& a, const SparseMatrix& b, const SolverConfig& cfg) {
  const ShiftInvert p(a, b, cfg.sigma, cfg.backend);
  return lopcg(a, b, p, cfg);
}

EigResult lopcg(const SparseMatrix& a, const SparseMatrix& b, const ShiftInvert& p, const SolverConfig& cfg) {
  const std::size_t n = a.rows();
  cfg.validate(n);
  Workspace ws{a, b, cfg, Vector(n), Vector(n)};
  EigResult res;
  res.sigma = p.sigma();

  Vector x = start_vector(cfg, n);
  Vector x_old = previous_vector(cfg, n);
  ws.deflate(x);
  ws.deflate(x_old);
  auto [lambda, resid] = ws.evaluate(x);
  res.residual_history.push_back(resid);
  res.rayleigh_history.push_back(lambda);

  Vector r(n), w(n), bv(n);
  std::vector<Vector> basis;
  int k = 0;
  while (!(resid < cfg.tol) && k < cfg.k_max) {
    ++k;
    // w = P (A x - lambda B x); ws.ax / ws.bx hold A x and B x of the current iterate
    for (std::size_t i = 0; i < n; ++i) r[i] = ws.ax[i] - lambda * ws.bx[i];
    p.apply(r, w);
    ws.deflate(w);

    // B-orthonormal basis of span{x, w, x_old} by two-pass modified Gram-Schmidt
    basis.clear();
    double leading = 0.0;
    for (const Vector* cand : {&x, &w, &x_old}) {
      Vector v = *cand;
      const double n0 = ws.bnorm(v);
      if (!(n0 > 0.0) || !std::isfinite(n0)) continue;
      for (double& t : v) t /= n0;
      for (int pass = 0; pass < 2; ++pass) {
        spmv(b, v, bv, cfg.exec);
        for (const auto& q : basis) axpy(-dot(q, bv, cfg.exec), q, v, cfg.exec);
      }
      const double nv = ws.bnorm(v);
      if (basis.empty()) leading = nv;
      if (!(nv >= 1e-12 * leading)) continue;
      for (double& t : v) t /= nv;
      basis.push_back(std::move(v));
    }

    const std::size_t m = basis.size();
    DenseMatrix am(m), bm(m);
    std::vector<Vector> av(m, Vector(n)), bvv(m, Vector(n));
    for (std::size_t i = 0; i < m; ++i) {
      spmv(a, basis[i], av[i], cfg.exec);
      spmv(b, basis[i], bvv[i], cfg.exec);
    }
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i; j < m; ++j) {
        am(i, j) = am(j, i) = 0.5 * (dot(basis[i], av[j], cfg.exec) + dot(basis[j], av[i], cfg.exec));
        bm(i, j) = bm(j, i) = 0.5 * (dot(basis[i], bvv[j], cfg.exec) + dot(basis[j], bvv[i], cfg.exec));
      }
    }
    const DenseEigen ritz = dense_sym_eig(am, bm);
    const auto& alpha = ritz.vectors.front();

    x_old = std::move(x);
    x.assign(n, 0.0);
    for (std::size_t i = 0; i < m; ++i) axpy(alpha[i], basis[i], x, cfg.exec);
    ws.deflate(x);
    std::tie(lambda, resid) = ws.evaluate(x);
    res.residual_history.push_back(resid);
    res.rayleigh_history.push_back(lambda);
  }
  res.iterations = k;
  res.converged = resid < cfg.tol;
  finish(res, std::move(x), lambda);
  return res;
}

DeflatedResult deflated_smallest_k(const SparseMatrix& a, const SparseMatrix& b, const SolverConfig& cfg,
                                   int m) {
  if (m < 1) throw ConfigError("deflated_smallest_k: m must be >= 1");
  const ShiftInvert p(a, b, cfg.sigma, cfg.backend);
  return deflated_smallest_k(a, b, p, cfg, m);
}

DeflatedResult deflated_smallest_k(const SparseMatrix& a, const SparseMatrix& b, const ShiftInvert& p,
                                   const SolverConfig& cfg, int m) {
  if (m < 1) throw ConfigError("deflated_smallest_k: m must be >= 1");
  DeflatedResult out;
  SolverConfig run = cfg;
  for (int i = 0; i < m; ++i) {
    EigResult r = lopcg(a, b, p, run);
    const bool ok = r.converged;
    run.deflation.push_back(r.eigenvector);
    out.pairs.push_back(std::move(r));
    if (!ok) {
      out.converged = false;
      break;
    }
  }
  std::stable_sort(out.pairs.begin(), out.pairs.end(),
                   [](const EigResult& l, const EigResult& r) { return l.eigenvalue < r.eigenvalue; });
  return out;
}

void write_history_csv(const std::string& path, const EigResult& r) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "k,residual,rayleigh\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t k = 0; k < r.residual_history.size(); ++k) {
    out << k << ',' << r.residual_history[k] << ',' << r.rayleigh_history[k] << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

} // namespace pseig
