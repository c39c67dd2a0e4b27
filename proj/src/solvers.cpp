#include "pseig/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "pseig/errors.hpp"

namespace pseig {

namespace {

struct Graph {
  std::vector<std::size_t> ptr;
  std::vector<std::int32_t> adj;
  std::size_t degree(std::size_t v) const { return ptr[v + 1] - ptr[v]; }
};

Graph symmetric_graph(const SparseMatrix& m) {
  const std::size_t n = m.rows();
  std::vector<std::vector<std::int32_t>> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = m.row_ptr()[i]; k < m.row_ptr()[i + 1]; ++k) {
      const auto j = m.cols()[k];
      if (static_cast<std::size_t>(j) == i) continue;
      rows[i].push_back(j);
      rows[static_cast<std::size_t>(j)].push_back(static_cast<std::int32_t>(i));
    }
  }
  Graph g;
  g.ptr.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = rows[i];
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    g.ptr[i + 1] = g.ptr[i] + r.size();
  }
  g.adj.reserve(g.ptr[n]);
  for (auto& r : rows) {
    g.adj.insert(g.adj.end(), r.begin(), r.end());
    std::vector<std::int32_t>().swap(r);
  }
  return g;
}

// BFS level structure from root restricted to unvisited vertices of one
// component; returns (last level, eccentricity).
std::pair<std::vector<std::int32_t>, int> bfs_levels(const Graph& g, std::int32_t root,
                                                      const std::vector<std::uint8_t>& done,
                                                      std::vector<int>& level) {
  std::vector<std::int32_t> frontier{root};
  std::vector<std::int32_t> touched{root};
  level[static_cast<std::size_t>(root)] = 0;
  int depth = 0;
  std::vector<std::int32_t> last = frontier;
  while (!frontier.empty()) {
    last = frontier;
    std::vector<std::int32_t> next;
    for (auto v : frontier) {
      for (std::size_t k = g.ptr[v]; k < g.ptr[v + 1]; ++k) {
        const auto w = g.adj[k];
        if (done[static_cast<std::size_t>(w)] || level[static_cast<std::size_t>(w)] >= 0) continue;
        level[static_cast<std::size_t>(w)] = depth + 1;
        next.push_back(w);
        touched.push_back(w);
      }
    }
    if (!next.empty()) ++depth;
    frontier = std::move(next);
  }
  for (auto v : touched) level[static_cast<std::size_t>(v)] = -1;
  return {last, depth};
}

} // namespace

std::vector<std::int32_t> reverse_cuthill_mckee(const SparseMatrix& m) {
  const std::size_t n = m.rows();
  const Graph g = symmetric_graph(m);
  std::vector<std::uint8_t> done(n, 0);
  std::vector<int> level(n, -1);
  std::vector<std::int32_t> order;
  order.reserve(n);

  for (std::size_t seed = 0; seed < n; ++seed) {
    if (done[seed]) continue;
    // pseudo-peripheral start node (George-Liu)
    auto root = static_cast<std::int32_t>(seed);
    auto [last, ecc] = bfs_levels(g, root, done, level);
    for (int it = 0; it < 8; ++it) {
      std::int32_t cand = last.front();
      for (auto v : last) {
        if (g.degree(static_cast<std::size_t>(v)) < g.degree(static_cast<std::size_t>(cand))) cand = v;
      }
      auto [last2, ecc2] = bfs_levels(g, cand, done, level);
      if (ecc2 <= ecc) break;
      root = cand;
      last = std::move(last2);
      ecc = ecc2;
    }

    std::deque<std::int32_t> queue{root};
    done[static_cast<std::size_t>(root)] = 1;
    std::vector<std::int32_t> nbrs;
    while (!queue.empty()) {
      const auto v = queue.front();
      queue.pop_front();
      order.push_back(v);
      nbrs.clear();
      for (std::size_t k = g.ptr[v]; k < g.ptr[v + 1]; ++k) {
        const auto w = g.adj[k];
        if (!done[static_cast<std::size_t>(w)]) {
          done[static_cast<std::size_t>(w)] = 1;
          nbrs.push_back(w);
        }
      }
      std::stable_sort(nbrs.begin(), nbrs.end(), [&](std::int32_t a, std::int32_t b) {
        return g.degree(static_cast<std::size_t>(a)) < g.degree(static_cast<std::size_t>(b));
      });
      queue.insert(queue.end(), nbrs.begin(), nbrs.end());
    }
  }
  std::reverse(order.begin(), order.end());
  return order;
}

std::size_t bandwidth(const SparseMatrix& m, std::span<const std::int32_t> perm) {
  const std::size_t n = m.rows();
  std::vector<std::int32_t> inv(n);
  for (std::size_t i = 0; i < n; ++i) inv[static_cast<std::size_t>(perm[i])] = static_cast<std::int32_t>(i);
  std::size_t bw = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = m.row_ptr()[i]; k < m.row_ptr()[i + 1]; ++k) {
      const auto a = inv[i];
      const auto b = inv[static_cast<std::size_t>(m.cols()[k])];
      bw = std::max(bw, static_cast<std::size_t>(std::abs(a - b)));
    }
  }
  return bw;
}

EnvelopeCholesky::EnvelopeCholesky(const SparseMatrix& m, std::size_t max_entries)
    : n_(m.rows()), perm_(reverse_cuthill_mckee(m)) {
  std::vector<std::int32_t> inv(n_);
  for (std::size_t i = 0; i < n_; ++i) inv[static_cast<std::size_t>(perm_[i])] = static_cast<std::int32_t>(i);

  first_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    const auto old = static_cast<std::size_t>(perm_[i]);
    auto f = static_cast<std::int32_t>(i);
    for (std::size_t k = m.row_ptr()[old]; k < m.row_ptr()[old + 1]; ++k) {
      f = std::min(f, inv[static_cast<std::size_t>(m.cols()[k])]);
    }
    first_[i] = f;
  }
  offset_.resize(n_ + 1);
  offset_[0] = 0;
  for (std::size_t i = 0; i < n_; ++i) {
    offset_[i + 1] = offset_[i] + (i - static_cast<std::size_t>(first_[i]) + 1);
  }
  if (offset_[n_] > max_entries) {
    throw SolverError("EnvelopeCholesky: envelope of " + std::to_string(offset_[n_]) +
                      " entries exceeds the limit; use the cg backend");
  }
  values_.assign(offset_[n_], 0.0);
  std::vector<double> orig_diag(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    const auto old = static_cast<std::size_t>(perm_[i]);
    for (std::size_t k = m.row_ptr()[old]; k < m.row_ptr()[old + 1]; ++k) {
      const auto j = static_cast<std::size_t>(inv[static_cast<std::size_t>(m.cols()[k])]);
      if (j <= i) values_[offset_[i] + (j - static_cast<std::size_t>(first_[i]))] = m.values()[k];
      if (j == i) orig_diag[i] = m.values()[k];
    }
  }

  for (std::size_t i = 0; i < n_; ++i) {
    double* li = values_.data() + offset_[i];
    const auto fi = static_cast<std::size_t>(first_[i]);
    for (std::size_t j = fi; j < i; ++j) {
      const double* lj = values_.data() + offset_[j];
      const auto fj = static_cast<std::size_t>(first_[j]);
      const std::size_t k0 = std::max(fi, fj);
      double s = li[j - fi];
      const double* a = li + (k0 - fi);
      const double* b = lj + (k0 - fj);
      const std::size_t len = j - k0;
      for (std::size_t k = 0; k < len; ++k) s -= a[k] * b[k];
      li[j - fi] = s / lj[j - fj];
    }
    double d = li[i - fi];
    for (std::size_t k = 0; k < i - fi; ++k) d -= li[k] * li[k];
    if (!(d > 1e-14 * std::abs(orig_diag[i]))) {
      throw ShiftTooLargeError("EnvelopeCholesky: non-positive pivot at row " + std::to_string(i) +
                               "; the shifted matrix is not positive definite");
    }
    li[i - fi] = std::sqrt(d);
  }
}

void EnvelopeCholesky::solve(std::span<const double> rhs, std::span<double> x) const {
  if (rhs.size() != n_ || x.size() != n_) throw DataError("EnvelopeCholesky::solve: size mismatch");
  std::vector<double> y(n_);
  for (std::size_t i = 0; i < n_; ++i) y[i] = rhs[static_cast<std::size_t>(perm_[i])];
  for (std::size_t i = 0; i < n_; ++i) {
    const double* li = values_.data() + offset_[i];
    const auto fi = static_cast<std::size_t>(first_[i]);
    double s = y[i];
    for (std::size_t k = fi; k < i; ++k) s -= li[k - fi] * y[k];
    y[i] = s / li[i - fi];
  }
  for (std::size_t i = n_; i-- > 0;) {
    const double* li = values_.data() + offset_[i];
    const auto fi = static_cast<std::size_t>(first_[i]);
    y[i] /= li[i - fi];
    const double yi = y[i];
    for (std::size_t k = fi; k < i; ++k) y[k] -= li[k - fi] * yi;
  }
  for (std::size_t i = 0; i < n_; ++i) x[static_cast<std::size_t>(perm_[i])] = y[i];
}

CgResult conjugate_gradient(const LinearOperator& op, std::span<const double> diag,
                            std::span<const double> rhs, const CgOptions& opt,
                            std::span<const double> x0) {
  const std::size_t n = rhs.size();
  CgResult res;
  res.x.assign(n, 0.0);
  if (!x0.empty()) std::copy(x0.begin(), x0.end(), res.x.begin());

  std::vector<double> r(n), z(n), p(n), q(n);
  op(res.x, q);
  for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - q[i];
  const double bnorm = norm2(rhs, opt.exec);
  if (bnorm == 0.0) {
    std::fill(res.x.begin(), res.x.end(), 0.0);
    res.converged = true;
    return res;
  }
  auto precondition = [&](const std::vector<double>& in, std::vector<double>& out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = diag[i] > 0.0 ? in[i] / diag[i] : in[i];
  };
  precondition(r, z);
  p = z;
  double rz = dot(r, z, opt.exec);
  double rnorm = norm2(r, opt.exec);
  res.residual_history.push_back(std::sqrt(std::max(rz, 0.0)));
  for (int it = 1; it <= opt.max_iter; ++it) {
    if (rnorm <= opt.rel_tol * bnorm) break;
    op(p, q);
    const double curv = dot(p, q, opt.exec);
    if (!(curv > 0.0)) {
      throw ShiftTooLargeError("conjugate_gradient: non-positive curvature; operator is not SPD");
    }
    const double alpha = rz / curv;
    axpy(alpha, p, res.x, opt.exec);
    axpy(-alpha, q, r, opt.exec);
    precondition(r, z);
    const double rz_new = dot(r, z, opt.exec);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    rnorm = norm2(r, opt.exec);
    res.iterations = it;
    res.residual_history.push_back(std::sqrt(std::max(rz, 0.0)));
  }
  // true residual
  op(res.x, q);
  for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - q[i];
  res.rel_residual = norm2(r, opt.exec) / bnorm;
  res.converged = res.rel_residual <= 10.0 * opt.rel_tol;
  return res;
}

ShiftInvert::ShiftInvert(const SparseMatrix& a, const SparseMatrix& b, double sigma,
                         const ShiftInvertOptions& opt)
    : n_(a.rows()), sigma_(sigma), backend_(opt.backend), cg_(opt.cg),
      shifted_(sigma == 0.0 ? a : combine(1.0, a, -sigma, b)) {
  if (b.rows() != n_) throw DataError("ShiftInvert: A and B differ in size");
  if (backend_ == Backend::cholesky) {
    factor_ = std::make_unique<EnvelopeCholesky>(shifted_, opt.max_envelope);
    shifted_ = SparseMatrix{};
  } else {
    diag_ = shifted_.diagonal_values();
    for (double d : diag_) {
      if (!(d > 0.0)) throw ShiftTooLargeError("ShiftInvert: non-positive diagonal in A - sigma B");
    }
  }
}

void ShiftInvert::apply(std::span<const double> rhs, std::span<double> x) const {
  if (factor_) {
    factor_->solve(rhs, x);
    return;
  }
  const SparseMatrix& m = shifted_;
  const Exec exec = cg_.exec;
  LinearOperator op = [&m, exec](std::span<const double> in, std::span<double> out) {
    spmv(m, in, out, exec);
  };
  const CgResult r = conjugate_gradient(op, diag_, rhs, cg_);
  if (!r.converged) {
    throw ShiftTooLargeError("ShiftInvert: CG did not converge (relative residual " +
                             std::to_string(r.rel_residual) + "); shift too close to or above the spectrum");
  }
  std::copy(r.x.begin(), r.x.end(), x.begin());
}

Vector ShiftInvert::apply(std::span<const double> rhs) const {
  Vector x(n_, 0.0);
  apply(rhs, x);
  return x;
}

Vector shift_invert_apply(const SparseMatrix& a, const SparseMatrix& b, double sigma,
                          std::span<const double> rhs, const ShiftInvertOptions& opt) {
  return ShiftInvert(a, b, sigma, opt).apply(rhs);
}

} // namespace pseig
