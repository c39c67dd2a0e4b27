#include "pseig/dense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pseig/errors.hpp"

namespace pseig {

DenseMatrix DenseMatrix::identity(std::size_t size) {
  DenseMatrix m(size);
  for (std::size_t i = 0; i < size; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::from(const SparseMatrix& s) {
  DenseMatrix m(s.rows());
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t k = s.row_ptr()[i]; k < s.row_ptr()[i + 1]; ++k) {
      m(i, static_cast<std::size_t>(s.cols()[k])) = s.values()[k];
    }
  }
  return m;
}

void dense_cholesky(DenseMatrix& a) {
  const std::size_t n = a.n;
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > 0.0)) throw DataError("dense_cholesky: matrix is not positive definite");
    d = std::sqrt(d);
    a(j, j) = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / d;
    }
    for (std::size_t i = 0; i < j; ++i) a(i, j) = 0.0;
  }
}

std::vector<double> dense_solve_spd(DenseMatrix a, std::span<const double> rhs) {
  dense_cholesky(a);
  const std::size_t n = a.n;
  std::vector<double> x(rhs.begin(), rhs.end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) x[i] -= a(i, k) * x[k];
    x[i] /= a(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) x[i] -= a(k, i) * x[k];
    x[i] /= a(i, i);
  }
  return x;
}

namespace {

// Cyclic Jacobi on a symmetric matrix; columns of v become eigenvectors.
void jacobi_eigen(DenseMatrix& c, DenseMatrix& v) {
  const std::size_t n = c.n;
  v = DenseMatrix::identity(n);
  double scale = 0.0;
  for (double x : c.a) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) return;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) off += c(i, j) * c(i, j);
    }
    if (std::sqrt(off) <= 1e-15 * scale) return;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = c(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double theta = (c(q, q) - c(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double cs = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * cs;
        for (std::size_t k = 0; k < n; ++k) {
          const double ckp = c(k, p);
          const double ckq = c(k, q);
          c(k, p) = cs * ckp - sn * ckq;
          c(k, q) = sn * ckp + cs * ckq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double cpk = c(p, k);
          const double cqk = c(q, k);
          c(p, k) = cs * cpk - sn * cqk;
          c(q, k) = sn * cpk + cs * cqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = cs * vkp - sn * vkq;
          v(k, q) = sn * vkp + cs * vkq;
        }
      }
    }
  }
}

} // namespace

DenseEigen dense_sym_eig(const DenseMatrix& m, const DenseMatrix& bs) {
  const std::size_t n = m.n;
  if (bs.n != n) throw DataError("dense_sym_eig: dimension mismatch");
  DenseMatrix l = bs;
  dense_cholesky(l);

  // C = L^{-1} M L^{-T}
  DenseMatrix w = m; // w = L^{-1} M (forward substitution, column by column)
  for (std::size_t col = 0; col < n; ++col) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = w(i, col);
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * w(k, col);
      w(i, col) = s / l(i, i);
    }
  }
  DenseMatrix c(n); // c = w L^{-T}  <=>  c^T = L^{-1} w^T
  for (std::size_t row = 0; row < n; ++row) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = w(row, i);
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * c(row, k);
      c(row, i) = s / l(i, i);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (c(i, j) + c(j, i));
      c(i, j) = avg;
      c(j, i) = avg;
    }
  }

  DenseMatrix v;
  jacobi_eigen(c, v);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return c(a, a) < c(b, b); });

  DenseEigen out;
  out.values.reserve(n);
  out.vectors.reserve(n);
  for (std::size_t idx : order) {
    out.values.push_back(c(idx, idx));
    // x = L^{-T} y
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = v(i, idx);
    for (std::size_t i = n; i-- > 0;) {
      double s = x[i];
      for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
      x[i] = s / l(i, i);
    }
    out.vectors.push_back(std::move(x));
  }
  return out;
}

DenseEigen dense_sym_eig(const DenseMatrix& m) {
  return dense_sym_eig(m, DenseMatrix::identity(m.n));
}

} // namespace pseig
