#include "pseig/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pseig/errors.hpp"

namespace pseig {

SparseMatrix::SparseMatrix(std::size_t n, std::vector<std::size_t> row_ptr,
                           std::vector<std::int32_t> cols, std::vector<double> values)
    : n_(n), row_ptr_(std::move(row_ptr)), cols_(std::move(cols)), values_(std::move(values)) {
  if (n_ == 0) throw DataError("SparseMatrix: dimension must be >= 1");
  if (row_ptr_.size() != n_ + 1 || row_ptr_.back() != cols_.size() ||
      values_.size() != cols_.size()) {
    throw DataError("SparseMatrix: inconsistent CSR arrays");
  }
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      if (cols_[k] < 0 || static_cast<std::size_t>(cols_[k]) >= n_ ||
          (k > row_ptr_[i] && cols_[k] <= cols_[k - 1])) {
        throw DataError("SparseMatrix: row " + std::to_string(i) +
                        " has unsorted, duplicate or out-of-range columns");
      }
    }
  }
}

SparseMatrix SparseMatrix::from_pattern(std::size_t n, std::vector<std::size_t> row_ptr,
                                        std::vector<std::int32_t> cols) {
  std::vector<double> values(cols.size(), 0.0);
  return SparseMatrix(n, std::move(row_ptr), std::move(cols), std::move(values));
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<double> d(n, 1.0);
  return diagonal(d);
}

SparseMatrix SparseMatrix::diagonal(std::span<const double> d) {
  const std::size_t n = d.size();
  std::vector<std::size_t> rp(n + 1);
  std::vector<std::int32_t> cols(n);
  for (std::size_t i = 0; i < n; ++i) {
    rp[i + 1] = i + 1;
    cols[i] = static_cast<std::int32_t>(i);
  }
  return SparseMatrix(n, std::move(rp), std::move(cols), std::vector<double>(d.begin(), d.end()));
}

SparseMatrix SparseMatrix::from_dense(std::size_t n, std::span<const double> dense) {
  if (dense.size() != n * n) throw DataError("from_dense: size mismatch");
  std::vector<std::size_t> rp(n + 1, 0);
  std::vector<std::int32_t> cols;
  std::vector<double> vals;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = dense[i * n + j];
      if (v != 0.0 || i == j) {
        cols.push_back(static_cast<std::int32_t>(j));
        vals.push_back(v);
      }
    }
    rp[i + 1] = cols.size();
  }
  return SparseMatrix(n, std::move(rp), std::move(cols), std::move(vals));
}

std::ptrdiff_t SparseMatrix::find(std::size_t row, std::int32_t col) const {
  const auto first = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[row]);
  const auto last = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[row + 1]);
  const auto it = std::lower_bound(first, last, col);
  if (it == last || *it != col) return -1;
  return it - cols_.begin();
}

double SparseMatrix::at(std::size_t row, std::int32_t col) const {
  const auto k = find(row, col);
  return k < 0 ? 0.0 : values_[static_cast<std::size_t>(k)];
}

double SparseMatrix::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

Vector SparseMatrix::diagonal_values() const {
  Vector d(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) d[i] = at(i, static_cast<std::int32_t>(i));
  return d;
}

bool SparseMatrix::same_pattern(const SparseMatrix& other) const {
  return n_ == other.n_ && row_ptr_ == other.row_ptr_ && cols_ == other.cols_;
}

void spmv(const SparseMatrix& m, std::span<const double> x, std::span<double> y, Exec exec) {
  const std::size_t n = m.rows();
  if (x.size() != n || y.size() != n) {
    throw DataError("spmv: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                    std::to_string(n) + ")");
  }
  const auto rp = m.row_ptr();
  const auto cols = m.cols();
  const auto vals = m.values();
  if (exec == Exec::serial) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) s += vals[k] * x[cols[k]];
      y[i] = s;
    }
    return;
  }
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) s += vals[k] * x[cols[k]];
    y[i] = s;
  }
}

Vector spmv(const SparseMatrix& m, std::span<const double> x, Exec exec) {
  Vector y(m.rows(), 0.0);
  spmv(m, x, y, exec);
  return y;
}

SparseMatrix combine(double alpha, const SparseMatrix& a, double beta, const SparseMatrix& b) {
  if (a.rows() != b.rows()) throw DataError("combine: dimension mismatch");
  if (a.same_pattern(b)) {
    std::vector<double> vals(a.nnz());
    const auto va = a.values();
    const auto vb = b.values();
    for (std::size_t k = 0; k < vals.size(); ++k) vals[k] = alpha * va[k] + beta * vb[k];
    return SparseMatrix(a.rows(), {a.row_ptr().begin(), a.row_ptr().end()},
                        {a.cols().begin(), a.cols().end()}, std::move(vals));
  }
  const std::size_t n = a.rows();
  std::vector<std::size_t> rp(n + 1, 0);
  std::vector<std::int32_t> cols;
  std::vector<double> vals;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t ka = a.row_ptr()[i];
    std::size_t kb = b.row_ptr()[i];
    const std::size_t ea = a.row_ptr()[i + 1];
    const std::size_t eb = b.row_ptr()[i + 1];
    while (ka < ea || kb < eb) {
      const std::int32_t ca = ka < ea ? a.cols()[ka] : INT32_MAX;
      const std::int32_t cb = kb < eb ? b.cols()[kb] : INT32_MAX;
      double v = 0.0;
      const std::int32_t c = std::min(ca, cb);
      if (ca == c) v += alpha * a.values()[ka++];
      if (cb == c) v += beta * b.values()[kb++];
      cols.push_back(c);
      vals.push_back(v);
    }
    rp[i + 1] = cols.size();
  }
  return SparseMatrix(n, std::move(rp), std::move(cols), std::move(vals));
}

double asymmetry(const SparseMatrix& m) {
  double worst = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t k = m.row_ptr()[i]; k < m.row_ptr()[i + 1]; ++k) {
      const auto j = static_cast<std::size_t>(m.cols()[k]);
      worst = std::max(worst, std::abs(m.values()[k] - m.at(j, static_cast<std::int32_t>(i))));
    }
  }
  return worst;
}

double dot(std::span<const double> x, std::span<const double> y, Exec exec) {
  if (x.size() != y.size()) throw DataError("dot: dimension mismatch");
  double s = 0.0;
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  if (exec == Exec::serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
  }
#pragma omp parallel for reduction(+ : s) schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

double norm2(std::span<const double> x, Exec exec) { return std::sqrt(dot(x, x, exec)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y, Exec exec) {
  if (x.size() != y.size()) throw DataError("axpy: dimension mismatch");
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  if (exec == Exec::serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) y[i] += alpha * x[i];
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double bilinear(const SparseMatrix& m, std::span<const double> x, std::span<const double> y) {
  const Vector my = spmv(m, y);
  return dot(x, my);
}

} // namespace pseig
