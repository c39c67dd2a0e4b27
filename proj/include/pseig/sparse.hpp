#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pseig {

/// Which implementation of a data-parallel kernel to run. `serial` is the
/// reference loop kept for testing; `parallel` is the OpenMP version.
enum class Exec : std::uint8_t { serial, parallel };

using Vector = std::vector<double>;

/// Compressed sparse row matrix. Column indices are sorted and unique per row.
class SparseMatrix {
public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t n, std::vector<std::size_t> row_ptr, std::vector<std::int32_t> cols,
               std::vector<double> values);

  /// Pattern-only constructor; values start at zero.
  static SparseMatrix from_pattern(std::size_t n, std::vector<std::size_t> row_ptr,
                                   std::vector<std::int32_t> cols);
  static SparseMatrix identity(std::size_t n);
  static SparseMatrix diagonal(std::span<const double> d);
  /// Dense row-major input; exact zeros are dropped (diagonal always kept).
  static SparseMatrix from_dense(std::size_t n, std::span<const double> dense);

  std::size_t rows() const { return n_; }
  std::size_t nnz() const { return cols_.size(); }
  std::span<const std::size_t> row_ptr() const { return row_ptr_; }
  std::span<const std::int32_t> cols() const { return cols_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  /// Position of (row, col) in the value array, or -1 if structurally zero.
  std::ptrdiff_t find(std::size_t row, std::int32_t col) const;
  double at(std::size_t row, std::int32_t col) const;
  double max_abs() const;
  Vector diagonal_values() const;
  bool same_pattern(const SparseMatrix& other) const;

private:
  std::size_t n_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::int32_t> cols_;
  std::vector<double> values_;
};

/// y = M x
void spmv(const SparseMatrix& m, std::span<const double> x, std::span<double> y,
          Exec exec = Exec::parallel);
Vector spmv(const SparseMatrix& m, std::span<const double> x, Exec exec = Exec::parallel);

/// alpha*A + beta*B. Patterns are merged when they differ.
SparseMatrix combine(double alpha, const SparseMatrix& a, double beta, const SparseMatrix& b);

/// max |M_ij - M_ji|
double asymmetry(const SparseMatrix& m);

double dot(std::span<const double> x, std::span<const double> y, Exec exec = Exec::parallel);
double norm2(std::span<const double> x, Exec exec = Exec::parallel);
/// y += alpha x
void axpy(double alpha, std::span<const double> x, std::span<double> y,
          Exec exec = Exec::parallel);
/// x^T M y
double bilinear(const SparseMatrix& m, std::span<const double> x, std::span<const double> y);

} // namespace pseig
