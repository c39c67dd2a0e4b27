#include "pseig/matrix_market.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <tuple>

#include "pseig/errors.hpp"

namespace pseig {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

// Reads the banner and skips comments; returns the banner tokens.
std::vector<std::string> read_header(std::istream& in, const std::string& path, std::string& size_line) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("matrix market: empty file " + path);
  std::istringstream banner(lower(line));
  std::vector<std::string> tok;
  for (std::string t; banner >> t;) tok.push_back(t);
  if (tok.size() < 4 || tok[0] != "%%matrixmarket" || tok[1] != "matrix") {
    throw IoError("matrix market: bad banner in " + path);
  }
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '%') {
      size_line = line;
      return tok;
    }
  }
  throw IoError("matrix market: missing size line in " + path);
}

} // namespace

void write_matrix_market(const std::string& path, const SparseMatrix& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << m.rows() << ' ' << m.rows() << ' ' << m.nnz() << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t k = m.row_ptr()[i]; k < m.row_ptr()[i + 1]; ++k) {
      out << i + 1 << ' ' << m.cols()[k] + 1 << ' ' << m.values()[k] << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

SparseMatrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string size_line;
  const auto tok = read_header(in, path, size_line);
  if (tok[2] != "coordinate" || tok[3] != "real") {
    throw IoError("matrix market: only real coordinate matrices are supported (" + path + ")");
  }
  const bool symmetric = tok.size() > 4 && tok[4] == "symmetric";
  std::size_t rows = 0, cols = 0, nnz = 0;
  std::istringstream(size_line) >> rows >> cols >> nnz;
  if (rows == 0 || rows != cols) throw IoError("matrix market: matrix must be square (" + path + ")");

  std::vector<std::tuple<std::size_t, std::int32_t, double>> entries;
  entries.reserve(symmetric ? 2 * nnz : nnz);
  for (std::size_t e = 0; e < nnz; ++e) {
    std::size_t i = 0, j = 0;
    double v = 0.0;
    if (!(in >> i >> j >> v) || i < 1 || j < 1 || i > rows || j > rows) {
      throw IoError("matrix market: bad entry " + std::to_string(e + 1) + " in " + path);
    }
    entries.emplace_back(i - 1, static_cast<std::int32_t>(j - 1), v);
    if (symmetric && i != j) entries.emplace_back(j - 1, static_cast<std::int32_t>(i - 1), v);
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
  });
  std::vector<std::size_t> rp(rows + 1, 0);
  std::vector<std::int32_t> cidx;
  std::vector<double> vals;
  std::size_t last_row = rows;
  for (const auto& [i, j, v] : entries) {
    if (i == last_row && cidx.back() == j) {
      vals.back() += v; // duplicates are summed
      continue;
    }
    cidx.push_back(j);
    vals.push_back(v);
    rp[i + 1] = cidx.size();
    last_row = i;
  }
  for (std::size_t i = 1; i <= rows; ++i) rp[i] = std::max(rp[i], rp[i - 1]);
  return SparseMatrix(rows, std::move(rp), std::move(cidx), std::move(vals));
}

void write_vector_market(const std::string& path, const Vector& v) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "%%MatrixMarket matrix array real general\n" << v.size() << " 1\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (double x : v) out << x << '\n';
  if (!out) throw IoError("write failed: " + path);
}

Vector read_vector_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string size_line;
  const auto tok = read_header(in, path, size_line);
  if (tok[2] != "array") throw IoError("matrix market: expected array format in " + path);
  std::size_t rows = 0, cols = 0;
  std::istringstream(size_line) >> rows >> cols;
  if (cols != 1) throw IoError("matrix market: expected a single column in " + path);
  Vector v(rows);
  for (auto& x : v) {
    if (!(in >> x)) throw IoError("matrix market: truncated vector in " + path);
  }
  return v;
}

} // namespace pseig
