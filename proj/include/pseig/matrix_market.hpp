#pragma once

#include <string>

#include "pseig/sparse.hpp"

namespace pseig {

/// Matrix Market coordinate format ("real general" on write; "general" and
/// "symmetric" accepted on read). Throws IoError on unreadable or malformed
/// files.
void write_matrix_market(const std::string& path, const SparseMatrix& m);
SparseMatrix read_matrix_market(const std::string& path);

/// Dense column vector in Matrix Market array format.
void write_vector_market(const std::string& path, const Vector& v);
Vector read_vector_market(const std::string& path);

} // namespace pseig
