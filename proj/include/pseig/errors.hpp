#pragma once

#include <stdexcept>
#include <string>

namespace pseig {

// Base of every error thrown by the library. The CLI maps each subclass to an
// exit code (see tools/pseig.cpp).
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Inconsistent or unsupported configuration: bad dimensions, empty masks,
// unknown experiment ids, incompatible periodic masks.
class ConfigError : public Error {
public:
  using Error::Error;
};

// Invalid numerical data: negative weights, non-finite coefficients,
// non-SPD matrices handed to routines that require SPD input.
class DataError : public Error {
public:
  using Error::Error;
};

class SolverError : public Error {
public:
  using Error::Error;
};

// (A - sigma B) is not positive definite, i.e. sigma exceeds the smallest
// eigenvalue of the pencil.
class ShiftTooLargeError : public SolverError {
public:
  using SolverError::SolverError;
};

class IoError : public Error {
public:
  using Error::Error;
};

} // namespace pseig
