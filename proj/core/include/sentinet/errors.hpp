#pragma once

#include <stdexcept>
#include <string>

namespace sentinet {

// Root of the library's error hierarchy. Catching this covers everything
// thrown by sentinet itself; std exceptions may still escape from Eigen or
// the standard library on programmer error.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Operand shapes are incompatible (matrix products, row lengths, ...).
class DimensionMismatch : public Error {
public:
  using Error::Error;
};

// A dense matrix handed to project() is not diagonal-block structured.
class NotDiagonalBlock : public Error {
public:
  using Error::Error;
};

// Matrix inverse requested but reciprocal condition number < 1e-14.
class SingularMatrix : public Error {
public:
  using Error::Error;
};

// SPD factorization failed even after the one-shot diagonal jitter.
class NumericalFailure : public Error {
public:
  using Error::Error;
};

// Configuration value out of domain (nonpositive sizes, BER outside [0,1],
// unknown keys, ...).
class BadConfig : public Error {
public:
  using Error::Error;
};

// File could not be read, parsed, or written.
class IoError : public Error {
public:
  using Error::Error;
};

// Dynamics too short to extract a single lag pair (T < 2).
class EmptyDynamics : public Error {
public:
  using Error::Error;
};

// A basis function produced NaN or Inf on the observed state range.
class NonFiniteEmbedding : public Error {
public:
  using Error::Error;
};

class IndexOutOfRange : public Error {
public:
  using Error::Error;
};

// failure_rate() called with an empty ground-truth set.
class EmptyTruth : public Error {
public:
  using Error::Error;
};

class ShapeMismatch : public Error {
public:
  using Error::Error;
};

}  // namespace sentinet
