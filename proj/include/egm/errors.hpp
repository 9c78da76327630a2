#pragma once

#include <stdexcept>
#include <string>

namespace egm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter is outside its admissible domain (sigma <= 0, bad weights, ...).
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// Input data is malformed (non-finite values, dimension mismatch, empty set).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// The operation is not defined for this gain or configuration.
class UnsupportedOperation : public Error {
 public:
  using Error::Error;
};

/// A stated precondition of a theoretical check does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A numerical certification found a violated property.
class CertificationFailure : public Error {
 public:
  using Error::Error;
};

/// Quadrature did not converge under node doubling.
class PrecisionFailure : public Error {
 public:
  using Error::Error;
};

/// Every observation fell outside the gain support at some iterate.
class DegenerateIterate : public Error {
 public:
  using Error::Error;
};

/// The (weighted) normal equations are singular.
class SingularSystem : public Error {
 public:
  using Error::Error;
};

}  // namespace egm
