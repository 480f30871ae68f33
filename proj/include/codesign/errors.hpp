#pragma once

#include <stdexcept>
#include <string>

namespace codesign {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: non-Hermitian matrix, invalid grid, empty sample list...
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Eigenvector adjoint requested across an (almost) degenerate pair.
class DegenerateSpectrumError : public Error {
 public:
  using Error::Error;
};

/// Truncation boundary falls inside a degenerate multiplet.
class GaugeAmbiguityError : public Error {
 public:
  using Error::Error;
};

/// Two dressed states claim the same bare label within tolerance.
class AssignmentTieError : public Error {
 public:
  using Error::Error;
};

class NoCrossingError : public Error {
 public:
  using Error::Error;
};

class IllConditionedRootError : public Error {
 public:
  using Error::Error;
};

class SolverFailure : public Error {
 public:
  using Error::Error;
};

class UndefinedPhaseError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

/// A user-supplied function returned NaN or Inf.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

}  // namespace codesign
