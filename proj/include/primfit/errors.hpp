#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace primfit {

/// Base class for all recoverable primfit failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The data do not determine the requested primitive (collinear points,
/// coplanar sphere data, parallel normals for a cone, ...).
class DegenerateFitError : public Error {
 public:
  using Error::Error;
};

/// A serialized vector or table does not follow the expected layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input; carries the 1-based line number.
class ParseError : public FormatError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : FormatError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Segment generation could not satisfy its size constraints.
class GenerationError : public Error {
 public:
  using Error::Error;
};

/// A perturbation left too few points behind.
class DegenerateOutputError : public Error {
 public:
  using Error::Error;
};

/// No Hough vote landed inside the search window.
class WindowMissError : public Error {
 public:
  using Error::Error;
};

/// Every family fit failed for a cloud.
class ClassificationError : public Error {
 public:
  using Error::Error;
};

/// Ground-truth and predicted vectors describe different kinds.
class IncomparableError : public Error {
 public:
  using Error::Error;
};

/// Metrics requested for an empty confusion matrix.
class EmptyMetricsError : public Error {
 public:
  using Error::Error;
};

}  // namespace primfit
