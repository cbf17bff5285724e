#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace magfe {

/// Base of all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class UnsupportedDegree : public Error {
 public:
  UnsupportedDegree(int requested, int max_degree)
      : Error("quadrature degree " + std::to_string(requested) +
              " not available (maximum " + std::to_string(max_degree) + ")"),
        max_degree_(max_degree) {}

  int max_degree() const noexcept { return max_degree_; }

 private:
  int max_degree_;
};

/// Raised by nodal interpolation when the function does not vanish on
/// constrained nodes.
class BoundaryCompatibilityError : public Error {
 public:
  using Error::Error;
};

class NoThresholdError : public Error {
 public:
  using Error::Error;
};

class OrientationError : public Error {
 public:
  using Error::Error;
};

class ConfigurationError : public Error {
 public:
  using Error::Error;
};

class LineSearchFailure : public Error {
 public:
  using Error::Error;
};

class SolverFailure : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace magfe
