#pragma once

#include <stdexcept>
#include <string>

namespace ptplaq {

/// Base class for every failure raised by the library.  The CLI maps any
/// `Error` escaping a command to exit status 3.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : Error(what), last_residual_(last_residual) {}
  double last_residual() const { return last_residual_; }

 private:
  double last_residual_;
};

class SingularityError : public Error {
 public:
  SingularityError(const std::string& what, double condition_indicator)
      : Error(what), condition_indicator_(condition_indicator) {}
  /// Ratio of smallest to largest pivot magnitude at the point of failure.
  double condition_indicator() const { return condition_indicator_; }

 private:
  double condition_indicator_;
};

class ToleranceError : public Error {
 public:
  using Error::Error;
};

class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double last_valid_time)
      : Error(what), last_valid_time_(last_valid_time) {}
  double last_valid_time() const { return last_valid_time_; }

 private:
  double last_valid_time_;
};

}  // namespace ptplaq
