#pragma once

#include <stdexcept>
#include <string>

namespace qcoll {

// Base for all library failures. The CLI maps the subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent user input (market file, config, arguments).
class InputError : public Error {
 public:
  using Error::Error;
};

// A numerically well-formed request outside the model's domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// The vol surface admits butterfly or calendar arbitrage at the named point.
class ArbitrageError : public DomainError {
 public:
  ArbitrageError(const std::string& what, double strike, double time)
      : DomainError(what), strike_(strike), time_(time) {}
  double strike() const { return strike_; }
  double time() const { return time_; }

 private:
  double strike_;
  double time_;
};

// A collocation node maps outside the declared strike bounds of a marginal.
class TailCoverageError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Root solves that cannot reach their target.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

class UnattainableForwardError : public CalibrationError {
 public:
  UnattainableForwardError(const std::string& what, double lo, double hi)
      : CalibrationError(what), lo_(lo), hi_(hi) {}
  double attainable_lo() const { return lo_; }
  double attainable_hi() const { return hi_; }

 private:
  double lo_;
  double hi_;
};

class BoundViolationError : public DomainError {
 public:
  using DomainError::DomainError;
};

}  // namespace qcoll
