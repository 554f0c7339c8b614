#pragma once

#include <stdexcept>
#include <string>

namespace crn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidConfigError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Raised when a rate is requested outside primary stability (lambda_p >= mu_p).
class InstabilityError : public Error {
 public:
  using Error::Error;
};

/// No fixed point exists with a stable primary queue.
class NoSolutionError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Stationary mass at the primary-queue cap is too large to trust the result.
class TruncationError : public Error {
 public:
  explicit TruncationError(const std::string& what, double mass)
      : Error(what), truncation_mass_(mass) {}
  [[nodiscard]] double truncation_mass() const { return truncation_mass_; }

 private:
  double truncation_mass_;
};

}  // namespace crn
