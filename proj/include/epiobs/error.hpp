/**
 * @file error.hpp
 * @brief Exception hierarchy shared by every epiobs module.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace epiobs {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when bad arguments reach a constructor or operation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value produced by a model map or a finite-difference probe.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Step-size underflow or step budget exhausted; carries the last time reached.
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double last_good_time)
      : Error(what), last_good_time_(last_good_time) {}
  [[nodiscard]] double last_good_time() const noexcept { return last_good_time_; }

 private:
  double last_good_time_;
};

class NotObservableError : public Error {
 public:
  using Error::Error;
};

class SingularityError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace epiobs
