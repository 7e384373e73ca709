#pragma once

#include <stdexcept>
#include <string>

namespace noisylab {

/// Root of every error the library throws. `exit_code()` is the CLI contract:
/// 0 success, 1 usage, 2 data/format, 3 divergence.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 2; }
};

class InvalidInputError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A call sequence violated a precondition (e.g. a stale forward cache).
class ContractError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ConsistencyError : public Error {
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
  int exit_code() const noexcept override { return 1; }
};

/// Non-finite loss or gradient during training.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long long step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  int exit_code() const noexcept override { return 3; }
  long long step() const noexcept { return step_; }

 private:
  long long step_;
};

}  // namespace noisylab
