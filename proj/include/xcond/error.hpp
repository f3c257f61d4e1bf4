#pragma once

#include <stdexcept>
#include <string>

namespace xcond {

// Error families map onto CLI exit codes: config 2, data 3, numeric 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const { return 1; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 3; }
};

class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 4; }
};

// Pearson correlation against a zero-variance vector.
class UndefinedCorrelation : public NumericError {
 public:
  using NumericError::NumericError;
};

// Singular normal matrix in an unregularized ridge solve.
class SingularSystem : public NumericError {
 public:
  using NumericError::NumericError;
};

// Non-finite training loss; carries the epoch at which it appeared.
class Divergence : public NumericError {
 public:
  Divergence(const std::string& what, int epoch) : NumericError(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

// Call from inside a catch block: rethrows the active xcond error with `prefix`
// prepended, keeping its family (and therefore its exit code).
[[noreturn]] inline void rethrow_with_context(const std::string& prefix) {
  try {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const DataError& e) {
    throw DataError(prefix + e.what());
  } catch (const NumericError& e) {
    throw NumericError(prefix + e.what());
  }
}

}  // namespace xcond
