#pragma once

#include <stdexcept>
#include <string>

namespace tamrf {

/// Base class for all library errors. `exit_code()` is the process status the
/// CLI reports for this error class.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

/// Bad configuration: schema grammar, run config, option ranges.
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Bad input data: out-of-range cells, unknown columns, empty segments.
class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// Model fitting or evaluation failure.
class ModelError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

}  // namespace tamrf
