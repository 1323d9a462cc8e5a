#pragma once

#include <stdexcept>
#include <string>

namespace tibcad {

/// Base of every error raised by the library. The exit code is what the
/// command-line front end returns when the error escapes a subcommand.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

/// Invalid parameters or configuration (bad patch size, unknown mode, ...).
class ConfigError : public Error {
public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Missing or inconsistent input data, failed segmentation, bad files.
class DataError : public Error {
public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// A statistic that is undefined for the given input (zero variance, one class).
class DegenerateError : public Error {
public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

} // namespace tibcad
