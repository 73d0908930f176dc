#pragma once

#include <stdexcept>
#include <string>

namespace ctin {

// Exit codes used by the command-line front end.
enum class ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kData = 3,
  kDivergence = 4,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::kConfig; }
};

// Bad configuration, unknown enum tags, violated preconditions on arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Tensor shapes that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Input data that violates a documented invariant.
class DataError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kData; }
};

// Malformed file layout (header, columns, JSON schema).
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

// Metric preconditions (too short, zero path length, mismatched lengths).
class MetricError : public DataError {
 public:
  using DataError::DataError;
};

// Non-finite loss or parameters during optimization.
class DivergenceError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kDivergence; }
};

}  // namespace ctin
