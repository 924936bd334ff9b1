#pragma once

#include <stdexcept>
#include <string>

namespace mosest {

/// Process exit codes shared by every CLI command.
enum class ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfig = 2,
  kData = 3,
  kDivergence = 4,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::kFailure; }
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kData; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kConfig; }
};

class DataError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kData; }
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

/// Malformed or truncated binary container.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class VersionMismatch : public FormatError {
 public:
  using FormatError::FormatError;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class KindMismatch : public DataError {
 public:
  using DataError::DataError;
};

class CannotNormalize : public DataError {
 public:
  using DataError::DataError;
};

class UndefinedSnr : public DataError {
 public:
  using DataError::DataError;
};

class UndefinedCorrelation : public DataError {
 public:
  using DataError::DataError;
};

class NoSpeech : public DataError {
 public:
  using DataError::DataError;
};

class SingularSystem : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kDivergence; }
};

/// Non-finite loss, gradient, or parameter during optimization.
class TrainingDiverged : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kDivergence; }
};

inline ExitCode exit_code_of(const std::exception& e) noexcept {
  if (const auto* err = dynamic_cast<const Error*>(&e)) return err->exit_code();
  return ExitCode::kFailure;
}

}  // namespace mosest
