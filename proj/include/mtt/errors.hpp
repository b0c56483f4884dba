#pragma once

#include <stdexcept>
#include <string>

namespace mtt {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int { ok = 0, config = 2, data_format = 3, numerical = 4 };

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ExitCode::config, what) {}
};

enum class FormatErrorKind { bad_magic, truncated, dimension_mismatch, parse, io };

class FormatError : public Error {
 public:
  FormatError(FormatErrorKind kind, const std::string& what)
      : Error(ExitCode::data_format, what), kind_(kind) {}
  FormatErrorKind kind() const noexcept { return kind_; }

 private:
  FormatErrorKind kind_;
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ExitCode::numerical, what) {}
};

}  // namespace mtt
