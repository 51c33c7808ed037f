// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace cure {

/// Process exit codes shared by every CLI subcommand.
enum class ExitCode : int {
  kOk = 0,
  kValidation = 1,
  kRuntime = 2,
  kExternalClient = 3,
};

/// Base class; `exit_code()` tells the CLI how to terminate.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ExitCode code)
      : std::runtime_error(what), code_(code) {}
  ExitCode exit_code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

// Validation-class errors (exit 1).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what, ExitCode::kValidation) {}
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error(what, ExitCode::kValidation) {}
};

class IndexError : public Error {
 public:
  explicit IndexError(const std::string& what) : Error(what, ExitCode::kValidation) {}
};

class LabelingIncompleteError : public Error {
 public:
  explicit LabelingIncompleteError(const std::string& what)
      : Error(what, ExitCode::kValidation) {}
};

class DegenerateTaskError : public Error {
 public:
  explicit DegenerateTaskError(const std::string& what) : Error(what, ExitCode::kValidation) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(what, ExitCode::kValidation) {}
};

// Runtime-class errors (exit 2).
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what) : Error(what, ExitCode::kRuntime) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what, ExitCode::kRuntime) {}
};

/// A caller broke an API precondition, e.g. asked for a margin loss with
/// mode off.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(what, ExitCode::kRuntime) {}
};

// Annotator backend failures (exit 3).
class ClientError : public Error {
 public:
  explicit ClientError(const std::string& what) : Error(what, ExitCode::kExternalClient) {}
};

}  // namespace cure
