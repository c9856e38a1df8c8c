#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace prefgen {

// Programming error: an operation was called outside its documented domain.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A backend could not serve a request after exhausting its retries. The
// affected problem is journaled as aborted and the run continues.
class RolloutAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientCandidates : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyBatch : public std::invalid_argument {
 public:
  EmptyBatch() : std::invalid_argument("batch is empty") {}
};

class ScoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ExportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by dataset import. `line` is 1-based.
class ImportError : public std::runtime_error {
 public:
  ImportError(std::size_t line, const std::string& cause)
      : std::runtime_error("line " + std::to_string(line) + ": " + cause),
        line_(line),
        cause_(cause) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& cause() const noexcept { return cause_; }

 private:
  std::size_t line_;
  std::string cause_;
};

class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::size_t line, const std::string& reason)
      : std::runtime_error("line " + std::to_string(line) +
                           ": invalid pair (" + reason + ")"),
        line_(line),
        reason_(reason) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

// Bad inputs or unreachable backends detected before any problem is run.
class StartupError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class JournalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace prefgen
