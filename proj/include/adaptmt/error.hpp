#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace adaptmt {

/// Base error type. `stage` names the pipeline stage or module that raised it
/// ("tm", "retrieval", "prompt", "gateway", "terms", "mt", "eval", "config").
class Error : public std::runtime_error {
 public:
  Error(std::string stage, const std::string& message)
      : std::runtime_error(message), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// A malformed input record; `line` is 1-based.
class RecordError : public Error {
 public:
  RecordError(std::string stage, std::size_t line, const std::string& message)
      : Error(std::move(stage), "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A failure reported by a remote provider (LLM, MT, embedder).
/// `status` is the last HTTP status seen, 0 for transport-level failures.
class ProviderError : public Error {
 public:
  ProviderError(std::string stage, int status, bool terminal, const std::string& message)
      : Error(std::move(stage), message), status_(status), terminal_(terminal) {}

  int status() const noexcept { return status_; }
  bool terminal() const noexcept { return terminal_; }

  /// Server-requested delay (Retry-After), if any.
  std::optional<std::chrono::milliseconds> retry_after() const noexcept { return retry_after_; }
  void set_retry_after(std::chrono::milliseconds d) { retry_after_ = d; }

 private:
  int status_;
  bool terminal_;
  std::optional<std::chrono::milliseconds> retry_after_;
};

}  // namespace adaptmt
