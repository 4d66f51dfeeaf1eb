#pragma once

#include <stdexcept>
#include <string>

namespace agentga {

/// Raised when a configuration violates a module invariant.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised on non-finite scores handed to the comparison helpers.
class EvaluationError : public std::runtime_error {
 public:
  explicit EvaluationError(const std::string& what) : std::runtime_error(what) {}
};

class WorkspaceError : public std::runtime_error {
 public:
  explicit WorkspaceError(const std::string& what) : std::runtime_error(what) {}
};

/// Corrupt or partially written persisted state. `field()` names the first
/// field that failed to parse.
class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(std::string field, const std::string& what)
      : std::runtime_error(what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace agentga
