// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pipeforge {

/// Base of every error raised by the library. `category()` is a short stable
/// token used in machine-readable CLI output ("config", "parse", ...).
class Error : public std::runtime_error {
 public:
  Error(std::string_view category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

class RegistryError : public Error {
 public:
  explicit RegistryError(const std::string& message) : Error("registry", message) {}
};

/// Agent output could not be turned into a selection. Carries the raw text.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::string text)
      : Error("parse", message), text_(std::move(text)) {}

  const std::string& text() const noexcept { return text_; }

 private:
  std::string text_;
};

class AgentError : public Error {
 public:
  explicit AgentError(const std::string& message) : Error("agent", message) {}
};

/// Retryable agent failure (connection refused, timeout, non-2xx status).
class TransportError : public AgentError {
 public:
  using AgentError::AgentError;
};

class ExecutorError : public Error {
 public:
  explicit ExecutorError(const std::string& message) : Error("executor", message) {}
};

class EvaluationError : public Error {
 public:
  explicit EvaluationError(const std::string& message) : Error("evaluation", message) {}
};

class CheckpointError : public Error {
 public:
  explicit CheckpointError(const std::string& message) : Error("checkpoint", message) {}
};

class ExperimentError : public Error {
 public:
  explicit ExperimentError(const std::string& message) : Error("experiment", message) {}
};

}  // namespace pipeforge
