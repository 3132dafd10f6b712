// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace pipeforge {

enum class Phase {
  TypeSelection,
  ObjectSelection,
  MemoryUpdate,
};

/// "type-selection", "object-selection", "memory-update".
std::string_view to_string(Phase phase);
Phase phase_from_string(std::string_view text);

struct AgentRequest {
  std::string prompt;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::string model;
};

/// One agent call as it happened. Failed transport attempts are recorded too,
/// with `error` set and an empty response.
struct AgentCall {
  std::size_t iteration = 0;
  Phase phase = Phase::TypeSelection;
  AgentRequest request;
  std::string response;
  std::string error;
  int attempt = 1;     // transport attempt number, from 1
  bool retry = false;  // a re-ask after an unparsable answer
  double latency_ms = 0.0;
};

/// Append-only log of agent calls.
class AgentTrace {
 public:
  void append(AgentCall call) { calls_.push_back(std::move(call)); }
  const std::vector<AgentCall>& calls() const { return calls_; }
  std::size_t size() const { return calls_.size(); }
  std::size_t count(Phase phase) const;

 private:
  std::vector<AgentCall> calls_;
};

/// Something that turns a prompt into text. Backends with internal progress
/// (scripts) expose it through cursor()/restore() so runs can resume.
class AgentBackend {
 public:
  virtual ~AgentBackend() = default;
  virtual std::string complete(const AgentRequest& request, Phase phase, std::size_t iteration) = 0;
  virtual nlohmann::json cursor() const { return nullptr; }
  virtual void restore(const nlohmann::json& /*cursor*/) {}
};

/// Deterministic stand-in for the decision model. Either replays a table of
/// canned responses per phase, or asks a responder function. In both modes
/// the answer depends only on (phase, per-phase call index, prompt).
class ScriptedAgent final : public AgentBackend {
 public:
  using Responder =
      std::function<std::string(Phase phase, std::size_t call_index, std::string_view prompt)>;

  explicit ScriptedAgent(std::map<Phase, std::vector<std::string>> table);
  explicit ScriptedAgent(Responder responder);

  /// Script file: blocks introduced by a line "=== <phase>" whose body (up
  /// to the next marker, trailing newline removed) is one response.
  static std::unique_ptr<ScriptedAgent> from_file(const std::filesystem::path& path);
  static std::map<Phase, std::vector<std::string>> parse_script(std::string_view text);

  std::string complete(const AgentRequest& request, Phase phase, std::size_t iteration) override;
  nlohmann::json cursor() const override;
  void restore(const nlohmann::json& cursor) override;

 private:
  std::map<Phase, std::vector<std::string>> table_;
  Responder responder_;
  std::map<Phase, std::size_t> next_;
};

struct EndpointSettings {
  std::string url;  // e.g. http://127.0.0.1:8080/v1/chat/completions
  std::string api_key;
  std::chrono::milliseconds timeout{60000};
};

/// Chat-completions JSON over HTTP: one user message, temperature and
/// max_tokens; answers with choices[0].message.content.
class ChatCompletionsAgent final : public AgentBackend {
 public:
  explicit ChatCompletionsAgent(EndpointSettings settings);
  ~ChatCompletionsAgent() override;

  std::string complete(const AgentRequest& request, Phase phase, std::size_t iteration) override;

  static nlohmann::json request_body(const AgentRequest& request);
  /// Throws TransportError when the body has no choices[0].message.content.
  static std::string response_text(std::string_view body);

 private:
  struct Impl;
  EndpointSettings settings_;
  std::unique_ptr<Impl> impl_;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{8000};
};

/// The single route to the agent: adds retry with exponential backoff and
/// records every attempt in the trace.
class AgentGateway {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;
  using Observer = std::function<void(const AgentCall&)>;

  AgentGateway(std::unique_ptr<AgentBackend> backend, RetryPolicy retry = {});

  /// Returns the response verbatim. Transport errors are retried; when
  /// attempts run out an AgentError is thrown.
  std::string complete(const AgentRequest& request, Phase phase, std::size_t iteration,
                       bool retry = false);

  const AgentTrace& trace() const { return trace_; }
  void restore_trace(AgentTrace trace) { trace_ = std::move(trace); }
  AgentBackend& backend() { return *backend_; }
  const AgentBackend& backend() const { return *backend_; }

  void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }
  void set_observer(Observer observer) { observer_ = std::move(observer); }

 private:
  void record(AgentCall call);

  std::unique_ptr<AgentBackend> backend_;
  RetryPolicy retry_;
  AgentTrace trace_;
  Sleeper sleeper_;
  Observer observer_;
};

}  // namespace pipeforge
