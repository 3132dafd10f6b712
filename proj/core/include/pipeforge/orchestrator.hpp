// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pipeforge/agent.hpp"
#include "pipeforge/config.hpp"
#include "pipeforge/memory.hpp"
#include "pipeforge/policy.hpp"
#include "pipeforge/prompts.hpp"
#include "pipeforge/registry.hpp"
#include "pipeforge/trace.hpp"

namespace pipeforge {

inline constexpr int kCheckpointVersion = 1;

struct RunState {
  std::size_t step = 0;  // completed trials
  Registry registry;
  std::vector<MemoryState> memories;
  std::vector<TrialRecord> history;
};

struct OrchestratorOptions {
  std::filesystem::path trace_path;       // empty: no trace file
  std::filesystem::path checkpoint_path;  // written on failure and, if asked, after each step
  bool checkpoint_each_step = false;
  bool timing = false;  // latency fields in the trace
};

/// The iteration loop: enumerate, select, execute and evaluate, update
/// memory. Each step either completes or leaves the state as it was before
/// the step (and writes a checkpoint when a path is configured).
class Orchestrator {
 public:
  /// `backend` overrides the agent named by the configuration.
  explicit Orchestrator(RunConfig config, OrchestratorOptions options = {},
                        std::unique_ptr<AgentBackend> backend = nullptr);
  ~Orchestrator();

  Orchestrator(const Orchestrator&) = delete;
  Orchestrator& operator=(const Orchestrator&) = delete;

  /// Restores a checkpoint and reopens its trace at the recorded offset.
  /// Empty option paths fall back to the ones stored in the checkpoint.
  static std::unique_ptr<Orchestrator> resume(const std::filesystem::path& checkpoint,
                                              OrchestratorOptions options = {},
                                              std::unique_ptr<AgentBackend> backend = nullptr);

  const RunConfig& config() const { return config_; }
  const RunState& state() const { return state_; }
  bool finished() const { return state_.step >= config_.total_timesteps; }

  /// Agent calls so far; empty for policies that do not consult the agent.
  const AgentTrace& agent_trace() const;
  AgentGateway* gateway() { return gateway_.get(); }
  const Policy& policy() const { return *policy_; }

  /// Candidates offered at the next step.
  std::vector<ActionCandidate> candidates() const;

  const RunState& run();
  void run_until(std::size_t step);
  void step();

  nlohmann::json checkpoint_document() const;
  void checkpoint(const std::filesystem::path& path) const;

 private:
  Orchestrator(RunConfig config, OrchestratorOptions options, std::unique_ptr<AgentBackend> backend,
               bool fresh);

  void write_checkpoint_on_failure() const;

  RunConfig config_;
  OrchestratorOptions options_;
  RunState state_;
  Rng rng_;
  std::unique_ptr<AgentGateway> gateway_;
  std::unique_ptr<Policy> policy_;
  TemplateSet templates_;
  ExecutorBindings executors_;
  EvaluatorBindings evaluators_;
  TraceWriter trace_;
  std::uint64_t committed_offset_ = 0;
};

/// The agent a configuration asks for: the script file if one is set,
/// otherwise the chat-completions endpoint.
std::unique_ptr<AgentBackend> make_backend(const RunConfig& config);

}  // namespace pipeforge
