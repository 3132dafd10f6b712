// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "pipeforge/agent.hpp"
#include "pipeforge/evaluation.hpp"
#include "pipeforge/prompts.hpp"
#include "pipeforge/registry.hpp"

namespace pipeforge {

/// One iteration's feedback: the action taken, what it produced and how the
/// result scored on the validation tasks.
struct TrialRecord {
  std::size_t step = 0;
  std::string action_type;
  std::vector<ObjectId> bindings;
  std::vector<std::string> labels;
  ScoreVector scores;
  double aggregate = 0.0;
  ObjectId produced;
  std::string produced_label;

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

struct MemoryState {
  std::string text;
  std::size_t version = 0;  // iteration that produced it

  friend bool operator==(const MemoryState&, const MemoryState&) = default;
};

struct HistoryFormat {
  bool include_task_scores = false;
};

/// "Step t: type(l1, l2) -> 0--t--0, score: 0.506"
std::string format_trial(const TrialRecord& record, const HistoryFormat& format = {});

/// One line per trial, in the given order; empty for no trials.
std::string format_history(std::span<const TrialRecord> records, const HistoryFormat& format = {});

struct MemoryOptions {
  /// Keep only the most recent `cap` prior memories; 0 keeps all.
  std::size_t cap = 0;
  HistoryFormat format;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::string model;
};

struct MemoryUpdate {
  MemoryState state;
  std::string prompt;
  std::size_t memories_included = 0;
  bool truncated = false;
};

/// Renders the memory-update prompt from the earlier trials, the earlier
/// memories (oldest first) and the new trials, and takes the agent's answer
/// verbatim as the next memory.
MemoryUpdate update_memory(AgentGateway& gateway, const PromptTemplate& tmpl,
                           std::span<const TrialRecord> previous,
                           std::span<const MemoryState> previous_memories,
                           std::span<const TrialRecord> latest, const MemoryOptions& options);

}  // namespace pipeforge
