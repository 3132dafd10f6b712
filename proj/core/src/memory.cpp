// SPDX-License-Identifier: Apache-2.0

#include "pipeforge/memory.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "pipeforge/error.hpp"

namespace pipeforge {

std::string format_trial(const TrialRecord& record, const HistoryFormat& format) {
  auto line = fmt::format("Step {}: {}({}) -> {}, score: {:.3f}", record.step, record.action_type,
                          fmt::join(record.labels, ", "), record.produced_label, record.aggregate);
  if (format.include_task_scores && !record.scores.empty()) {
    line += " (";
    for (std::size_t i = 0; i < record.scores.size(); ++i) {
      line += fmt::format("{}{}: {:.3f}", i > 0 ? ", " : "", record.scores[i].task,
                          record.scores[i].value);
    }
    line += ")";
  }
  return line;
}

std::string format_history(std::span<const TrialRecord> records, const HistoryFormat& format) {
  std::string out;
  for (const auto& record : records) {
    if (!out.empty()) {
      out += '\n';
    }
    out += format_trial(record, format);
  }
  return out;
}

MemoryUpdate update_memory(AgentGateway& gateway, const PromptTemplate& tmpl,
                           std::span<const TrialRecord> previous,
                           std::span<const MemoryState> previous_memories,
                           std::span<const TrialRecord> latest, const MemoryOptions& options) {
  if (latest.empty()) {
    throw ConfigError("memory update needs at least one new trial");
  }
  MemoryUpdate out;
  auto kept = previous_memories;
  if (options.cap > 0 && kept.size() > options.cap) {
    kept = kept.last(options.cap);
    out.truncated = true;
  }
  out.memories_included = kept.size();

  std::string memories;
  for (const auto& m : kept) {
    if (!memories.empty()) {
      memories += "\n\n";
    }
    memories += m.text;
  }
  auto history = format_history(previous, options.format);
  out.prompt = tmpl.render({
      {"<previous results>", history.empty() ? std::string(kEmptySentinel) : history},
      {"<previous memories>", memories.empty() ? std::string(kEmptySentinel) : memories},
      {"<new results>", format_history(latest, options.format)},
  });

  AgentRequest request;
  request.prompt = out.prompt;
  request.temperature = options.temperature;
  request.max_tokens = options.max_tokens;
  request.model = options.model;
  out.state.version = latest.back().step;
  out.state.text = gateway.complete(request, Phase::MemoryUpdate, out.state.version);
  return out;
}

}  // namespace pipeforge
