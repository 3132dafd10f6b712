// SPDX-License-Identifier: Apache-2.0

#include "pipeforge/policy.hpp"

#include <algorithm>
#include <limits>

#include <fmt/format.h>

#include "pipeforge/error.hpp"

namespace pipeforge {

namespace {

void require_candidates(const SelectionContext& context) {
  if (context.candidates.empty()) {
    throw ConfigError(fmt::format("no action candidates at iteration {}", context.iteration));
  }
}

std::vector<std::size_t> candidates_of_type(std::span<const ActionCandidate> candidates,
                                            std::string_view type) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].action_type == type) {
      out.push_back(i);
    }
  }
  return out;
}

}  // namespace

PolicyKind policy_kind_from_string(std::string_view text) {
  if (text == "LaMDAgent_gpt" || text == "llm") return PolicyKind::Llm;
  if (text == "random") return PolicyKind::Random;
  if (text == "scripted") return PolicyKind::Scripted;
  throw ConfigError(fmt::format("unknown controller '{}' (expected LaMDAgent_gpt|llm|random|scripted)", text));
}

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Llm: return "llm";
    case PolicyKind::Random: return "random";
    case PolicyKind::Scripted: return "scripted";
  }
  return "llm";
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  if (n == 0) {
    throw ConfigError("cannot draw from an empty range");
  }
  const std::uint64_t range = n;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t draw = rng();
  while (draw >= limit) {
    draw = rng();
  }
  return static_cast<std::size_t>(draw % range);
}

const ActionCandidate* match_candidate(std::span<const ActionCandidate> candidates,
                                       const ActionSchema& schema, std::vector<ObjectId> bindings) {
  auto lookup = [&](const std::vector<ObjectId>& b) -> const ActionCandidate* {
    for (const auto& c : candidates) {
      if (c.action_type == schema.name && c.bindings == b) {
        return &c;
      }
    }
    return nullptr;
  };
  if (const auto* exact = lookup(bindings)) {
    return exact;
  }
  // Canonical form of an unordered pick: each repeated kind ascending.
  for (std::size_t i = 0; i < schema.slots.size(); ++i) {
    std::vector<std::size_t> group;
    for (std::size_t j = 0; j < schema.slots.size(); ++j) {
      if (schema.slots[j] == schema.slots[i]) {
        group.push_back(j);
      }
    }
    if (group.size() < 2 || group.front() != i) {
      continue;
    }
    std::vector<ObjectId> ids;
    for (auto j : group) {
      ids.push_back(bindings[j]);
    }
    std::sort(ids.begin(), ids.end());
    for (std::size_t g = 0; g < group.size(); ++g) {
      bindings[group[g]] = ids[g];
    }
  }
  return lookup(bindings);
}

AgentRequest LlmPolicy::request(std::string prompt) const {
  AgentRequest req;
  req.prompt = std::move(prompt);
  req.temperature = options_.temperature;
  req.max_tokens = options_.max_tokens;
  req.model = options_.model;
  return req;
}

Selection LlmPolicy::select(const SelectionContext& context) {
  require_candidates(context);
  Selection out;
  auto& trace = out.trace;

  for (const auto& schema : context.schemas) {
    if (!candidates_of_type(context.candidates, schema.name).empty() &&
        std::find(trace.presented_types.begin(), trace.presented_types.end(), schema.name) ==
            trace.presented_types.end()) {
      trace.presented_types.push_back(schema.name);
    }
  }

  const auto type_prompt =
      render_type_prompt(templates_.type_selection, context.memory, trace.presented_types);
  for (int attempt = 0; attempt <= options_.max_parse_retries && !trace.type_index; ++attempt) {
    auto text = gateway_.complete(request(type_prompt), Phase::TypeSelection, context.iteration,
                                  attempt > 0);
    trace.retries += attempt > 0 ? 1 : 0;
    trace.raw_texts.push_back(text);
    try {
      trace.type_index = parse_type_selection(text, trace.presented_types.size());
    } catch (const ParseError&) {
    }
  }
  if (!trace.type_index) {
    trace.fallback = true;
    out.candidate = context.candidates[uniform_index(context.rng, context.candidates.size())];
    return out;
  }

  const auto& type_name = trace.presented_types[*trace.type_index];
  const auto* schema = find_schema(context.schemas, type_name);
  std::vector<SlotCandidates> slots;
  std::vector<std::size_t> sizes;
  for (const auto& kind : schema->slots) {
    SlotCandidates slot{kind, {}};
    for (ObjectId id : context.pool.of_kind(kind)) {
      slot.labels.push_back(context.pool.get(id).label);
    }
    sizes.push_back(slot.labels.size());
    slots.push_back(std::move(slot));
  }

  const auto object_prompt = render_object_prompt(templates_.object_selection, context.memory, slots);
  for (int attempt = 0; attempt <= options_.max_parse_retries; ++attempt) {
    auto text = gateway_.complete(request(object_prompt), Phase::ObjectSelection, context.iteration,
                                  attempt > 0);
    trace.retries += attempt > 0 ? 1 : 0;
    trace.raw_texts.push_back(text);
    try {
      auto indices = parse_object_selection(text, sizes);
      std::vector<ObjectId> bindings;
      for (std::size_t s = 0; s < indices.size(); ++s) {
        bindings.push_back(context.pool.of_kind(schema->slots[s])[indices[s]]);
      }
      const auto* match = match_candidate(context.candidates, *schema, std::move(bindings));
      if (match == nullptr) {
        throw ParseError(fmt::format("{} is not an available {} action",
                                     format_object_selection(indices), type_name),
                         text);
      }
      trace.object_indices = std::move(indices);
      out.candidate = *match;
      return out;
    } catch (const ParseError&) {
    }
  }

  trace.fallback = true;
  const auto pool = candidates_of_type(context.candidates, type_name);
  out.candidate = context.candidates[pool[uniform_index(context.rng, pool.size())]];
  return out;
}

Selection RandomPolicy::select(const SelectionContext& context) {
  require_candidates(context);
  Selection out;
  out.candidate = context.candidates[uniform_index(context.rng, context.candidates.size())];
  return out;
}

Selection ScriptedPolicy::select(const SelectionContext& context) {
  require_candidates(context);
  if (next_ >= actions_.size()) {
    throw ConfigError(fmt::format("scripted actions exhausted at iteration {}", context.iteration));
  }
  const auto& want = actions_[next_];
  for (const auto& candidate : context.candidates) {
    if (candidate.action_type == want.action_type &&
        binding_labels(candidate, context.pool) == want.labels) {
      ++next_;
      return Selection{candidate, {}};
    }
  }
  throw ConfigError(fmt::format("scripted action {} #{} is not available at iteration {}",
                                want.action_type, next_, context.iteration));
}

void ScriptedPolicy::restore(const nlohmann::json& cursor) {
  if (cursor.is_null()) {
    next_ = 0;
    return;
  }
  if (!cursor.is_number_integer() || cursor.get<std::int64_t>() < 0) {
    throw CheckpointError(fmt::format("scripted policy cursor {} is not a step index", cursor.dump()));
  }
  next_ = cursor.get<std::size_t>();
}

}  // namespace pipeforge
