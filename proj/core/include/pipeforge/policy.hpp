// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pipeforge/action_space.hpp"
#include "pipeforge/agent.hpp"
#include "pipeforge/prompts.hpp"
#include "pipeforge/registry.hpp"

namespace pipeforge {

enum class PolicyKind {
  Llm,
  Random,
  Scripted,
};

/// "LaMDAgent_gpt" and "llm" name the agent policy.
PolicyKind policy_kind_from_string(std::string_view text);
std::string_view to_string(PolicyKind kind);

using Rng = std::mt19937_64;

/// Uniform index in [0, n) by rejection sampling; identical on every
/// standard library.
std::size_t uniform_index(Rng& rng, std::size_t n);

struct SelectionTrace {
  std::vector<std::string> presented_types;
  std::optional<std::size_t> type_index;  // into presented_types
  std::vector<std::size_t> object_indices;
  std::vector<std::string> raw_texts;
  int retries = 0;
  bool fallback = false;
};

struct Selection {
  ActionCandidate candidate;
  SelectionTrace trace;
};

struct SelectionContext {
  std::string_view memory;
  std::span<const ActionSchema> schemas;
  const Registry& pool;
  std::span<const ActionCandidate> candidates;
  std::size_t iteration = 0;
  Rng& rng;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual PolicyKind kind() const = 0;
  /// Throws ConfigError when the candidate set is empty.
  virtual Selection select(const SelectionContext& context) = 0;
  virtual nlohmann::json cursor() const { return nullptr; }
  virtual void restore(const nlohmann::json& /*cursor*/) {}
};

struct LlmPolicyOptions {
  double temperature = 0.0;
  int max_tokens = 1024;
  std::string model;
  int max_parse_retries = 3;
};

/// Two inferences per selection: the action type, then every object of that
/// type in one answer. Only types with at least one candidate are offered.
/// Unparsable answers are re-asked; after max_parse_retries the choice falls
/// back to uniform random (within the chosen type, if any).
class LlmPolicy final : public Policy {
 public:
  LlmPolicy(AgentGateway& gateway, TemplateSet templates, LlmPolicyOptions options = {})
      : gateway_(gateway), templates_(std::move(templates)), options_(std::move(options)) {}

  PolicyKind kind() const override { return PolicyKind::Llm; }
  Selection select(const SelectionContext& context) override;

 private:
  AgentRequest request(std::string prompt) const;

  AgentGateway& gateway_;
  TemplateSet templates_;
  LlmPolicyOptions options_;
};

/// Uniform over the flat candidate list.
class RandomPolicy final : public Policy {
 public:
  PolicyKind kind() const override { return PolicyKind::Random; }
  Selection select(const SelectionContext& context) override;
};

struct ScriptedAction {
  std::string action_type;
  std::vector<std::string> labels;
};

/// Plays back a fixed action sequence; each entry must be among the
/// candidates of its iteration.
class ScriptedPolicy final : public Policy {
 public:
  explicit ScriptedPolicy(std::vector<ScriptedAction> actions) : actions_(std::move(actions)) {}

  PolicyKind kind() const override { return PolicyKind::Scripted; }
  Selection select(const SelectionContext& context) override;
  nlohmann::json cursor() const override { return next_; }
  void restore(const nlohmann::json& cursor) override;

 private:
  std::vector<ScriptedAction> actions_;
  std::size_t next_ = 0;
};

/// Maps an object pick onto the enumerated candidate it denotes. Repeated
/// kinds of an unordered schema are put in registration order; picks that
/// are not enumerated (a self-pair, for one) give nullptr.
const ActionCandidate* match_candidate(std::span<const ActionCandidate> candidates,
                                       const ActionSchema& schema, std::vector<ObjectId> bindings);

}  // namespace pipeforge
