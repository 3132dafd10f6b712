// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pipeforge/action_space.hpp"
#include "pipeforge/evaluation.hpp"
#include "pipeforge/executor.hpp"
#include "pipeforge/policy.hpp"
#include "pipeforge/registry.hpp"
#include "pipeforge/sim_model.hpp"

namespace pipeforge {

struct ObjectSpec {
  std::string label;
  Payload payload;
};

struct ObjectGroup {
  std::string kind;
  std::vector<ObjectSpec> objects;
};

struct ExecutorSpec {
  std::string kind;  // "sim_sft" | "sim_ties" | "shell"
  std::string command;
  std::vector<std::string> placeholders;
  std::chrono::milliseconds timeout{std::chrono::hours(24)};
};

struct EvaluatorSpec {
  std::string kind;  // "sim_skill" | "table" | "shell"
  std::size_t skill = 0;
  double scale = 1.0;
  std::map<std::string, double> table;
  std::string command;
  std::chrono::milliseconds timeout{std::chrono::hours(1)};
};

struct EndpointConfig {
  std::string url;
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::milliseconds timeout{60000};
  RetryPolicy retry;
};

struct PolicyOptions {
  double temperature = 0.0;
  int max_tokens = 1024;
  int max_parse_retries = 3;
  PairMode merge_pairs = PairMode::Auto;
  std::size_t memory_cap = 0;
  bool include_task_scores = false;
  std::string agent_script;
  std::string template_dir;
  std::vector<ScriptedAction> scripted_actions;
};

/// The run configuration: the keys of the reference example plus the
/// "executors", "simulator", "evaluators", "test_tasks", "endpoint",
/// "policy_options" and "work_dir" extensions.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t total_timesteps = 0;
  std::string controller = "LaMDAgent_gpt";
  std::string controller_model;
  std::vector<ObjectGroup> objects;
  std::vector<ActionSchema> action_types;
  std::vector<TaskSpec> eval_tasks;
  std::vector<TaskSpec> test_tasks;
  Aggregation score_aggregation = Aggregation::Mean;
  std::map<std::string, ExecutorSpec> executors;
  SimConstants simulator;
  std::map<std::string, EvaluatorSpec> evaluators;
  EndpointConfig endpoint;
  PolicyOptions policy;
  std::filesystem::path work_dir = "artifacts";
  /// Directory relative paths are resolved against.
  std::filesystem::path base_dir = ".";
  /// The document as read (after comma cleanup), kept for checkpoints and
  /// trace headers.
  nlohmann::ordered_json source;

  PolicyKind policy_kind() const { return policy_kind_from_string(controller); }
  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

/// Removes commas that directly precede '}' or ']' outside string literals.
std::string strip_trailing_commas(std::string_view text);

/// Maximum attainable value of a known metric ("acc" 1, "mt_bench" 10, ...).
std::optional<double> metric_max(std::string_view metric);

RunConfig parse_config(const nlohmann::ordered_json& doc, const std::filesystem::path& base_dir = ".");
RunConfig parse_config_text(std::string_view text, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);

/// Structural checks. Throws ConfigError with the first problem found.
void validate_config(const RunConfig& config);

/// Registers every configured object in declaration order.
Registry build_registry(const RunConfig& config);

ExecutorBindings build_executors(const RunConfig& config);

/// Evaluators for `tasks`; tasks without an explicit binding score the
/// simulated skill at their position in eval_tasks.
EvaluatorBindings build_evaluators(const RunConfig& config, std::span<const TaskSpec> tasks);

}  // namespace pipeforge
