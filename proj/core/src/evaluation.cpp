// SPDX-License-Identifier: Apache-2.0

#include "pipeforge/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include <fmt/format.h>

#include "pipeforge/error.hpp"
#include "pipeforge/shell.hpp"

namespace pipeforge {

Aggregation aggregation_from_string(std::string_view text) {
  if (text == "mean") return Aggregation::Mean;
  if (text == "weighted_sum") return Aggregation::WeightedSum;
  throw ConfigError(fmt::format("unknown score aggregation '{}' (expected mean|weighted_sum)", text));
}

std::string_view to_string(Aggregation rule) {
  return rule == Aggregation::Mean ? "mean" : "weighted_sum";
}

std::vector<double> derive_weights(std::span<const double> max_values) {
  std::vector<double> weights;
  weights.reserve(max_values.size());
  for (double max_value : max_values) {
    if (!(max_value > 0.0)) {
      throw ConfigError(fmt::format("task maximum must be positive, got {}", max_value));
    }
    weights.push_back(1.0 / max_value);
  }
  return weights;
}

std::vector<double> derive_weights(std::span<const TaskSpec> tasks) {
  std::vector<double> max_values;
  for (const auto& task : tasks) {
    max_values.push_back(task.max_value);
  }
  return derive_weights(max_values);
}

double aggregate(std::span<const double> values, std::span<const double> weights, Aggregation rule) {
  if (values.size() != weights.size()) {
    throw EvaluationError(fmt::format("{} scores cannot be aggregated with {} weights",
                                      values.size(), weights.size()));
  }
  double weighted = 0.0;
  double weight_total = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    weighted += weights[k] * values[k];
    weight_total += weights[k];
  }
  if (rule == Aggregation::WeightedSum) {
    return weighted;
  }
  if (!(weight_total > 0.0)) {
    throw EvaluationError("mean aggregation needs a positive total weight");
  }
  return weighted / weight_total;
}

double aggregate(const ScoreVector& scores, std::span<const double> weights, Aggregation rule) {
  std::vector<double> values;
  values.reserve(scores.size());
  for (const auto& s : scores) {
    values.push_back(s.value);
  }
  return aggregate(values, weights, rule);
}

double SimSkillEvaluator::evaluate(const ObjectEntry& model) const {
  const auto* sim = std::get_if<SimModel>(&model.payload);
  if (sim == nullptr) {
    throw EvaluationError(fmt::format("'{}' is not a simulated model", model.label));
  }
  if (skill_ >= sim->dimension()) {
    throw EvaluationError(fmt::format("'{}' has no skill #{}", model.label, skill_));
  }
  return scale_ * std::clamp(sim->skills[skill_], 0.0, 1.0);
}

double TableEvaluator::evaluate(const ObjectEntry& model) const {
  auto it = values_.find(model.label);
  if (it == values_.end()) {
    throw EvaluationError(fmt::format("no tabulated score for '{}'", model.label));
  }
  return it->second;
}

double ShellEvaluator::evaluate(const ObjectEntry& model) const {
  std::map<std::string, std::string> values{{"label", model.label}};
  if (const auto* path = std::get_if<PathRef>(&model.payload)) {
    values["model"] = path->path;
  } else {
    values["model"] = model.label;
  }
  const auto result = run_shell(render_command(command_, values), timeout_);
  if (result.timed_out || result.exit_code != 0) {
    throw EvaluationError(fmt::format("evaluator command failed for '{}' (exit {}): {}",
                                      model.label, result.exit_code, result.stderr_text));
  }
  std::istringstream lines(result.stdout_text);
  std::string line;
  std::string last;
  while (std::getline(lines, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      last = line;
    }
  }
  const auto first = last.find_first_not_of(" \t");
  const auto end = last.find_last_not_of(" \t\r");
  if (first == std::string::npos) {
    throw EvaluationError(fmt::format("evaluator printed no score for '{}'", model.label));
  }
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(last.data() + first, last.data() + end + 1, value);
  if (ec != std::errc{} || ptr != last.data() + end + 1) {
    throw EvaluationError(fmt::format("evaluator output '{}' is not a number", last));
  }
  return value;
}

ScoreVector evaluate(const ObjectEntry& model, std::span<const TaskSpec> tasks,
                     const EvaluatorBindings& evaluators) {
  ScoreVector scores;
  scores.reserve(tasks.size());
  for (const auto& task : tasks) {
    auto it = evaluators.find(task.name);
    if (it == evaluators.end() || !it->second) {
      throw EvaluationError(fmt::format("no evaluator bound to task '{}'", task.name));
    }
    const double value = it->second->evaluate(model);
    if (!(value >= 0.0 && value <= task.max_value)) {
      throw EvaluationError(fmt::format("task '{}' scored {} outside [0, {}]", task.name, value,
                                        task.max_value));
    }
    scores.push_back(TaskScore{task.name, value});
  }
  return scores;
}

}  // namespace pipeforge
