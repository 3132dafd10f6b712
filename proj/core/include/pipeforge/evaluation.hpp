// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pipeforge/registry.hpp"

namespace pipeforge {

struct TaskSpec {
  std::string name;
  std::string metric;
  double max_value = 1.0;  // maximum attainable value of the metric
  double weight = 1.0;     // alpha_k
};

struct TaskScore {
  std::string task;
  double value = 0.0;

  friend bool operator==(const TaskScore&, const TaskScore&) = default;
};

/// Per-task values in configured task order.
using ScoreVector = std::vector<TaskScore>;

enum class Aggregation {
  WeightedSum,  // sum_k alpha_k * s_k
  Mean,         // sum_k alpha_k * s_k / sum_k alpha_k
};

Aggregation aggregation_from_string(std::string_view text);
std::string_view to_string(Aggregation rule);

/// alpha_k = 1 / max_value_k, so every task contributes at most 1.
std::vector<double> derive_weights(std::span<const double> max_values);
std::vector<double> derive_weights(std::span<const TaskSpec> tasks);

double aggregate(const ScoreVector& scores, std::span<const double> weights, Aggregation rule);
double aggregate(std::span<const double> values, std::span<const double> weights, Aggregation rule);

/// Scores one model on one task.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual double evaluate(const ObjectEntry& model) const = 0;
};

/// Simulated metric: scale * clamp(skills[skill], 0, 1).
class SimSkillEvaluator final : public Evaluator {
 public:
  explicit SimSkillEvaluator(std::size_t skill, double scale = 1.0) : skill_(skill), scale_(scale) {}
  double evaluate(const ObjectEntry& model) const override;

 private:
  std::size_t skill_;
  double scale_;
};

/// Fixed label -> value table (external results imported verbatim).
class TableEvaluator final : public Evaluator {
 public:
  explicit TableEvaluator(std::map<std::string, double> values) : values_(std::move(values)) {}
  double evaluate(const ObjectEntry& model) const override;

 private:
  std::map<std::string, double> values_;
};

/// Runs a command template ({model}, {label}) and parses the last line of
/// stdout as the score.
class ShellEvaluator final : public Evaluator {
 public:
  ShellEvaluator(std::string command, std::chrono::milliseconds timeout)
      : command_(std::move(command)), timeout_(timeout) {}
  double evaluate(const ObjectEntry& model) const override;

 private:
  std::string command_;
  std::chrono::milliseconds timeout_;
};

using EvaluatorBindings = std::map<std::string, std::shared_ptr<const Evaluator>>;

/// Evaluates `model` on every task. Values outside [0, max_value] are
/// rejected as evaluator failures.
ScoreVector evaluate(const ObjectEntry& model, std::span<const TaskSpec> tasks,
                     const EvaluatorBindings& evaluators);

}  // namespace pipeforge
