// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pipeforge/config.hpp"
#include "pipeforge/memory.hpp"
#include "pipeforge/orchestrator.hpp"
#include "pipeforge/registry.hpp"
#include "pipeforge/sim_model.hpp"

namespace pipeforge {

inline constexpr int kPipelineVersion = 1;

/// One action with its objects named by label. Outputs of earlier steps are
/// referred to by the label the step declares in `output`.
struct ScriptStep {
  std::string action;
  std::vector<std::string> objects;
  std::string output;

  friend bool operator==(const ScriptStep&, const ScriptStep&) = default;
};

struct PipelineScript {
  std::vector<ScriptStep> steps;

  friend bool operator==(const PipelineScript&, const PipelineScript&) = default;
};

nlohmann::json pipeline_to_json(const PipelineScript& script);
PipelineScript pipeline_from_json(const nlohmann::json& doc);
PipelineScript load_pipeline(const std::filesystem::path& path);
void save_pipeline(const PipelineScript& script, const std::filesystem::path& path);

PipelineScript pipeline_from_lineage(const Registry& registry, ObjectId model);

/// Rebuilds the pipeline of history[index] by following produced labels
/// back through earlier trials.
PipelineScript pipeline_from_trials(std::span<const TrialRecord> history, std::size_t index);

struct ReplayOptions {
  double data_factor = 1.0;  // multiplies every simulated dataset's size
  std::map<std::string, std::string> substitutions;
};

struct ReplayStep {
  std::string action;
  std::vector<std::string> labels;  // as executed, after substitution
  std::string output;
  ScoreVector scores;
  double aggregate = 0.0;
};

struct ReplayResult {
  std::vector<ReplayStep> steps;
  ScoreVector scores;  // final model, validation tasks
  double aggregate = 0.0;
  ScoreVector test_scores;  // final model, test tasks (if configured)
  std::optional<double> test_aggregate;
  Payload final_payload;
};

/// Executes the script from the configured initial objects.
ReplayResult replay(const RunConfig& config, const PipelineScript& script,
                    const ReplayOptions& options = {});

struct ScaleRow {
  double factor = 1.0;
  ReplayResult result;
};

std::vector<ScaleRow> scale_data_replay(const RunConfig& config, const PipelineScript& script,
                                        std::span<const double> factors);

struct TransferResult {
  ReplayResult original;
  ReplayResult substituted;
};

/// Throws ExperimentError when a substitution names a label absent from the
/// pool or maps it to a label missing from the same kind.
TransferResult transfer_model_replay(const RunConfig& config, const PipelineScript& script,
                                     const std::map<std::string, std::string>& substitutions);

/// Weight vectors w with w_i in {0, step, ..., 1} and sum 1, in
/// lexicographic order. `step` must divide 1.
std::vector<std::vector<double>> simplex_lattice(std::size_t dimension, double step);

struct GridRow {
  std::vector<double> weights;
  ScoreVector scores;
  double aggregate = 0.0;
};

struct GridResult {
  std::vector<GridRow> rows;
  std::size_t best = 0;  // first row with the highest aggregate
  SimModel best_model;
};

using ModelScorer = std::function<std::pair<ScoreVector, double>(const SimModel&)>;

GridResult grid_search_ties(const SimModel& base, std::span<const SimModel> specialists, double step,
                            double density, const ModelScorer& scorer);

/// Base: the first "base_models" object; specialists: the simulated
/// "models" objects that differ from it; density: the first
/// "ties_density" value (0.5 if none).
GridResult grid_search_ties(const RunConfig& config, double step);

/// The configured loop with the random policy.
RunState run_random_baseline(RunConfig config, OrchestratorOptions options = {});

/// Rows of plain values, exported as tab-separated text or JSON.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<nlohmann::json>> rows;
  nlohmann::json meta = nlohmann::json::object();

  std::string to_tsv() const;
  nlohmann::json to_json() const;
};

Table grid_table(const GridResult& result, std::span<const TaskSpec> tasks, double step);
Table scale_table(std::span<const ScaleRow> rows);
Table transfer_table(const TransferResult& result);
Table replay_table(const ReplayResult& result);

}  // namespace pipeforge
