// SPDX-License-Identifier: Apache-2.0

#include "pipeforge/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "pipeforge/error.hpp"
#include "pipeforge/evaluation.hpp"
#include "pipeforge/executor.hpp"
#include "pipeforge/json_io.hpp"

namespace pipeforge {

namespace {

std::pair<ScoreVector, double> score(const ObjectEntry& model, std::span<const TaskSpec> tasks,
                                     const EvaluatorBindings& evaluators, Aggregation rule) {
  auto scores = evaluate(model, tasks, evaluators);
  const auto weights = derive_weights(tasks);
  const auto value = aggregate(scores, weights, rule);
  return {std::move(scores), value};
}

RunConfig scaled(const RunConfig& config, double factor) {
  if (!(factor > 0)) {
    throw ExperimentError(fmt::format("data factor must be positive, got {}", factor));
  }
  RunConfig out = config;
  if (factor == 1.0) {
    return out;
  }
  for (auto& group : out.objects) {
    for (auto& obj : group.objects) {
      if (auto* data = std::get_if<SimDataset>(&obj.payload)) {
        const auto n = std::llround(static_cast<double>(data->examples) * factor);
        data->examples = static_cast<std::uint64_t>(std::max<long long>(1, n));
      }
    }
  }
  return out;
}

void check_substitutions(const Registry& pool, const std::map<std::string, std::string>& subs) {
  for (const auto& [from, to] : subs) {
    bool found = false;
    for (const auto& kind : pool.kinds()) {
      if (pool.find(kind, from) == nullptr) {
        continue;
      }
      found = true;
      if (pool.find(kind, to) == nullptr) {
        throw ExperimentError(fmt::format("substitution target '{}' is not a '{}' object", to, kind));
      }
    }
    if (!found) {
      throw ExperimentError(fmt::format("substitution source '{}' is not in the object pool", from));
    }
  }
}

std::string number(double v) { return fmt::format("{}", v); }

}  // namespace

nlohmann::json pipeline_to_json(const PipelineScript& script) {
  auto steps = nlohmann::json::array();
  for (const auto& s : script.steps) {
    steps.push_back(nlohmann::json{{"action", s.action}, {"objects", s.objects}, {"output", s.output}});
  }
  return nlohmann::json{{"version", kPipelineVersion}, {"steps", std::move(steps)}};
}

PipelineScript pipeline_from_json(const nlohmann::json& doc) {
  try {
    if (doc.value("version", kPipelineVersion) != kPipelineVersion) {
      throw ExperimentError(fmt::format("pipeline version {} is not supported", doc.at("version").dump()));
    }
    PipelineScript script;
    for (const auto& s : doc.at("steps")) {
      script.steps.push_back(ScriptStep{s.at("action").get<std::string>(),
                                        s.at("objects").get<std::vector<std::string>>(),
                                        s.value("output", std::string())});
    }
    return script;
  } catch (const nlohmann::json::exception& e) {
    throw ExperimentError(fmt::format("malformed pipeline: {}", e.what()));
  }
}

PipelineScript load_pipeline(const std::filesystem::path& path) {
  return pipeline_from_json(read_json_file(path));
}

void save_pipeline(const PipelineScript& script, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw ExperimentError(fmt::format("cannot write {}", path.string()));
  }
  out << pipeline_to_json(script).dump(2) << '\n';
}

PipelineScript pipeline_from_lineage(const Registry& registry, ObjectId model) {
  PipelineScript script;
  for (const auto& step : registry.lineage_pipeline(model)) {
    script.steps.push_back(ScriptStep{step.action_type, step.labels, step.output});
  }
  return script;
}

PipelineScript pipeline_from_trials(std::span<const TrialRecord> history, std::size_t index) {
  if (index >= history.size()) {
    throw ExperimentError(fmt::format("trial #{} does not exist ({} trials)", index, history.size()));
  }
  std::map<std::string, std::size_t> producer;
  for (std::size_t i = 0; i < history.size(); ++i) {
    producer[history[i].produced_label] = i;
  }
  std::set<std::size_t> needed;
  std::vector<std::size_t> stack{index};
  while (!stack.empty()) {
    const auto i = stack.back();
    stack.pop_back();
    if (!needed.insert(i).second) {
      continue;
    }
    for (const auto& label : history[i].labels) {
      auto it = producer.find(label);
      if (it != producer.end() && history[it->second].step < history[i].step) {
        stack.push_back(it->second);
      }
    }
  }
  std::vector<std::size_t> order(needed.begin(), needed.end());
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return history[a].step < history[b].step; });
  PipelineScript script;
  for (auto i : order) {
    script.steps.push_back(ScriptStep{history[i].action_type, history[i].labels, history[i].produced_label});
  }
  return script;
}

ReplayResult replay(const RunConfig& config, const PipelineScript& script, const ReplayOptions& options) {
  if (script.steps.empty()) {
    throw ExperimentError("pipeline has no actions");
  }
  const auto run_config = scaled(config, options.data_factor);
  auto registry = build_registry(run_config);
  check_substitutions(registry, options.substitutions);
  const auto executors = build_executors(run_config);
  const auto evaluators = build_evaluators(run_config, run_config.eval_tasks);

  std::map<std::string, ObjectId> produced;
  ReplayResult out;
  ObjectId last;
  for (std::size_t i = 0; i < script.steps.size(); ++i) {
    const auto& step = script.steps[i];
    const auto* schema = find_schema(run_config.action_types, step.action);
    if (schema == nullptr) {
      throw ExperimentError(fmt::format("pipeline step {} uses unknown action type '{}'", i + 1, step.action));
    }
    if (schema->slots.size() != step.objects.size()) {
      throw ExperimentError(fmt::format("pipeline step {} ({}) names {} objects, the action takes {}", i + 1,
                                        step.action, step.objects.size(), schema->slots.size()));
    }
    ActionCandidate action{step.action, {}};
    for (std::size_t s = 0; s < step.objects.size(); ++s) {
      const auto& label = step.objects[s];
      if (auto it = produced.find(label); it != produced.end()) {
        action.bindings.push_back(it->second);
        continue;
      }
      auto sub = options.substitutions.find(label);
      const auto& resolved = sub == options.substitutions.end() ? label : sub->second;
      const auto* entry = registry.find(schema->slots[s], resolved);
      if (entry == nullptr) {
        throw ExperimentError(fmt::format("pipeline step {} references unknown {} '{}'", i + 1,
                                          schema->slots[s], resolved));
      }
      action.bindings.push_back(entry->id);
    }
    const ExecutionContext exec{i + 1, run_config.work_dir, run_config.simulator};
    const auto artifact = execute(action, executors, registry, exec);
    if (!step.output.empty()) {
      produced[step.output] = artifact.object;
    }
    produced[artifact.label] = artifact.object;
    ReplayStep record{step.action, binding_labels(action, registry), artifact.label, {}, 0.0};
    std::tie(record.scores, record.aggregate) =
        score(registry.get(artifact.object), run_config.eval_tasks, evaluators, run_config.score_aggregation);
    out.steps.push_back(std::move(record));
    last = artifact.object;
  }
  out.scores = out.steps.back().scores;
  out.aggregate = out.steps.back().aggregate;
  out.final_payload = registry.get(last).payload;
  if (!run_config.test_tasks.empty()) {
    const auto test_evaluators = build_evaluators(run_config, run_config.test_tasks);
    auto [scores, value] =
        score(registry.get(last), run_config.test_tasks, test_evaluators, run_config.score_aggregation);
    out.test_scores = std::move(scores);
    out.test_aggregate = value;
  }
  return out;
}

std::vector<ScaleRow> scale_data_replay(const RunConfig& config, const PipelineScript& script,
                                        std::span<const double> factors) {
  std::vector<ScaleRow> rows;
  for (double f : factors) {
    ReplayOptions options;
    options.data_factor = f;
    rows.push_back(ScaleRow{f, replay(config, script, options)});
  }
  return rows;
}

TransferResult transfer_model_replay(const RunConfig& config, const PipelineScript& script,
                                     const std::map<std::string, std::string>& substitutions) {
  check_substitutions(build_registry(config), substitutions);
  ReplayOptions options;
  options.substitutions = substitutions;
  return TransferResult{replay(config, script), replay(config, script, options)};
}

std::vector<std::vector<double>> simplex_lattice(std::size_t dimension, double step) {
  if (dimension == 0 || !(step > 0) || step > 1) {
    throw ExperimentError(fmt::format("grid step must be in (0, 1], got {}", step));
  }
  const auto parts = static_cast<std::size_t>(std::llround(1.0 / step));
  if (parts == 0 || std::abs(static_cast<double>(parts) * step - 1.0) > 1e-9) {
    throw ExperimentError(fmt::format("grid step {} does not divide 1", step));
  }
  std::vector<std::vector<double>> out;
  std::vector<std::size_t> counts(dimension, 0);
  // Odometer over compositions of `parts` into `dimension` terms.
  auto emit = [&](auto& self, std::size_t i, std::size_t left) -> void {
    if (i + 1 == dimension) {
      counts[i] = left;
      std::vector<double> w(dimension);
      for (std::size_t k = 0; k < dimension; ++k) {
        w[k] = static_cast<double>(counts[k]) / static_cast<double>(parts);
      }
      out.push_back(std::move(w));
      return;
    }
    for (std::size_t c = 0; c <= left; ++c) {
      counts[i] = c;
      self(self, i + 1, left - c);
    }
  };
  emit(emit, 0, parts);
  return out;
}

GridResult grid_search_ties(const SimModel& base, std::span<const SimModel> specialists, double step,
                            double density, const ModelScorer& scorer) {
  if (specialists.size() < 2) {
    throw ExperimentError("grid search needs at least two specialists");
  }
  const auto lattice = simplex_lattice(specialists.size(), step);
  if (lattice.empty()) {
    throw ExperimentError("empty weight grid");
  }
  GridResult out;
  for (const auto& weights : lattice) {
    auto merged = ties_merge(base, specialists, MergeSpec{weights, density});
    auto [scores, value] = scorer(merged);
    if (out.rows.empty() || value > out.rows[out.best].aggregate) {
      out.best = out.rows.size();
      out.best_model = merged;
    }
    out.rows.push_back(GridRow{weights, std::move(scores), value});
  }
  return out;
}

GridResult grid_search_ties(const RunConfig& config, double step) {
  const auto registry = build_registry(config);
  const SimModel* base = nullptr;
  for (ObjectId id : registry.of_kind("base_models")) {
    base = std::get_if<SimModel>(&registry.get(id).payload);
    break;
  }
  if (base == nullptr) {
    throw ExperimentError("grid search needs a simulated model under base_models");
  }
  std::vector<SimModel> specialists;
  for (ObjectId id : registry.of_kind(kModelKind)) {
    const auto* model = std::get_if<SimModel>(&registry.get(id).payload);
    if (model != nullptr && *model != *base) {
      specialists.push_back(*model);
    }
  }
  double density = 0.5;
  for (ObjectId id : registry.of_kind("ties_density")) {
    if (const auto* v = std::get_if<double>(&registry.get(id).payload)) {
      density = *v;
      break;
    }
  }
  const auto evaluators = build_evaluators(config, config.eval_tasks);
  const auto scorer = [&](const SimModel& model) {
    const ObjectEntry entry{ObjectId{}, std::string(kModelKind), "grid", model, std::nullopt};
    return score(entry, config.eval_tasks, evaluators, config.score_aggregation);
  };
  return grid_search_ties(*base, specialists, step, density, scorer);
}

RunState run_random_baseline(RunConfig config, OrchestratorOptions options) {
  config.controller = "random";
  config.source["controller"] = "random";
  Orchestrator orchestrator(std::move(config), std::move(options));
  return orchestrator.run();
}

std::string Table::to_tsv() const {
  std::string out = fmt::format("{}\n", fmt::join(columns, "\t"));
  for (const auto& row : rows) {
    std::vector<std::string> cells;
    for (const auto& cell : row) {
      if (cell.is_null()) {
        cells.emplace_back();
      } else if (cell.is_string()) {
        cells.push_back(cell.get<std::string>());
      } else if (cell.is_number_float()) {
        cells.push_back(number(cell.get<double>()));
      } else {
        cells.push_back(cell.dump());
      }
    }
    out += fmt::format("{}\n", fmt::join(cells, "\t"));
  }
  return out;
}

nlohmann::json Table::to_json() const {
  auto doc_rows = nlohmann::json::array();
  for (const auto& row : rows) {
    auto obj = nlohmann::json::object();
    for (std::size_t i = 0; i < columns.size() && i < row.size(); ++i) {
      obj[columns[i]] = row[i];
    }
    doc_rows.push_back(std::move(obj));
  }
  return nlohmann::json{{"version", 1}, {"meta", meta}, {"columns", columns}, {"rows", std::move(doc_rows)}};
}

Table grid_table(const GridResult& result, std::span<const TaskSpec> tasks, double step) {
  Table table;
  table.columns = {"weights"};
  for (const auto& t : tasks) {
    table.columns.push_back(t.name);
  }
  table.columns.push_back("aggregate");
  table.meta = nlohmann::json{{"grid_step", step}, {"points", result.rows.size()}, {"best", result.best}};
  for (const auto& row : result.rows) {
    std::vector<nlohmann::json> cells{fmt::format("{}", fmt::join(row.weights, ","))};
    for (const auto& s : row.scores) {
      cells.emplace_back(s.value);
    }
    cells.emplace_back(row.aggregate);
    table.rows.push_back(std::move(cells));
  }
  return table;
}

Table scale_table(std::span<const ScaleRow> rows) {
  Table table;
  table.columns = {"factor"};
  if (!rows.empty()) {
    for (const auto& s : rows.front().result.scores) {
      table.columns.push_back(s.task);
    }
  }
  table.columns.push_back("aggregate");
  table.columns.push_back("test_aggregate");
  for (const auto& row : rows) {
    std::vector<nlohmann::json> cells{row.factor};
    for (const auto& s : row.result.scores) {
      cells.emplace_back(s.value);
    }
    cells.emplace_back(row.result.aggregate);
    cells.emplace_back(row.result.test_aggregate ? nlohmann::json(*row.result.test_aggregate) : nlohmann::json());
    table.rows.push_back(std::move(cells));
  }
  return table;
}

Table transfer_table(const TransferResult& result) {
  Table table;
  table.columns = {"run"};
  for (const auto& s : result.original.scores) {
    table.columns.push_back(s.task);
  }
  table.columns.push_back("aggregate");
  table.columns.push_back("test_aggregate");
  for (const auto& [name, r] : {std::pair<const char*, const ReplayResult*>{"original", &result.original},
                                std::pair<const char*, const ReplayResult*>{"substituted", &result.substituted}}) {
    std::vector<nlohmann::json> cells{name};
    for (const auto& s : r->scores) {
      cells.emplace_back(s.value);
    }
    cells.emplace_back(r->aggregate);
    cells.emplace_back(r->test_aggregate ? nlohmann::json(*r->test_aggregate) : nlohmann::json());
    table.rows.push_back(std::move(cells));
  }
  return table;
}

Table replay_table(const ReplayResult& result) {
  Table table;
  table.columns = {"step", "action", "objects", "output"};
  if (!result.steps.empty()) {
    for (const auto& s : result.steps.front().scores) {
      table.columns.push_back(s.task);
    }
  }
  table.columns.push_back("aggregate");
  for (std::size_t i = 0; i < result.steps.size(); ++i) {
    const auto& step = result.steps[i];
    std::vector<nlohmann::json> cells{i + 1, step.action, fmt::format("{}", fmt::join(step.labels, ",")),
                                      step.output};
    for (const auto& s : step.scores) {
      cells.emplace_back(s.value);
    }
    cells.emplace_back(step.aggregate);
    table.rows.push_back(std::move(cells));
  }
  return table;
}

}  // namespace pipeforge
