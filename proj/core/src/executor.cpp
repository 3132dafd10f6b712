// SPDX-License-Identifier: Apache-2.0

#include "pipeforge/executor.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "pipeforge/error.hpp"
#include "pipeforge/shell.hpp"

namespace pipeforge {

namespace {

template <typename T>
std::vector<const T*> payloads_of(std::span<const ObjectEntry* const> inputs) {
  std::vector<const T*> out;
  for (const auto* entry : inputs) {
    if (const auto* value = std::get_if<T>(&entry->payload)) {
      out.push_back(value);
    }
  }
  return out;
}

}  // namespace

std::string payload_argument(const Payload& payload) {
  return std::visit(
      [](const auto& value) -> std::string {
        using T = std::decay_t<decltype(value)>;
        if constexpr (std::is_same_v<T, double>) {
          return fmt::format("{}", value);
        } else if constexpr (std::is_same_v<T, RealTuple>) {
          return fmt::format("{}", fmt::join(value, ","));
        } else if constexpr (std::is_same_v<T, PathRef>) {
          return value.path;
        } else if constexpr (std::is_same_v<T, SimModel>) {
          return fmt::format("{}", fmt::join(value.skills, ","));
        } else {
          return fmt::format("{}", fmt::join(value.targets, ","));
        }
      },
      payload);
}

ExecutionOutput SimSftExecutor::run(std::span<const ObjectEntry* const> inputs,
                                    const ExecutionContext& context) const {
  auto models = payloads_of<SimModel>(inputs);
  auto datasets = payloads_of<SimDataset>(inputs);
  auto rates = payloads_of<double>(inputs);
  if (models.size() != 1 || datasets.size() != 1 || rates.size() != 1) {
    throw ExecutorError(fmt::format(
        "simulated SFT needs one simulated model, one simulated dataset and one learning rate "
        "(got {}, {}, {})",
        models.size(), datasets.size(), rates.size()));
  }
  return {sim_sft(*models.front(), *datasets.front(), *rates.front(), context.simulator), {}};
}

ExecutionOutput SimTiesExecutor::run(std::span<const ObjectEntry* const> inputs,
                                     const ExecutionContext& /*context*/) const {
  auto models = payloads_of<SimModel>(inputs);
  auto tuples = payloads_of<RealTuple>(inputs);
  auto scalars = payloads_of<double>(inputs);
  if (models.size() < 3 || tuples.size() != 1 || scalars.size() != 1) {
    throw ExecutorError(fmt::format(
        "simulated TIES needs a base model, at least two models, one weight tuple and one "
        "density (got {} models, {} tuples, {} scalars)",
        models.size(), tuples.size(), scalars.size()));
  }
  std::vector<SimModel> merged;
  for (std::size_t i = 1; i < models.size(); ++i) {
    merged.push_back(*models[i]);
  }
  MergeSpec spec{*tuples.front(), *scalars.front()};
  return {ties_merge(*models.front(), merged, spec), {}};
}

ExecutionOutput ShellExecutor::run(std::span<const ObjectEntry* const> inputs,
                                   const ExecutionContext& context) const {
  if (inputs.size() != slot_placeholders_.size()) {
    throw ExecutorError(fmt::format("shell executor maps {} slots but the action binds {}",
                                    slot_placeholders_.size(), inputs.size()));
  }
  std::map<std::string, std::string> values;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    values[slot_placeholders_[i]] = payload_argument(inputs[i]->payload);
  }
  std::filesystem::create_directories(context.work_dir);
  const auto out = context.work_dir / generated_model_label(context.step, 0);
  values["out"] = out.string();
  auto log = shell_execute(command_, values, out, timeout_);
  return {PathRef{out.string()}, std::move(log)};
}

ModelArtifact execute(const ActionCandidate& action, const ExecutorBindings& executors,
                      Registry& registry, const ExecutionContext& context, std::string* log) {
  auto it = executors.find(action.action_type);
  if (it == executors.end() || !it->second) {
    throw ConfigError(fmt::format("no executor bound to action type '{}'", action.action_type));
  }
  std::vector<const ObjectEntry*> inputs;
  inputs.reserve(action.bindings.size());
  for (ObjectId id : action.bindings) {
    inputs.push_back(&registry.get(id));
  }
  auto output = it->second->run(inputs, context);
  if (log != nullptr) {
    *log = std::move(output.log);
  }
  return registry.register_generated_model(context.step, 0, action.action_type, action.bindings,
                                           std::move(output.payload));
}

}  // namespace pipeforge
