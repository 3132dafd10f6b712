// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pipeforge/action_space.hpp"
#include "pipeforge/registry.hpp"
#include "pipeforge/sim_model.hpp"

namespace pipeforge {

struct ExecutionContext {
  std::size_t step = 0;
  std::filesystem::path work_dir = "artifacts";
  SimConstants simulator;
};

struct ExecutionOutput {
  Payload payload;
  std::string log;
};

/// Runs one action type. Inputs arrive in schema slot order.
class ActionExecutor {
 public:
  virtual ~ActionExecutor() = default;
  virtual ExecutionOutput run(std::span<const ObjectEntry* const> inputs,
                              const ExecutionContext& context) const = 0;
};

/// Expects exactly one SimModel, one SimDataset and one scalar learning rate.
class SimSftExecutor final : public ActionExecutor {
 public:
  ExecutionOutput run(std::span<const ObjectEntry* const> inputs,
                      const ExecutionContext& context) const override;
};

/// Expects SimModels (the first is the merge base), a weight tuple and a
/// scalar density.
class SimTiesExecutor final : public ActionExecutor {
 public:
  ExecutionOutput run(std::span<const ObjectEntry* const> inputs,
                      const ExecutionContext& context) const override;
};

/// Bridges to external tooling. `slot_placeholders[i]` names the template
/// placeholder that receives slot i; "{out}" receives the output path.
class ShellExecutor final : public ActionExecutor {
 public:
  ShellExecutor(std::string command, std::vector<std::string> slot_placeholders,
                std::chrono::milliseconds timeout)
      : command_(std::move(command)),
        slot_placeholders_(std::move(slot_placeholders)),
        timeout_(timeout) {}

  ExecutionOutput run(std::span<const ObjectEntry* const> inputs,
                      const ExecutionContext& context) const override;

 private:
  std::string command_;
  std::vector<std::string> slot_placeholders_;
  std::chrono::milliseconds timeout_;
};

using ExecutorBindings = std::map<std::string, std::shared_ptr<const ActionExecutor>>;

/// Text form of a payload for command lines and reports.
std::string payload_argument(const Payload& payload);

/// Runs the action and registers its output as model "0--<step>--0" with a
/// lineage edge back to the bound inputs.
ModelArtifact execute(const ActionCandidate& action, const ExecutorBindings& executors,
                      Registry& registry, const ExecutionContext& context,
                      std::string* log = nullptr);

}  // namespace pipeforge
