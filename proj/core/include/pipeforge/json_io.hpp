// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>

#include <nlohmann/json.hpp>

#include "pipeforge/agent.hpp"
#include "pipeforge/memory.hpp"
#include "pipeforge/registry.hpp"

namespace pipeforge {

using nlohmann::json;

/// Tagged form: {"type": "scalar" | "tuple" | "path" | "model" | "dataset", ...}.
json payload_to_json(const Payload& payload);
Payload payload_from_json(const json& doc);

/// Plain simulated-object documents as referenced from configs:
/// {"skills": [...]} is a model, {"targets": [...], "coverage": [...],
/// "examples": n} is a dataset. Anything else yields nothing.
std::optional<Payload> parse_sim_document(const json& doc);
json sim_document(const SimModel& model);
json sim_document(const SimDataset& data);

/// Reads a whole file; throws ConfigError when it is missing or not JSON.
json read_json_file(const std::filesystem::path& path);

json registry_to_json(const Registry& registry);
Registry registry_from_json(const json& doc);

json trial_to_json(const TrialRecord& record);
TrialRecord trial_from_json(const json& doc);

json memory_to_json(const MemoryState& memory);
MemoryState memory_from_json(const json& doc);

/// Latency is only written when `timing` is set so that traces stay
/// byte-comparable.
json agent_call_to_json(const AgentCall& call, bool timing = false);
AgentCall agent_call_from_json(const json& doc);

}  // namespace pipeforge
