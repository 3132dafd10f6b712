// SPDX-License-Identifier: Apache-2.0

#include "pipeforge/orchestrator.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "pipeforge/error.hpp"
#include "pipeforge/evaluation.hpp"
#include "pipeforge/executor.hpp"
#include "pipeforge/json_io.hpp"

namespace pipeforge {

namespace {

const AgentTrace kEmptyTrace;

std::string rng_to_string(const Rng& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

Rng rng_from_string(const std::string& text) {
  Rng rng;
  std::istringstream in(text);
  in >> rng;
  if (!in) {
    throw CheckpointError("random generator state is corrupt");
  }
  return rng;
}

json selection_record(std::size_t step, std::size_t candidates, const Selection& s,
                      const Registry& pool) {
  json doc{{"type", "selection"},
           {"step", step},
           {"candidates", candidates},
           {"action", s.candidate.action_type},
           {"labels", binding_labels(s.candidate, pool)}};
  if (s.trace.type_index) {
    doc["type_index"] = *s.trace.type_index;
    doc["presented_types"] = s.trace.presented_types;
  }
  if (!s.trace.object_indices.empty()) {
    doc["object_indices"] = s.trace.object_indices;
  }
  doc["retries"] = s.trace.retries;
  doc["fallback"] = s.trace.fallback;
  return doc;
}

}  // namespace

std::unique_ptr<AgentBackend> make_backend(const RunConfig& config) {
  if (!config.policy.agent_script.empty()) {
    return ScriptedAgent::from_file(config.policy.agent_script);
  }
  if (!config.endpoint.url.empty()) {
    EndpointSettings settings;
    settings.url = config.endpoint.url;
    settings.timeout = config.endpoint.timeout;
    if (const char* key = std::getenv(config.endpoint.api_key_env.c_str())) {
      settings.api_key = key;
    }
    return std::make_unique<ChatCompletionsAgent>(std::move(settings));
  }
  throw ConfigError("the agent policy needs policy_options.agent_script or endpoint.url");
}

Orchestrator::Orchestrator(RunConfig config, OrchestratorOptions options,
                           std::unique_ptr<AgentBackend> backend)
    : Orchestrator(std::move(config), std::move(options), std::move(backend), true) {}

Orchestrator::Orchestrator(RunConfig config, OrchestratorOptions options,
                           std::unique_ptr<AgentBackend> backend, bool fresh)
    : config_(std::move(config)), options_(std::move(options)), rng_(config_.seed) {
  validate_config(config_);
  state_.registry = build_registry(config_);
  executors_ = build_executors(config_);
  evaluators_ = build_evaluators(config_, config_.eval_tasks);

  switch (config_.policy_kind()) {
    case PolicyKind::Llm: {
      templates_ = TemplateSet::load(config_.policy.template_dir.empty()
                                         ? TemplateSet::default_directory()
                                         : std::filesystem::path(config_.policy.template_dir));
      if (!backend) {
        backend = make_backend(config_);
      }
      gateway_ = std::make_unique<AgentGateway>(std::move(backend), config_.endpoint.retry);
      LlmPolicyOptions llm;
      llm.temperature = config_.policy.temperature;
      llm.max_tokens = config_.policy.max_tokens;
      llm.model = config_.controller_model;
      llm.max_parse_retries = config_.policy.max_parse_retries;
      policy_ = std::make_unique<LlmPolicy>(*gateway_, templates_, llm);
      gateway_->set_observer([this](const AgentCall& call) {
        auto doc = agent_call_to_json(call, options_.timing);
        doc["type"] = "agent_call";
        trace_.write(doc);
      });
      break;
    }
    case PolicyKind::Random:
      policy_ = std::make_unique<RandomPolicy>();
      break;
    case PolicyKind::Scripted:
      policy_ = std::make_unique<ScriptedPolicy>(config_.policy.scripted_actions);
      break;
  }

  if (fresh && !options_.trace_path.empty()) {
    trace_ = TraceWriter::create(options_.trace_path);
    trace_.write(json{{"type", "run"},
                      {"version", kTraceVersion},
                      {"seed", config_.seed},
                      {"controller", std::string(to_string(config_.policy_kind()))},
                      {"total_timesteps", config_.total_timesteps},
                      {"base_dir", config_.base_dir.string()},
                      {"config", json::parse(config_.source.dump())}});
    trace_.flush();
    committed_offset_ = trace_.offset();
  }
}

Orchestrator::~Orchestrator() = default;

std::unique_ptr<Orchestrator> Orchestrator::resume(const std::filesystem::path& checkpoint,
                                                   OrchestratorOptions options,
                                                   std::unique_ptr<AgentBackend> backend) {
  std::ifstream in(checkpoint);
  if (!in) {
    throw CheckpointError(fmt::format("cannot open checkpoint {}", checkpoint.string()));
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw CheckpointError(fmt::format("checkpoint {} is not valid JSON: {}", checkpoint.string(), e.what()));
  }
  if (!doc.is_object() || !doc.contains("version")) {
    throw CheckpointError(fmt::format("{} is not a checkpoint", checkpoint.string()));
  }
  if (doc.at("version") != kCheckpointVersion) {
    throw CheckpointError(fmt::format("checkpoint version {} is not supported (expected {})",
                                      doc.at("version").dump(), kCheckpointVersion));
  }
  try {
    auto config = parse_config(nlohmann::ordered_json::parse(doc.at("config").dump()),
                               doc.at("base_dir").get<std::string>());
    config.seed = doc.at("seed").get<std::uint64_t>();
    const auto& trace = doc.at("trace");
    if (options.trace_path.empty() && !trace.at("path").get<std::string>().empty()) {
      options.trace_path = trace.at("path").get<std::string>();
    }
    if (options.checkpoint_path.empty()) {
      options.checkpoint_path = checkpoint;
    }
    std::unique_ptr<Orchestrator> run(
        new Orchestrator(std::move(config), std::move(options), std::move(backend), false));
    auto& s = run->state_;
    s.step = doc.at("step").get<std::size_t>();
    s.registry = registry_from_json(doc.at("registry"));
    for (const auto& m : doc.at("memories")) {
      s.memories.push_back(memory_from_json(m));
    }
    for (const auto& t : doc.at("history")) {
      s.history.push_back(trial_from_json(t));
    }
    if (s.history.size() != s.step) {
      throw CheckpointError("checkpoint history does not match its step count");
    }
    run->rng_ = rng_from_string(doc.at("rng").get<std::string>());
    run->policy_->restore(doc.at("policy_cursor"));
    if (run->gateway_) {
      AgentTrace calls;
      for (const auto& c : doc.at("agent_trace")) {
        calls.append(agent_call_from_json(c));
      }
      run->gateway_->restore_trace(std::move(calls));
      run->gateway_->backend().restore(doc.at("agent_cursor"));
    }
    if (!run->options_.trace_path.empty()) {
      run->trace_ = TraceWriter::reopen(run->options_.trace_path, trace.at("offset").get<std::uint64_t>());
      run->committed_offset_ = run->trace_.offset();
    }
    return run;
  } catch (const json::exception& e) {
    throw CheckpointError(fmt::format("checkpoint {} is corrupt: {}", checkpoint.string(), e.what()));
  }
}

const AgentTrace& Orchestrator::agent_trace() const {
  return gateway_ ? gateway_->trace() : kEmptyTrace;
}

std::vector<ActionCandidate> Orchestrator::candidates() const {
  return enumerate_candidates(config_.action_types, state_.registry, config_.policy.merge_pairs);
}

const RunState& Orchestrator::run() {
  run_until(config_.total_timesteps);
  return state_;
}

void Orchestrator::run_until(std::size_t step) {
  while (state_.step < std::min(step, config_.total_timesteps)) {
    this->step();
  }
}

void Orchestrator::step() {
  if (finished()) {
    throw ConfigError(fmt::format("the budget of {} steps is used up", config_.total_timesteps));
  }
  const auto t = state_.step + 1;
  const auto saved_state = state_;
  const auto saved_rng = rng_;
  const auto saved_policy = policy_->cursor();
  const auto saved_calls = gateway_ ? gateway_->trace() : AgentTrace{};
  const auto saved_agent = gateway_ ? gateway_->backend().cursor() : json(nullptr);

  try {
    const auto pool = candidates();
    const std::string_view memory =
        state_.memories.empty() ? std::string_view() : std::string_view(state_.memories.back().text);
    const SelectionContext context{memory, config_.action_types, state_.registry, pool, t, rng_};
    const auto selection = policy_->select(context);
    trace_.write(selection_record(t, pool.size(), selection, state_.registry));

    const ExecutionContext exec{t, config_.work_dir, config_.simulator};
    std::string log;
    const auto artifact = execute(selection.candidate, executors_, state_.registry, exec, &log);
    if (!log.empty()) {
      trace_.write(json{{"type", "executor_output"}, {"step", t}, {"log", log}});
    }

    TrialRecord record;
    record.step = t;
    record.action_type = selection.candidate.action_type;
    record.bindings = selection.candidate.bindings;
    record.labels = binding_labels(selection.candidate, state_.registry);
    record.scores = evaluate(state_.registry.get(artifact.object), config_.eval_tasks, evaluators_);
    const auto weights = derive_weights(std::span<const TaskSpec>(config_.eval_tasks));
    record.aggregate = aggregate(record.scores, weights, config_.score_aggregation);
    record.produced = artifact.object;
    record.produced_label = artifact.label;
    state_.history.push_back(record);
    auto trial = trial_to_json(record);
    trial["type"] = "trial";
    trace_.write(trial);

    if (gateway_) {
      MemoryOptions mem;
      mem.cap = config_.policy.memory_cap;
      mem.format.include_task_scores = config_.policy.include_task_scores;
      mem.temperature = config_.policy.temperature;
      mem.max_tokens = config_.policy.max_tokens;
      mem.model = config_.controller_model;
      std::span<const TrialRecord> history(state_.history);
      auto update = update_memory(*gateway_, templates_.memory_update, history.first(history.size() - 1),
                                  state_.memories, history.last(1), mem);
      state_.memories.push_back(update.state);
      trace_.write(json{{"type", "memory"},
                        {"version", update.state.version},
                        {"text", update.state.text},
                        {"memories_included", update.memories_included},
                        {"truncated", update.truncated}});
    }
    state_.step = t;
    trace_.flush();
    committed_offset_ = trace_.offset();
  } catch (const std::exception& e) {
    const auto* typed = dynamic_cast<const Error*>(&e);
    state_ = saved_state;
    rng_ = saved_rng;
    policy_->restore(saved_policy);
    if (gateway_) {
      gateway_->restore_trace(saved_calls);
      gateway_->backend().restore(saved_agent);
    }
    trace_.write(json{{"type", "error"}, {"step", t}, {"category", typed != nullptr ? typed->category() : "internal"}, {"message", e.what()}});
    trace_.flush();
    write_checkpoint_on_failure();
    throw;
  }
  if (options_.checkpoint_each_step && !options_.checkpoint_path.empty()) {
    checkpoint(options_.checkpoint_path);
  }
}

json Orchestrator::checkpoint_document() const {
  auto memories = json::array();
  for (const auto& m : state_.memories) {
    memories.push_back(memory_to_json(m));
  }
  auto history = json::array();
  for (const auto& r : state_.history) {
    history.push_back(trial_to_json(r));
  }
  auto calls = json::array();
  for (const auto& c : agent_trace().calls()) {
    calls.push_back(agent_call_to_json(c, true));
  }
  return json{{"version", kCheckpointVersion},
              {"config", json::parse(config_.source.dump())},
              {"base_dir", config_.base_dir.string()},
              {"seed", config_.seed},
              {"step", state_.step},
              {"registry", registry_to_json(state_.registry)},
              {"memories", std::move(memories)},
              {"history", std::move(history)},
              {"agent_trace", std::move(calls)},
              {"agent_cursor", gateway_ ? gateway_->backend().cursor() : json(nullptr)},
              {"policy_cursor", policy_->cursor()},
              {"rng", rng_to_string(rng_)},
              {"trace", json{{"path", trace_.path().string()}, {"offset", committed_offset_}}}};
}

void Orchestrator::checkpoint(const std::filesystem::path& path) const {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw CheckpointError(fmt::format("cannot write checkpoint {}", path.string()));
    }
    out << checkpoint_document().dump() << '\n';
  }
  std::filesystem::rename(tmp, path);
}

void Orchestrator::write_checkpoint_on_failure() const {
  if (options_.checkpoint_path.empty()) {
    return;
  }
  try {
    checkpoint(options_.checkpoint_path);
  } catch (const std::exception&) {
    // the original failure is the one worth reporting
  }
}

}  // namespace pipeforge
