// SPDX-License-Identifier: Apache-2.0

#include "pipeforge/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "pipeforge/error.hpp"
#include "pipeforge/json_io.hpp"

namespace pipeforge {

namespace {

using ojson = nlohmann::ordered_json;

std::chrono::milliseconds seconds_value(const ojson& doc, const char* key,
                                        std::chrono::milliseconds fallback) {
  if (!doc.contains(key)) {
    return fallback;
  }
  const double s = doc.at(key).get<double>();
  if (!(s > 0)) {
    throw ConfigError(fmt::format("{} must be positive", key));
  }
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(s * 1000.0)));
}

std::string stem_label(const std::string& path) {
  auto name = std::filesystem::path(path).filename().string();
  if (name.size() > 5 && name.ends_with(".json")) {
    name.resize(name.size() - 5);
  }
  return name;
}

std::optional<Payload> load_sim_file(const std::filesystem::path& path) {
  for (auto candidate : {path, std::filesystem::path(path.string() + ".json")}) {
    std::error_code ec;
    if (std::filesystem::is_regular_file(candidate, ec)) {
      std::ifstream in(candidate);
      auto doc = nlohmann::json::parse(in, nullptr, false);
      if (!doc.is_discarded()) {
        if (auto payload = parse_sim_document(doc)) {
          return payload;
        }
      }
    }
  }
  return std::nullopt;
}

Payload numeric_payload(const ojson& value, const std::string& where) {
  if (value.is_number()) {
    return value.get<double>();
  }
  if (value.is_array() && !value.empty()) {
    RealTuple tuple;
    for (const auto& v : value) {
      if (!v.is_number()) {
        throw ConfigError(fmt::format("{}: tuple entries must be numbers", where));
      }
      tuple.push_back(v.get<double>());
    }
    return tuple;
  }
  throw ConfigError(fmt::format("{}: expected a number or a list of numbers", where));
}

ObjectSpec parse_object(const RunConfig& config, const ObjectGroup& group, const ojson& item) {
  const auto where = fmt::format("objects.{}", group.kind);
  if (item.is_string()) {
    const auto text = item.get<std::string>();
    const auto path = config.resolve(text);
    if (auto payload = load_sim_file(path)) {
      return {stem_label(text), *payload};
    }
    return {stem_label(text), PathRef{path.string()}};
  }
  if (item.is_number() || item.is_array()) {
    auto payload = numeric_payload(item, where);
    if (const auto* v = std::get_if<double>(&payload)) {
      return {fmt::format("{}", *v), payload};
    }
    return {fmt::format("{}", std::get<RealTuple>(payload)), payload};
  }
  if (!item.is_object() || !item.contains("label")) {
    throw ConfigError(fmt::format("{}: entries are paths, numbers, lists or objects with a label", where));
  }
  const auto label = item.at("label").get<std::string>();
  const auto here = fmt::format("{}.{}", where, label);
  if (item.contains("mixture_of")) {
    std::vector<SimDataset> parts;
    for (const auto& ref : item.at("mixture_of")) {
      const auto name = ref.get<std::string>();
      const SimDataset* found = nullptr;
      for (const auto& prior : group.objects) {
        if (prior.label == name) {
          found = std::get_if<SimDataset>(&prior.payload);
        }
      }
      if (found == nullptr) {
        throw ConfigError(fmt::format("{}: mixture part '{}' is not an earlier simulated dataset", here, name));
      }
      parts.push_back(*found);
    }
    return {label, make_mixture(parts)};
  }
  if (item.contains("value")) {
    return {label, numeric_payload(item.at("value"), here)};
  }
  if (item.contains("path")) {
    const auto path = config.resolve(item.at("path").get<std::string>());
    if (auto payload = load_sim_file(path)) {
      return {label, *payload};
    }
    return {label, PathRef{path.string()}};
  }
  if (auto payload = parse_sim_document(nlohmann::json::parse(item.dump()))) {
    return {label, *payload};
  }
  throw ConfigError(fmt::format("{}: no value, path, mixture or simulated payload", here));
}

TaskSpec parse_task(const ojson& item, const std::map<std::string, double>& maxima) {
  TaskSpec task;
  if (item.is_array() && item.size() == 2) {
    task.name = item.at(0).get<std::string>();
    task.metric = item.at(1).get<std::string>();
  } else if (item.is_object()) {
    task.name = item.at("name").get<std::string>();
    task.metric = item.at("metric").get<std::string>();
    if (item.contains("max")) {
      task.max_value = item.at("max").get<double>();
      return task;
    }
  } else {
    throw ConfigError("tasks are [name, metric] pairs");
  }
  if (auto it = maxima.find(task.metric); it != maxima.end()) {
    task.max_value = it->second;
  } else if (auto known = metric_max(task.metric)) {
    task.max_value = *known;
  } else {
    throw ConfigError(fmt::format("task {}: unknown metric '{}' (set simulator.metric_max)", task.name,
                                  task.metric));
  }
  return task;
}

std::vector<TaskSpec> parse_tasks(const ojson& list, const std::map<std::string, double>& maxima) {
  std::vector<TaskSpec> tasks;
  for (const auto& item : list) {
    tasks.push_back(parse_task(item, maxima));
  }
  const auto weights = derive_weights(std::span<const TaskSpec>(tasks));
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    tasks[i].weight = weights[i];
  }
  return tasks;
}

std::optional<std::size_t> dimension_of(const Payload& payload) {
  if (const auto* m = std::get_if<SimModel>(&payload)) return m->dimension();
  if (const auto* d = std::get_if<SimDataset>(&payload)) return d->dimension();
  return std::nullopt;
}

void parse_into(RunConfig& c, const ojson& doc) {
  if (!doc.is_object()) {
    throw ConfigError("configuration must be a JSON object");
  }
  c.seed = doc.value("seed", std::uint64_t{0});
  c.total_timesteps = doc.value("total_timesteps", std::size_t{0});
  c.controller = doc.value("controller", std::string("LaMDAgent_gpt"));
  c.controller_model = doc.value("controller_model", std::string());
  c.score_aggregation = aggregation_from_string(doc.value("score_aggregation", std::string("mean")));
  if (doc.contains("work_dir")) {
    c.work_dir = c.resolve(doc.at("work_dir").get<std::string>());
  } else {
    c.work_dir = c.resolve("artifacts");
  }

  std::map<std::string, double> maxima;
  std::map<std::string, std::size_t> task_skills;
  if (doc.contains("simulator")) {
    const auto& sim = doc.at("simulator");
    c.simulator.forgetting = sim.value("forgetting", c.simulator.forgetting);
    c.simulator.reference_examples = sim.value("reference_examples", c.simulator.reference_examples);
    c.simulator.reference_lr = sim.value("reference_lr", c.simulator.reference_lr);
    if (sim.contains("metric_max")) {
      maxima = sim.at("metric_max").get<std::map<std::string, double>>();
    }
    if (sim.contains("task_skills")) {
      task_skills = sim.at("task_skills").get<std::map<std::string, std::size_t>>();
    }
  }

  if (doc.contains("objects")) {
    for (const auto& [kind, list] : doc.at("objects").items()) {
      ObjectGroup group{kind, {}};
      if (!list.is_array()) {
        throw ConfigError(fmt::format("objects.{} must be a list", kind));
      }
      for (const auto& item : list) {
        group.objects.push_back(parse_object(c, group, item));
      }
      c.objects.push_back(std::move(group));
    }
  }
  if (doc.contains("action_types")) {
    for (const auto& [name, slots] : doc.at("action_types").items()) {
      c.action_types.push_back(ActionSchema{name, slots.get<std::vector<std::string>>()});
    }
  }
  if (doc.contains("eval_tasks")) {
    c.eval_tasks = parse_tasks(doc.at("eval_tasks"), maxima);
  }
  if (doc.contains("test_tasks")) {
    c.test_tasks = parse_tasks(doc.at("test_tasks"), maxima);
  }

  for (const auto& schema : c.action_types) {
    if (schema.name == "sft") c.executors["sft"] = ExecutorSpec{"sim_sft", {}, {}, {}};
    if (schema.name == "ties_merging") c.executors["ties_merging"] = ExecutorSpec{"sim_ties", {}, {}, {}};
  }
  if (doc.contains("executors")) {
    for (const auto& [name, spec] : doc.at("executors").items()) {
      ExecutorSpec e;
      e.kind = spec.at("kind").get<std::string>();
      e.command = spec.value("command", std::string());
      e.placeholders = spec.value("placeholders", std::vector<std::string>{});
      e.timeout = seconds_value(spec, "timeout_s", e.timeout);
      c.executors[name] = std::move(e);
    }
  }

  auto skill_of = [&](const std::string& task, std::size_t fallback) {
    auto it = task_skills.find(task);
    return it == task_skills.end() ? fallback : it->second;
  };
  for (std::size_t i = 0; i < c.eval_tasks.size(); ++i) {
    const auto& t = c.eval_tasks[i];
    c.evaluators[t.name] = EvaluatorSpec{"sim_skill", skill_of(t.name, i), t.max_value, {}, {}, {}};
  }
  for (std::size_t i = 0; i < c.test_tasks.size(); ++i) {
    const auto& t = c.test_tasks[i];
    if (!c.evaluators.contains(t.name)) {
      c.evaluators[t.name] = EvaluatorSpec{"sim_skill", skill_of(t.name, i), t.max_value, {}, {}, {}};
    }
  }
  if (doc.contains("evaluators")) {
    for (const auto& [task, spec] : doc.at("evaluators").items()) {
      auto& e = c.evaluators[task];
      e.kind = spec.at("kind").get<std::string>();
      e.skill = spec.value("skill", e.skill);
      e.scale = spec.value("scale", e.scale);
      if (spec.contains("values")) {
        e.table = spec.at("values").get<std::map<std::string, double>>();
      }
      e.command = spec.value("command", std::string());
      e.timeout = seconds_value(spec, "timeout_s", e.timeout);
    }
  }

  if (doc.contains("endpoint")) {
    const auto& ep = doc.at("endpoint");
    c.endpoint.url = ep.value("url", std::string());
    c.endpoint.api_key_env = ep.value("api_key_env", c.endpoint.api_key_env);
    c.endpoint.timeout = seconds_value(ep, "timeout_s", c.endpoint.timeout);
    c.endpoint.retry.max_attempts = ep.value("max_attempts", c.endpoint.retry.max_attempts);
    c.endpoint.retry.initial_backoff =
        std::chrono::milliseconds(ep.value("initial_backoff_ms", c.endpoint.retry.initial_backoff.count()));
    c.endpoint.retry.max_backoff =
        std::chrono::milliseconds(ep.value("max_backoff_ms", c.endpoint.retry.max_backoff.count()));
  }

  if (doc.contains("policy_options")) {
    const auto& p = doc.at("policy_options");
    auto& o = c.policy;
    o.temperature = p.value("temperature", o.temperature);
    o.max_tokens = p.value("max_tokens", o.max_tokens);
    o.max_parse_retries = p.value("max_parse_retries", o.max_parse_retries);
    o.merge_pairs = pair_mode_from_string(p.value("merge_pairs", std::string("auto")));
    o.memory_cap = p.value("memory_cap", o.memory_cap);
    o.include_task_scores = p.value("include_task_scores", o.include_task_scores);
    if (p.contains("agent_script")) {
      o.agent_script = c.resolve(p.at("agent_script").get<std::string>()).string();
    }
    if (p.contains("template_dir")) {
      o.template_dir = c.resolve(p.at("template_dir").get<std::string>()).string();
    }
    if (p.contains("scripted_actions")) {
      for (const auto& a : p.at("scripted_actions")) {
        o.scripted_actions.push_back(
            ScriptedAction{a.at("action").get<std::string>(), a.at("objects").get<std::vector<std::string>>()});
      }
    }
  }
}

}  // namespace

std::filesystem::path RunConfig::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() ? p : base_dir / p;
}

std::string strip_trailing_commas(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_string = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_string) {
      out += ch;
      if (ch == '\\' && i + 1 < text.size()) {
        out += text[++i];
      } else if (ch == '"') {
        in_string = false;
      }
      continue;
    }
    if (ch == '"') {
      in_string = true;
    } else if (ch == ',') {
      auto j = i + 1;
      while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j])) != 0) {
        ++j;
      }
      if (j < text.size() && (text[j] == '}' || text[j] == ']')) {
        continue;
      }
    }
    out += ch;
  }
  return out;
}

std::optional<double> metric_max(std::string_view metric) {
  static const std::map<std::string, double, std::less<>> kKnown = {
      {"acc", 1.0}, {"accuracy", 1.0}, {"exact_match", 1.0}, {"em", 1.0},
      {"f1", 1.0},  {"skill", 1.0},    {"mt_bench", 10.0},
  };
  if (auto it = kKnown.find(metric); it != kKnown.end()) {
    return it->second;
  }
  return std::nullopt;
}

RunConfig parse_config(const nlohmann::ordered_json& doc, const std::filesystem::path& base_dir) {
  RunConfig config;
  config.base_dir = base_dir;
  config.source = doc;
  try {
    parse_into(config, doc);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("malformed configuration: {}", e.what()));
  }
  return config;
}

RunConfig parse_config_text(std::string_view text, const std::filesystem::path& base_dir) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(strip_trailing_commas(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(fmt::format("configuration is not valid JSON: {}", e.what()));
  }
  return parse_config(doc, base_dir);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(fmt::format("cannot open configuration {}", path.string()));
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  auto base = path.parent_path();
  return parse_config_text(buffer.str(), base.empty() ? std::filesystem::path(".") : base);
}

void validate_config(const RunConfig& c) {
  if (c.action_types.empty()) {
    throw ConfigError("action_types is empty");
  }
  if (c.eval_tasks.empty()) {
    throw ConfigError("eval_tasks is empty");
  }
  (void)c.policy_kind();
  std::set<std::string> kinds;
  std::optional<std::size_t> dim;
  for (const auto& group : c.objects) {
    if (!kinds.insert(group.kind).second) {
      throw ConfigError(fmt::format("object kind '{}' is declared twice", group.kind));
    }
    std::set<std::string> labels;
    for (const auto& obj : group.objects) {
      if (!labels.insert(obj.label).second) {
        throw ConfigError(fmt::format("label '{}' appears twice under '{}'", obj.label, group.kind));
      }
      if (auto d = dimension_of(obj.payload)) {
        if (dim && *dim != *d) {
          throw ConfigError(fmt::format("simulated object {}/{} has dimension {}, expected {}", group.kind,
                                        obj.label, *d, *dim));
        }
        dim = d;
      }
    }
  }
  for (const auto& schema : c.action_types) {
    if (schema.slots.empty()) {
      throw ConfigError(fmt::format("action type '{}' has no slots", schema.name));
    }
    for (const auto& slot : schema.slots) {
      if (slot.empty()) {
        throw ConfigError(fmt::format("action type '{}' has an empty slot kind", schema.name));
      }
      if (!kinds.contains(slot) && slot != kModelKind) {
        throw ConfigError(fmt::format("action type '{}' uses kind '{}' which has no objects", schema.name, slot));
      }
    }
    auto it = c.executors.find(schema.name);
    if (it == c.executors.end()) {
      throw ConfigError(fmt::format("action type '{}' has no executor", schema.name));
    }
    const auto& kind = it->second.kind;
    if (kind != "sim_sft" && kind != "sim_ties" && kind != "shell") {
      throw ConfigError(fmt::format("executor '{}' has unknown kind '{}'", schema.name, kind));
    }
    if (kind == "shell" && it->second.command.empty()) {
      throw ConfigError(fmt::format("shell executor '{}' has no command", schema.name));
    }
    if (kind == "shell" && !it->second.placeholders.empty() &&
        it->second.placeholders.size() != schema.slots.size()) {
      throw ConfigError(fmt::format("shell executor '{}' needs one placeholder per slot", schema.name));
    }
  }
  for (const auto& [task, e] : c.evaluators) {
    if (e.kind != "sim_skill" && e.kind != "table" && e.kind != "shell") {
      throw ConfigError(fmt::format("evaluator for '{}' has unknown kind '{}'", task, e.kind));
    }
    if (e.kind == "sim_skill" && dim && e.skill >= *dim) {
      throw ConfigError(fmt::format("evaluator for '{}' reads skill {} of a {}-skill model", task, e.skill, *dim));
    }
  }
  if (c.policy_kind() == PolicyKind::Scripted && c.policy.scripted_actions.empty()) {
    throw ConfigError("controller 'scripted' needs policy_options.scripted_actions");
  }
}

Registry build_registry(const RunConfig& config) {
  Registry registry;
  for (const auto& group : config.objects) {
    for (const auto& obj : group.objects) {
      registry.register_object(group.kind, obj.label, obj.payload);
    }
  }
  return registry;
}

ExecutorBindings build_executors(const RunConfig& config) {
  ExecutorBindings out;
  for (const auto& schema : config.action_types) {
    auto it = config.executors.find(schema.name);
    if (it == config.executors.end()) {
      throw ConfigError(fmt::format("action type '{}' has no executor", schema.name));
    }
    const auto& spec = it->second;
    if (spec.kind == "sim_sft") {
      out[schema.name] = std::make_shared<SimSftExecutor>();
    } else if (spec.kind == "sim_ties") {
      out[schema.name] = std::make_shared<SimTiesExecutor>();
    } else if (spec.kind == "shell") {
      auto placeholders = spec.placeholders;
      if (placeholders.empty()) {
        placeholders = schema.slots;
      }
      out[schema.name] = std::make_shared<ShellExecutor>(spec.command, placeholders, spec.timeout);
    } else {
      throw ConfigError(fmt::format("executor '{}' has unknown kind '{}'", schema.name, spec.kind));
    }
  }
  return out;
}

EvaluatorBindings build_evaluators(const RunConfig& config, std::span<const TaskSpec> tasks) {
  EvaluatorBindings out;
  for (const auto& task : tasks) {
    auto it = config.evaluators.find(task.name);
    if (it == config.evaluators.end()) {
      throw ConfigError(fmt::format("task '{}' has no evaluator", task.name));
    }
    const auto& e = it->second;
    if (e.kind == "sim_skill") {
      out[task.name] = std::make_shared<SimSkillEvaluator>(e.skill, e.scale);
    } else if (e.kind == "table") {
      out[task.name] = std::make_shared<TableEvaluator>(e.table);
    } else if (e.kind == "shell") {
      out[task.name] = std::make_shared<ShellEvaluator>(e.command, e.timeout);
    } else {
      throw ConfigError(fmt::format("evaluator for '{}' has unknown kind '{}'", task.name, e.kind));
    }
  }
  return out;
}

}  // namespace pipeforge
