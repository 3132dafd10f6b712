// SPDX-License-Identifier: Apache-2.0

#include "pipeforge/json_io.hpp"

#include <fstream>

#include <fmt/format.h>

#include "pipeforge/error.hpp"

namespace pipeforge {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::vector<ObjectId> ids_from_json(const json& doc) {
  std::vector<ObjectId> out;
  for (const auto& v : doc) {
    out.push_back(ObjectId{v.get<std::uint32_t>()});
  }
  return out;
}

json ids_to_json(const std::vector<ObjectId>& ids) {
  auto out = json::array();
  for (ObjectId id : ids) {
    out.push_back(id.value);
  }
  return out;
}

}  // namespace

json sim_document(const SimModel& model) { return json{{"skills", model.skills}}; }

json sim_document(const SimDataset& data) {
  return json{{"targets", data.targets}, {"coverage", data.coverage}, {"examples", data.examples}};
}

std::optional<Payload> parse_sim_document(const json& doc) {
  if (!doc.is_object()) {
    return std::nullopt;
  }
  try {
    if (doc.contains("skills")) {
      return SimModel{doc.at("skills").get<std::vector<double>>()};
    }
    if (doc.contains("targets")) {
      SimDataset data;
      data.targets = doc.at("targets").get<std::vector<double>>();
      data.coverage = doc.at("coverage").get<std::vector<std::uint8_t>>();
      data.examples = doc.at("examples").get<std::uint64_t>();
      validate(data);
      return data;
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("malformed simulated object: {}", e.what()));
  }
  return std::nullopt;
}

json payload_to_json(const Payload& payload) {
  return std::visit(
      Overloaded{
          [](double v) { return json{{"type", "scalar"}, {"value", v}}; },
          [](const RealTuple& t) { return json{{"type", "tuple"}, {"values", t}}; },
          [](const PathRef& p) { return json{{"type", "path"}, {"path", p.path}}; },
          [](const SimModel& m) {
            auto doc = sim_document(m);
            doc["type"] = "model";
            return doc;
          },
          [](const SimDataset& d) {
            auto doc = sim_document(d);
            doc["type"] = "dataset";
            return doc;
          },
      },
      payload);
}

Payload payload_from_json(const json& doc) {
  const auto type = doc.at("type").get<std::string>();
  if (type == "scalar") return doc.at("value").get<double>();
  if (type == "tuple") return doc.at("values").get<RealTuple>();
  if (type == "path") return PathRef{doc.at("path").get<std::string>()};
  if (type == "model" || type == "dataset") {
    if (auto payload = parse_sim_document(doc)) {
      return *payload;
    }
  }
  throw CheckpointError(fmt::format("unknown payload type '{}'", type));
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(fmt::format("cannot open {}", path.string()));
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{} is not valid JSON: {}", path.string(), e.what()));
  }
}

json registry_to_json(const Registry& registry) {
  auto objects = json::array();
  for (const auto& e : registry.entries()) {
    json doc{{"id", e.id.value}, {"kind", e.kind}, {"label", e.label},
             {"payload", payload_to_json(e.payload)}};
    if (e.producer_step) {
      doc["producer_step"] = *e.producer_step;
    }
    objects.push_back(std::move(doc));
  }
  auto edges = json::array();
  for (const auto& edge : registry.edges()) {
    edges.push_back(json{{"step", edge.step},
                         {"action", edge.action_type},
                         {"inputs", ids_to_json(edge.inputs)},
                         {"output", edge.output.value}});
  }
  return json{{"objects", std::move(objects)}, {"edges", std::move(edges)}};
}

Registry registry_from_json(const json& doc) {
  Registry registry;
  std::map<std::uint32_t, const json*> edge_of;
  for (const auto& edge : doc.at("edges")) {
    edge_of[edge.at("output").get<std::uint32_t>()] = &edge;
  }
  for (const auto& obj : doc.at("objects")) {
    const auto id = obj.at("id").get<std::uint32_t>();
    if (id != registry.size()) {
      throw CheckpointError(fmt::format("registry ids are not dense at {}", id));
    }
    auto payload = payload_from_json(obj.at("payload"));
    auto it = edge_of.find(id);
    if (it == edge_of.end()) {
      registry.register_object(obj.at("kind").get<std::string>(), obj.at("label").get<std::string>(),
                               std::move(payload));
      continue;
    }
    const auto& edge = *it->second;
    auto parsed = parse_generated_label(obj.at("label").get<std::string>());
    if (!parsed) {
      throw CheckpointError(fmt::format("generated object {} has a malformed label", id));
    }
    registry.register_generated_model(parsed->first, parsed->second,
                                      edge.at("action").get<std::string>(),
                                      ids_from_json(edge.at("inputs")), std::move(payload));
  }
  return registry;
}

json trial_to_json(const TrialRecord& r) {
  auto scores = json::array();
  for (const auto& s : r.scores) {
    scores.push_back(json{{"task", s.task}, {"value", s.value}});
  }
  return json{{"step", r.step},
              {"action", r.action_type},
              {"bindings", ids_to_json(r.bindings)},
              {"labels", r.labels},
              {"scores", std::move(scores)},
              {"aggregate", r.aggregate},
              {"produced", r.produced.value},
              {"produced_label", r.produced_label}};
}

TrialRecord trial_from_json(const json& doc) {
  TrialRecord r;
  r.step = doc.at("step").get<std::size_t>();
  r.action_type = doc.at("action").get<std::string>();
  r.bindings = ids_from_json(doc.at("bindings"));
  r.labels = doc.at("labels").get<std::vector<std::string>>();
  for (const auto& s : doc.at("scores")) {
    r.scores.push_back(TaskScore{s.at("task").get<std::string>(), s.at("value").get<double>()});
  }
  r.aggregate = doc.at("aggregate").get<double>();
  r.produced = ObjectId{doc.at("produced").get<std::uint32_t>()};
  r.produced_label = doc.at("produced_label").get<std::string>();
  return r;
}

json memory_to_json(const MemoryState& m) { return json{{"version", m.version}, {"text", m.text}}; }

MemoryState memory_from_json(const json& doc) {
  return MemoryState{doc.at("text").get<std::string>(), doc.at("version").get<std::size_t>()};
}

json agent_call_to_json(const AgentCall& call, bool timing) {
  json doc{{"iteration", call.iteration},
           {"phase", to_string(call.phase)},
           {"attempt", call.attempt},
           {"retry", call.retry},
           {"model", call.request.model},
           {"temperature", call.request.temperature},
           {"max_tokens", call.request.max_tokens},
           {"prompt", call.request.prompt},
           {"response", call.response}};
  if (!call.error.empty()) {
    doc["error"] = call.error;
  }
  if (timing) {
    doc["latency_ms"] = call.latency_ms;
  }
  return doc;
}

AgentCall agent_call_from_json(const json& doc) {
  AgentCall call;
  call.iteration = doc.at("iteration").get<std::size_t>();
  call.phase = phase_from_string(doc.at("phase").get<std::string>());
  call.attempt = doc.at("attempt").get<int>();
  call.retry = doc.at("retry").get<bool>();
  call.request.model = doc.at("model").get<std::string>();
  call.request.temperature = doc.at("temperature").get<double>();
  call.request.max_tokens = doc.at("max_tokens").get<int>();
  call.request.prompt = doc.at("prompt").get<std::string>();
  call.response = doc.at("response").get<std::string>();
  call.error = doc.value("error", std::string());
  call.latency_ms = doc.value("latency_ms", 0.0);
  return call;
}

}  // namespace pipeforge
