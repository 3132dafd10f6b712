// SPDX-License-Identifier: Apache-2.0

#include "pipeforge/registry.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include <fmt/format.h>

#include "pipeforge/error.hpp"

namespace pipeforge {

namespace {

std::optional<std::size_t> parse_decimal(std::string_view text) {
  if (text.empty() || (text.size() > 1 && text.front() == '0')) {
    return std::nullopt;
  }
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    return std::nullopt;
  }
  return value;
}

}  // namespace

std::string generated_model_label(std::size_t step, std::size_t index) {
  if (step == 0) {
    throw RegistryError("generated model step must be >= 1; step 0 is reserved for initial objects");
  }
  return fmt::format("0--{}--{}", step, index);
}

std::optional<std::pair<std::size_t, std::size_t>> parse_generated_label(std::string_view label) {
  constexpr std::string_view kPrefix = "0--";
  if (!label.starts_with(kPrefix)) {
    return std::nullopt;
  }
  label.remove_prefix(kPrefix.size());
  const auto sep = label.find("--");
  if (sep == std::string_view::npos) {
    return std::nullopt;
  }
  auto step = parse_decimal(label.substr(0, sep));
  auto index = parse_decimal(label.substr(sep + 2));
  if (!step || !index || *step == 0) {
    return std::nullopt;
  }
  return std::pair{*step, *index};
}

ObjectEntry Registry::register_object(std::string kind, std::string label, Payload payload,
                                      std::optional<std::size_t> producer_step) {
  if (kind.empty()) {
    throw RegistryError("object kind must be nonempty");
  }
  if (find(kind, label) != nullptr) {
    throw RegistryError(fmt::format("label '{}' is already registered under kind '{}'", label, kind));
  }
  ObjectEntry entry{ObjectId{static_cast<std::uint32_t>(entries_.size())}, std::move(kind),
                    std::move(label), std::move(payload), producer_step};
  by_kind_[entry.kind].push_back(entry.id);
  entries_.push_back(entry);
  return entry;
}

ModelArtifact Registry::register_generated_model(std::size_t step, std::size_t index,
                                                 std::string action_type,
                                                 std::vector<ObjectId> inputs, Payload payload) {
  for (ObjectId input : inputs) {
    if (!contains(input)) {
      throw RegistryError(fmt::format("action input #{} does not exist", input.value));
    }
  }
  auto entry = register_object(std::string(kModelKind), generated_model_label(step, index),
                               std::move(payload), step);
  edge_of_output_[entry.id.value] = edges_.size();
  edges_.push_back(LineageEdge{step, std::move(action_type), std::move(inputs), entry.id});
  return ModelArtifact{entry.id, step, index, entry.label};
}

const ObjectEntry& Registry::get(ObjectId id) const {
  if (!contains(id)) {
    throw RegistryError(fmt::format("unknown object id #{}", id.value));
  }
  return entries_[id.value];
}

const ObjectEntry* Registry::find(std::string_view kind, std::string_view label) const {
  auto it = by_kind_.find(kind);
  if (it == by_kind_.end()) {
    return nullptr;
  }
  for (ObjectId id : it->second) {
    if (entries_[id.value].label == label) {
      return &entries_[id.value];
    }
  }
  return nullptr;
}

std::span<const ObjectId> Registry::of_kind(std::string_view kind) const {
  auto it = by_kind_.find(kind);
  if (it == by_kind_.end()) {
    return {};
  }
  return it->second;
}

std::vector<std::string> Registry::kinds() const {
  std::vector<std::string> out;
  out.reserve(by_kind_.size());
  for (const auto& [kind, ids] : by_kind_) {
    out.push_back(kind);
  }
  return out;
}

const LineageEdge* Registry::producer(ObjectId id) const {
  auto it = edge_of_output_.find(id.value);
  return it == edge_of_output_.end() ? nullptr : &edges_[it->second];
}

ModelArtifact Registry::artifact(ObjectId id) const {
  const auto& entry = get(id);
  if (entry.initial()) {
    return ModelArtifact{id, 0, 0, entry.label};
  }
  auto parsed = parse_generated_label(entry.label);
  return ModelArtifact{id, *entry.producer_step, parsed ? parsed->second : 0, entry.label};
}

std::vector<PipelineStep> Registry::lineage_pipeline(ObjectId id) const {
  get(id);
  std::set<std::size_t> visited_edges;
  std::vector<ObjectId> stack{id};
  while (!stack.empty()) {
    ObjectId current = stack.back();
    stack.pop_back();
    auto it = edge_of_output_.find(current.value);
    if (it == edge_of_output_.end() || !visited_edges.insert(it->second).second) {
      continue;
    }
    for (ObjectId input : edges_[it->second].inputs) {
      stack.push_back(input);
    }
  }

  // Edge order is execution order, which is a topological order of the tree.
  std::vector<PipelineStep> steps;
  for (std::size_t e : visited_edges) {
    const auto& edge = edges_[e];
    PipelineStep step;
    step.step = edge.step;
    step.action_type = edge.action_type;
    step.output = entries_[edge.output.value].label;
    for (ObjectId input : edge.inputs) {
      step.labels.push_back(entries_[input.value].label);
      if (const auto* parent = producer(input)) {
        if (std::find(step.parents.begin(), step.parents.end(), parent->step) == step.parents.end()) {
          step.parents.push_back(parent->step);
        }
      }
    }
    steps.push_back(std::move(step));
  }
  return steps;
}

bool operator==(const LineageEdge& a, const LineageEdge& b) {
  return a.step == b.step && a.action_type == b.action_type && a.inputs == b.inputs &&
         a.output == b.output;
}

bool operator==(const ObjectEntry& a, const ObjectEntry& b) {
  return a.id == b.id && a.kind == b.kind && a.label == b.label && a.payload == b.payload &&
         a.producer_step == b.producer_step;
}

bool operator==(const Registry& a, const Registry& b) {
  return a.entries_ == b.entries_ && a.edges_ == b.edges_;
}

}  // namespace pipeforge
