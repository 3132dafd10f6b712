// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "pipeforge/sim_model.hpp"

namespace pipeforge {

/// Opaque object handle. Ids are dense and assigned in registration order.
struct ObjectId {
  std::uint32_t value = 0;
  friend auto operator<=>(ObjectId, ObjectId) = default;
};

using RealTuple = std::vector<double>;

/// Filesystem-backed payload (shell executors).
struct PathRef {
  std::string path;
  friend bool operator==(const PathRef&, const PathRef&) = default;
};

/// The registry stores payloads but never interprets them.
using Payload = std::variant<double, RealTuple, PathRef, SimModel, SimDataset>;

struct ObjectEntry {
  ObjectId id;
  std::string kind;
  std::string label;
  Payload payload;
  /// Step of the producing action; empty for initial objects.
  std::optional<std::size_t> producer_step;

  bool initial() const { return !producer_step.has_value(); }
};

/// A model created by an action at iteration `step`.
struct ModelArtifact {
  ObjectId object;
  std::size_t step = 0;
  std::size_t index = 0;
  std::string label;
};

/// input objects -> action -> output artifact.
struct LineageEdge {
  std::size_t step = 0;
  std::string action_type;
  std::vector<ObjectId> inputs;
  ObjectId output;
};

/// One action on a model's ancestry. `parents` lists the steps that produced
/// this action's model inputs, which is what makes merge trees recoverable
/// from the flattened list.
struct PipelineStep {
  std::size_t step = 0;
  std::string action_type;
  std::vector<std::string> labels;
  std::string output;
  std::vector<std::size_t> parents;
};

inline constexpr std::string_view kModelKind = "models";

/// "0--<step>--<index>". Step 0 is reserved for initial objects.
std::string generated_model_label(std::size_t step, std::size_t index);

/// Inverse of generated_model_label; empty when `label` is not of that form.
std::optional<std::pair<std::size_t, std::size_t>> parse_generated_label(std::string_view label);

class Registry {
 public:
  /// Throws RegistryError if `label` is already used within `kind`.
  ObjectEntry register_object(std::string kind, std::string label, Payload payload,
                              std::optional<std::size_t> producer_step = std::nullopt);

  /// Registers the output of an action under kind "models" with the
  /// generated label, together with its lineage edge.
  ModelArtifact register_generated_model(std::size_t step, std::size_t index,
                                         std::string action_type,
                                         std::vector<ObjectId> inputs, Payload payload);

  const ObjectEntry& get(ObjectId id) const;
  const ObjectEntry* find(std::string_view kind, std::string_view label) const;
  bool contains(ObjectId id) const { return id.value < entries_.size(); }

  /// Ids of `kind` in registration order (empty span for unknown kinds).
  std::span<const ObjectId> of_kind(std::string_view kind) const;
  std::vector<std::string> kinds() const;

  std::span<const ObjectEntry> entries() const { return entries_; }
  std::span<const LineageEdge> edges() const { return edges_; }
  std::size_t size() const { return entries_.size(); }

  const LineageEdge* producer(ObjectId id) const;
  ModelArtifact artifact(ObjectId id) const;

  /// Producing actions on `id`'s ancestry, root-first in execution order.
  /// Initial objects yield an empty list.
  std::vector<PipelineStep> lineage_pipeline(ObjectId id) const;

  friend bool operator==(const Registry& a, const Registry& b);

 private:
  std::vector<ObjectEntry> entries_;
  std::vector<LineageEdge> edges_;
  std::map<std::string, std::vector<ObjectId>, std::less<>> by_kind_;
  std::map<std::uint32_t, std::size_t> edge_of_output_;
};

bool operator==(const LineageEdge& a, const LineageEdge& b);
bool operator==(const ObjectEntry& a, const ObjectEntry& b);

}  // namespace pipeforge
