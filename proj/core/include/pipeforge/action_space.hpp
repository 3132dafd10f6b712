// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pipeforge/registry.hpp"

namespace pipeforge {

/// An action type: its name and the ordered object kinds it consumes.
struct ActionSchema {
  std::string name;
  std::vector<std::string> slots;

  friend bool operator==(const ActionSchema&, const ActionSchema&) = default;
};

/// A fully bound action: one object id per schema slot.
struct ActionCandidate {
  std::string action_type;
  std::vector<ObjectId> bindings;

  friend bool operator==(const ActionCandidate&, const ActionCandidate&) = default;
};

/// How slots that repeat an object kind (the two models of a merge) bind.
/// Repeated slots never bind the same object twice.
enum class PairMode {
  /// Unordered unless a tuple-valued object reachable by the schema is
  /// asymmetric, e.g. merge weights (0.7, 0.3).
  Auto,
  Unordered,
  Ordered,
};

PairMode pair_mode_from_string(std::string_view text);
std::string_view to_string(PairMode mode);

/// Resolves PairMode::Auto for one schema against the current pool.
bool unordered_pairs(const ActionSchema& schema, const Registry& pool, PairMode mode);

/// Every concrete action for `schemas` over `pool`: the Cartesian product of
/// each slot's objects, schemas in declaration order, bindings in
/// lexicographic registration order.
std::vector<ActionCandidate> enumerate_candidates(std::span<const ActionSchema> schemas,
                                                  const Registry& pool,
                                                  PairMode mode = PairMode::Auto);

/// Closed-form size of enumerate_candidates. `unordered[i]` gives the
/// resolved pairing of schemas[i]; an empty vector means all unordered.
std::uint64_t count_candidates(std::span<const ActionSchema> schemas,
                               const std::map<std::string, std::uint64_t>& pool_sizes,
                               const std::vector<bool>& unordered = {});

std::uint64_t count_candidates(std::span<const ActionSchema> schemas, const Registry& pool,
                               PairMode mode = PairMode::Auto);

const ActionSchema* find_schema(std::span<const ActionSchema> schemas, std::string_view name);

/// Object labels of a candidate, in slot order.
std::vector<std::string> binding_labels(const ActionCandidate& candidate, const Registry& pool);

/// "type(label, label, ...)".
std::string describe(const ActionCandidate& candidate, const Registry& pool);

}  // namespace pipeforge
