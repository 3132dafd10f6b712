// SPDX-License-Identifier: Apache-2.0

#include "pipeforge/action_space.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "pipeforge/error.hpp"

namespace pipeforge {

namespace {

bool symmetric_tuple(const Payload& payload) {
  const auto* tuple = std::get_if<RealTuple>(&payload);
  if (tuple == nullptr || tuple->empty()) {
    return true;
  }
  return std::all_of(tuple->begin(), tuple->end(), [&](double v) { return v == tuple->front(); });
}

bool has_repeated_kind(const ActionSchema& schema) {
  for (std::size_t i = 0; i < schema.slots.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (schema.slots[i] == schema.slots[j]) {
        return true;
      }
    }
  }
  return false;
}

void expand(const ActionSchema& schema, const Registry& pool, bool unordered, std::size_t slot,
            std::vector<std::size_t>& ranks, std::vector<ObjectId>& bindings,
            std::vector<ActionCandidate>& out) {
  if (slot == schema.slots.size()) {
    out.push_back(ActionCandidate{schema.name, bindings});
    return;
  }
  const auto& kind = schema.slots[slot];
  auto ids = pool.of_kind(kind);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    bool allowed = true;
    for (std::size_t prev = 0; prev < slot && allowed; ++prev) {
      if (schema.slots[prev] != kind) {
        continue;
      }
      allowed = unordered ? ranks[prev] < r : ranks[prev] != r;
    }
    if (!allowed) {
      continue;
    }
    ranks[slot] = r;
    bindings[slot] = ids[r];
    expand(schema, pool, unordered, slot + 1, ranks, bindings, out);
  }
}

std::uint64_t falling_factorial(std::uint64_t n, std::uint64_t r) {
  if (r > n) {
    return 0;
  }
  std::uint64_t out = 1;
  for (std::uint64_t i = 0; i < r; ++i) {
    out *= n - i;
  }
  return out;
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t r) {
  if (r > n) {
    return 0;
  }
  std::uint64_t out = 1;
  for (std::uint64_t i = 1; i <= r; ++i) {
    out = out * (n - r + i) / i;
  }
  return out;
}

}  // namespace

PairMode pair_mode_from_string(std::string_view text) {
  if (text == "auto") return PairMode::Auto;
  if (text == "unordered") return PairMode::Unordered;
  if (text == "ordered") return PairMode::Ordered;
  throw ConfigError(fmt::format("unknown merge pair mode '{}' (expected auto|unordered|ordered)", text));
}

std::string_view to_string(PairMode mode) {
  switch (mode) {
    case PairMode::Auto: return "auto";
    case PairMode::Unordered: return "unordered";
    case PairMode::Ordered: return "ordered";
  }
  return "auto";
}

bool unordered_pairs(const ActionSchema& schema, const Registry& pool, PairMode mode) {
  switch (mode) {
    case PairMode::Unordered: return true;
    case PairMode::Ordered: return false;
    case PairMode::Auto: break;
  }
  for (const auto& kind : schema.slots) {
    for (ObjectId id : pool.of_kind(kind)) {
      if (!symmetric_tuple(pool.get(id).payload)) {
        return false;
      }
    }
  }
  return true;
}

std::vector<ActionCandidate> enumerate_candidates(std::span<const ActionSchema> schemas,
                                                  const Registry& pool, PairMode mode) {
  std::vector<ActionCandidate> out;
  for (const auto& schema : schemas) {
    if (schema.slots.empty()) {
      continue;
    }
    const bool unordered = !has_repeated_kind(schema) || unordered_pairs(schema, pool, mode);
    std::vector<std::size_t> ranks(schema.slots.size());
    std::vector<ObjectId> bindings(schema.slots.size());
    expand(schema, pool, unordered, 0, ranks, bindings, out);
  }
  return out;
}

std::uint64_t count_candidates(std::span<const ActionSchema> schemas,
                               const std::map<std::string, std::uint64_t>& pool_sizes,
                               const std::vector<bool>& unordered) {
  std::uint64_t total = 0;
  for (std::size_t s = 0; s < schemas.size(); ++s) {
    const auto& schema = schemas[s];
    if (schema.slots.empty()) {
      continue;
    }
    const bool pairs_unordered = unordered.empty() || unordered.at(s);
    std::map<std::string, std::uint64_t> multiplicity;
    for (const auto& kind : schema.slots) {
      ++multiplicity[kind];
    }
    std::uint64_t product = 1;
    for (const auto& [kind, repeats] : multiplicity) {
      auto it = pool_sizes.find(kind);
      const std::uint64_t n = it == pool_sizes.end() ? 0 : it->second;
      product *= pairs_unordered ? binomial(n, repeats) : falling_factorial(n, repeats);
    }
    total += product;
  }
  return total;
}

std::uint64_t count_candidates(std::span<const ActionSchema> schemas, const Registry& pool,
                               PairMode mode) {
  std::map<std::string, std::uint64_t> sizes;
  std::vector<bool> unordered;
  for (const auto& schema : schemas) {
    for (const auto& kind : schema.slots) {
      sizes[kind] = pool.of_kind(kind).size();
    }
    unordered.push_back(unordered_pairs(schema, pool, mode));
  }
  return count_candidates(schemas, sizes, unordered);
}

const ActionSchema* find_schema(std::span<const ActionSchema> schemas, std::string_view name) {
  for (const auto& schema : schemas) {
    if (schema.name == name) {
      return &schema;
    }
  }
  return nullptr;
}

std::vector<std::string> binding_labels(const ActionCandidate& candidate, const Registry& pool) {
  std::vector<std::string> labels;
  labels.reserve(candidate.bindings.size());
  for (ObjectId id : candidate.bindings) {
    labels.push_back(pool.get(id).label);
  }
  return labels;
}

std::string describe(const ActionCandidate& candidate, const Registry& pool) {
  return fmt::format("{}({})", candidate.action_type,
                     fmt::join(binding_labels(candidate, pool), ", "));
}

}  // namespace pipeforge
