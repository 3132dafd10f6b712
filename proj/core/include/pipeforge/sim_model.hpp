// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace pipeforge {

/// Parameter vector of a simulated model: one proficiency value per skill.
struct SimModel {
  std::vector<double> skills;

  std::size_t dimension() const { return skills.size(); }
  friend bool operator==(const SimModel&, const SimModel&) = default;
};

/// Simulated SFT corpus. `targets` is the proficiency the data can teach,
/// `coverage` marks the skills it teaches at all, `examples` is its size.
struct SimDataset {
  std::vector<double> targets;
  std::vector<std::uint8_t> coverage;
  std::uint64_t examples = 0;

  std::size_t dimension() const { return targets.size(); }
  friend bool operator==(const SimDataset&, const SimDataset&) = default;
};

/// Constants of the simulated training dynamics.
struct SimConstants {
  double forgetting = 0.3;            // phi
  double reference_examples = 1000.0; // n0
  double reference_lr = 1e-6;         // lr_ref
};

struct MergeSpec {
  std::vector<double> weights;
  double density = 0.5;
};

/// Throws ConfigError when targets leave [0,1], coverage is empty or all
/// zero, sizes disagree, or examples is zero.
void validate(const SimDataset& data);

/// eta = min(1, (lr / lr_ref) * (1 - exp(-n / n0))).
double learning_strength(double lr, std::uint64_t examples, const SimConstants& constants);

/// One simulated SFT pass. Covered skills move toward their targets by eta;
/// uncovered skills decay by a factor (1 - phi * eta).
SimModel sim_sft(const SimModel& model, const SimDataset& data, double lr,
                 const SimConstants& constants = {});

/// TIES-Merging (trim, elect sign, disjoint weighted mean) of `models` onto
/// `base`. Trim keeps ceil(density * K) coordinates per task vector; equal
/// magnitudes keep the lower coordinate index.
SimModel ties_merge(const SimModel& base, std::span<const SimModel> models, const MergeSpec& spec);

/// Mixture of several corpora: full coverage, componentwise max targets,
/// summed example counts.
SimDataset make_mixture(std::span<const SimDataset> parts);

}  // namespace pipeforge
