// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "pipeforge/error.hpp"
#include "pipeforge/sim_model.hpp"

namespace pipeforge {

void validate(const SimDataset& data) {
  if (data.targets.empty()) {
    throw ConfigError("simulated dataset has no skills");
  }
  if (data.coverage.size() != data.targets.size()) {
    throw ConfigError(fmt::format("simulated dataset coverage has {} entries for {} targets",
                                  data.coverage.size(), data.targets.size()));
  }
  for (double t : data.targets) {
    if (!(t >= 0.0 && t <= 1.0)) {
      throw ConfigError(fmt::format("simulated dataset target {} is outside [0, 1]", t));
    }
  }
  if (std::none_of(data.coverage.begin(), data.coverage.end(), [](auto c) { return c != 0; })) {
    throw ConfigError("simulated dataset covers no skill");
  }
  if (data.examples == 0) {
    throw ConfigError("simulated dataset must have at least one example");
  }
}

double learning_strength(double lr, std::uint64_t examples, const SimConstants& constants) {
  const double saturation = 1.0 - std::exp(-static_cast<double>(examples) / constants.reference_examples);
  return std::min(1.0, (lr / constants.reference_lr) * saturation);
}

SimModel sim_sft(const SimModel& model, const SimDataset& data, double lr,
                 const SimConstants& constants) {
  if (model.dimension() != data.dimension()) {
    throw ExecutorError(fmt::format("model has {} skills but dataset has {}", model.dimension(),
                                    data.dimension()));
  }
  if (!(lr > 0.0)) {
    throw ExecutorError(fmt::format("learning rate must be positive, got {}", lr));
  }
  const double eta = learning_strength(lr, data.examples, constants);
  SimModel out = model;
  for (std::size_t k = 0; k < out.skills.size(); ++k) {
    double& s = out.skills[k];
    if (data.coverage[k] != 0) {
      s += eta * (data.targets[k] - s);
    } else {
      s *= 1.0 - constants.forgetting * eta;
    }
  }
  return out;
}

SimDataset make_mixture(std::span<const SimDataset> parts) {
  if (parts.empty()) {
    throw ConfigError("a mixture needs at least one constituent dataset");
  }
  const std::size_t dim = parts.front().dimension();
  SimDataset mix;
  mix.targets.assign(dim, 0.0);
  mix.coverage.assign(dim, 1);
  for (const auto& part : parts) {
    if (part.dimension() != dim) {
      throw ConfigError("mixture constituents disagree on the number of skills");
    }
    for (std::size_t k = 0; k < dim; ++k) {
      mix.targets[k] = std::max(mix.targets[k], part.targets[k]);
    }
    mix.examples += part.examples;
  }
  return mix;
}

}  // namespace pipeforge
