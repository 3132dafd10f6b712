// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "pipeforge/error.hpp"
#include "pipeforge/sim_model.hpp"

namespace pipeforge {

namespace {

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

// Zeroes all but the `keep` largest-magnitude entries. Equal magnitudes keep
// the lower index so the result does not depend on sort stability.
void trim(std::vector<double>& tau, std::size_t keep) {
  std::vector<std::size_t> order(tau.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ma = std::abs(tau[a]);
    const double mb = std::abs(tau[b]);
    return ma != mb ? ma > mb : a < b;
  });
  for (std::size_t r = keep; r < order.size(); ++r) {
    tau[order[r]] = 0.0;
  }
}

}  // namespace

SimModel ties_merge(const SimModel& base, std::span<const SimModel> models, const MergeSpec& spec) {
  if (models.size() < 2) {
    throw ExecutorError(fmt::format("TIES merge needs at least 2 models, got {}", models.size()));
  }
  if (!(spec.density >= 0.0 && spec.density <= 1.0)) {
    throw ExecutorError(fmt::format("merge density {} is outside [0, 1]", spec.density));
  }
  if (spec.weights.size() != models.size()) {
    throw ExecutorError(fmt::format("{} merge weights given for {} models", spec.weights.size(),
                                    models.size()));
  }
  double weight_total = 0.0;
  for (double w : spec.weights) {
    if (!(w >= 0.0)) {
      throw ExecutorError(fmt::format("merge weight {} is negative", w));
    }
    weight_total += w;
  }
  if (!(weight_total > 0.0)) {
    throw ExecutorError("merge weights sum to zero");
  }

  const std::size_t dim = base.dimension();
  // ceil(density * K), absorbing representation error such as 0.3 * 10 = 3.0000000000000004.
  const auto keep = static_cast<std::size_t>(
      std::ceil(spec.density * static_cast<double>(dim) - 1e-9));

  std::vector<std::vector<double>> task_vectors;
  task_vectors.reserve(models.size());
  for (const auto& model : models) {
    if (model.dimension() != dim) {
      throw ExecutorError(fmt::format("model has {} skills but merge base has {}",
                                      model.dimension(), dim));
    }
    std::vector<double> tau(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      tau[k] = model.skills[k] - base.skills[k];
    }
    trim(tau, keep);
    task_vectors.push_back(std::move(tau));
  }

  SimModel out = base;
  for (std::size_t k = 0; k < dim; ++k) {
    double mass = 0.0;
    for (std::size_t i = 0; i < task_vectors.size(); ++i) {
      mass += spec.weights[i] * task_vectors[i][k];
    }
    const int elected = sign_of(mass);
    if (elected == 0) {
      continue;
    }
    double numerator = 0.0;
    double denominator = 0.0;
    for (std::size_t i = 0; i < task_vectors.size(); ++i) {
      if (sign_of(task_vectors[i][k]) == elected) {
        numerator += spec.weights[i] * task_vectors[i][k];
        denominator += spec.weights[i];
      }
    }
    if (denominator > 0.0) {
      out.skills[k] += numerator / denominator;
    }
  }
  return out;
}

}  // namespace pipeforge
