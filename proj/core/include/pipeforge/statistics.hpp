// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "pipeforge/memory.hpp"

namespace pipeforge {

struct WindowStat {
  std::size_t start = 1;  // first step of the window
  std::size_t count = 0;
  double mean = 0.0;
  double max = 0.0;
  double stddev = 0.0;  // population
};

/// Consecutive windows of `window` scores; the last one may be partial.
std::vector<WindowStat> window_stats(std::span<const double> scores, std::size_t window = 15);
std::vector<WindowStat> window_stats(std::span<const TrialRecord> history, std::size_t window = 15);

/// Best score so far at every step.
std::vector<double> running_max(std::span<const double> scores);

struct TopK {
  std::vector<std::size_t> trials;  // indices into the history, best first
  bool truncated = false;           // fewer trials than requested
};

/// Highest aggregates first; equal scores keep the earlier step first.
TopK top_k(std::span<const TrialRecord> history, std::size_t k);

}  // namespace pipeforge
