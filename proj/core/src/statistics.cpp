// SPDX-License-Identifier: Apache-2.0

#include "pipeforge/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pipeforge/error.hpp"

namespace pipeforge {

std::vector<WindowStat> window_stats(std::span<const double> scores, std::size_t window) {
  if (window == 0) {
    throw ConfigError("window size must be positive");
  }
  std::vector<WindowStat> out;
  for (std::size_t begin = 0; begin < scores.size(); begin += window) {
    const auto part = scores.subspan(begin, std::min(window, scores.size() - begin));
    WindowStat stat;
    stat.start = begin + 1;
    stat.count = part.size();
    stat.mean = std::accumulate(part.begin(), part.end(), 0.0) / static_cast<double>(part.size());
    stat.max = *std::max_element(part.begin(), part.end());
    double sq = 0.0;
    for (double v : part) {
      sq += (v - stat.mean) * (v - stat.mean);
    }
    stat.stddev = std::sqrt(sq / static_cast<double>(part.size()));
    out.push_back(stat);
  }
  return out;
}

std::vector<WindowStat> window_stats(std::span<const TrialRecord> history, std::size_t window) {
  std::vector<double> scores;
  scores.reserve(history.size());
  for (const auto& r : history) {
    scores.push_back(r.aggregate);
  }
  return window_stats(scores, window);
}

std::vector<double> running_max(std::span<const double> scores) {
  std::vector<double> out;
  out.reserve(scores.size());
  for (double v : scores) {
    out.push_back(out.empty() ? v : std::max(out.back(), v));
  }
  return out;
}

TopK top_k(std::span<const TrialRecord> history, std::size_t k) {
  if (k == 0) {
    throw ConfigError("top-k needs k >= 1");
  }
  TopK out;
  out.trials.resize(history.size());
  std::iota(out.trials.begin(), out.trials.end(), std::size_t{0});
  std::stable_sort(out.trials.begin(), out.trials.end(), [&](std::size_t a, std::size_t b) {
    if (history[a].aggregate != history[b].aggregate) {
      return history[a].aggregate > history[b].aggregate;
    }
    return history[a].step < history[b].step;
  });
  if (k > out.trials.size()) {
    out.truncated = true;
  } else {
    out.trials.resize(k);
  }
  return out;
}

}  // namespace pipeforge
