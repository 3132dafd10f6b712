// SPDX-License-Identifier: Apache-2.0
//
// Shared test helpers: independent oracles, scratch directories, landscape
// configurations and deterministic agent responders.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pipeforge/action_space.hpp"
#include "pipeforge/agent.hpp"
#include "pipeforge/config.hpp"
#include "pipeforge/registry.hpp"

namespace pftest {

using nlohmann::ordered_json;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_file(const std::filesystem::path& path, std::string_view text);
std::string read_file(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes);

// ---- oracles -------------------------------------------------------------

/// Trim/elect/merge evaluated coordinate by coordinate. `keep` is the
/// number of coordinates each task vector retains.
std::vector<double> oracle_ties(const std::vector<double>& base,
                                const std::vector<std::vector<double>>& models,
                                const std::vector<double>& weights, std::size_t keep);

/// Simulated SFT written out directly from its definition.
std::vector<double> oracle_sft(const std::vector<double>& skills, const std::vector<double>& targets,
                               const std::vector<int>& coverage, double examples, double lr);

/// Candidate sets as (type, labels) from nested loops over the pool sizes:
/// m models, d datasets, r rates, b bases, w weight tuples, p densities.
/// Merge pairs are unordered without self-pairs.
std::set<std::pair<std::string, std::vector<std::string>>> oracle_candidates(
    std::size_t m, std::size_t d, std::size_t r, std::size_t b, std::size_t w, std::size_t p);

/// One-sided Fisher exact test: probability, under equal success rates, of
/// the first group having at least `a` successes given the margins.
double fisher_one_sided(int a, int n1, int b, int n2);

// ---- configurations ------------------------------------------------------

/// Shape of the reference experiment with simulated payloads: 4 models
/// (including the base), 4 datasets (3 single-task plus their mixture),
/// one learning rate, one weight pair, one density, 3 accuracy tasks.
ordered_json exp1_config(std::size_t budget, const std::string& controller = "scripted");

/// Base pool names used by the generated configurations.
std::vector<std::string> exp1_model_labels();
std::vector<std::string> exp1_dataset_labels();

/// SFT-only landscape whose optimum is a two-step curriculum.
ordered_json curriculum_config(std::size_t budget, const std::string& controller);

/// SFT-only pool over datasets G, C, T (one skill each) and their mixture M.
/// `targets` gives each single-skill dataset's target.
ordered_json sft_pool_config(const std::vector<std::vector<double>>& bases,
                             const std::vector<std::string>& base_labels,
                             const std::vector<double>& targets);

pipeforge::RunConfig to_config(const ordered_json& doc, const std::filesystem::path& base_dir = ".");

// ---- scripted agent helpers ---------------------------------------------

/// Text between `begin` and `end` (both exclusive); empty when absent.
std::string section(std::string_view text, std::string_view begin, std::string_view end);

/// Slot sizes and labels listed under "Object Candidates:".
std::vector<std::vector<std::string>> object_candidates(std::string_view prompt);

/// Number of entries listed under "Action List:".
std::size_t action_count(std::string_view prompt);

/// Deterministic responder that walks through the index space; merges may
/// come out as self-pairs, which exercises the re-ask path.
pipeforge::ScriptedAgent::Responder cycling_responder();

/// Greedy oracle agent for SFT-only pools: memory accumulates the history
/// lines; object selection reads the tried (model, dataset) pairs from the
/// reflection and picks the untried pair whose simulated result scores
/// best. `lookup` resolves a label within a kind.
struct GreedyAgent {
  std::function<const pipeforge::ObjectEntry*(const std::string& kind, const std::string& label)> lookup;
  std::function<double(const std::vector<double>&)> score;

  pipeforge::ScriptedAgent::Responder responder();
};

// ---- chat-completions stub ----------------------------------------------

/// Local HTTP server speaking the chat-completions shape. `reply` maps the
/// user prompt to the content of the answer. The first `failures` requests
/// get HTTP 503.
class StubServer {
 public:
  using Reply = std::function<std::string(const std::string& prompt)>;

  explicit StubServer(Reply reply, int failures = 0);
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  std::string url() const;
  int requests() const;
  /// Request bodies received, in order.
  std::vector<nlohmann::json> bodies() const;
  std::vector<std::string> authorizations() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace pftest
