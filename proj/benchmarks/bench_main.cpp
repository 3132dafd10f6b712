// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include <fmt/format.h>

#include "pipeforge/action_space.hpp"
#include "pipeforge/config.hpp"
#include "pipeforge/orchestrator.hpp"
#include "pipeforge/prompts.hpp"
#include "pipeforge/sim_model.hpp"

using namespace pipeforge;

namespace {

void BM_TiesMerge(benchmark::State& state) {
  const auto K = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> value(-1.0, 1.0);
  SimModel base{std::vector<double>(K)};
  for (auto& x : base.skills) x = value(rng);
  std::vector<SimModel> models(3, SimModel{std::vector<double>(K)});
  for (auto& m : models) {
    for (auto& x : m.skills) x = value(rng);
  }
  const MergeSpec spec{{0.5, 0.3, 0.2}, 0.5};
  for (auto _ : state) {
    benchmark::DoNotOptimize(ties_merge(base, models, spec));
  }
}
BENCHMARK(BM_TiesMerge)->Arg(16)->Arg(1024)->Arg(65536);

Registry merge_pool(std::size_t models) {
  Registry reg;
  reg.register_object("base_models", "base", 0.0);
  for (std::size_t i = 0; i < models; ++i) reg.register_object("models", fmt::format("m{}", i), 0.0);
  for (std::size_t i = 0; i < 4; ++i) reg.register_object("sft_dataset", fmt::format("d{}", i), 0.0);
  reg.register_object("sft_lr", "1e-06", 1e-6);
  reg.register_object("ties_weights", "[0.5, 0.5]", RealTuple{0.5, 0.5});
  reg.register_object("ties_density", "0.5", 0.5);
  return reg;
}

void BM_Enumerate(benchmark::State& state) {
  const std::vector<ActionSchema> schemas = {
      {"sft", {"models", "sft_dataset", "sft_lr"}},
      {"ties_merging", {"base_models", "models", "models", "ties_weights", "ties_density"}},
  };
  const auto pool = merge_pool(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(enumerate_candidates(schemas, pool));
  }
}
BENCHMARK(BM_Enumerate)->Arg(4)->Arg(32)->Arg(104);

void BM_ParseObjects(benchmark::State& state) {
  const std::vector<std::size_t> sizes{1, 104, 104, 1, 1};
  const std::string text = "The merged model looked strongest, so pairing it again.\nSelected Object NUMBERs: [[0, 17, 93, 0, 0]]";
  for (auto _ : state) {
    benchmark::DoNotOptimize(parse_object_selection(text, sizes));
  }
}
BENCHMARK(BM_ParseObjects);

void BM_RandomStep(benchmark::State& state) {
  const auto config = parse_config_text(R"({
    "seed": 1, "total_timesteps": 1000000, "controller": "random",
    "objects": {
      "base_models": [{"label": "base", "skills": [0.2, 0.25, 0.3]}],
      "models": [{"label": "a", "skills": [0.45, 0.2, 0.25]}, {"label": "b", "skills": [0.15, 0.6, 0.25]}],
      "sft_dataset": [{"label": "d", "targets": [0.5, 0.5, 0.5], "coverage": [1, 1, 1], "examples": 1000}],
      "sft_lr": [1e-6], "ties_weights": [[0.5, 0.5]], "ties_density": [0.5]
    },
    "action_types": {"sft": ["models", "sft_dataset", "sft_lr"],
                     "ties_merging": ["base_models", "models", "models", "ties_weights", "ties_density"]},
    "eval_tasks": [["a", "acc"], ["b", "acc"], ["c", "acc"]]
  })");
  for (auto _ : state) {
    state.PauseTiming();
    Orchestrator run(config);
    state.ResumeTiming();
    for (int i = 0; i < 20; ++i) run.step();
  }
}
BENCHMARK(BM_RandomStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
