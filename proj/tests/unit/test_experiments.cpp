// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "fixtures.hpp"
#include "pipeforge/error.hpp"
#include "pipeforge/experiments.hpp"
#include "pipeforge/orchestrator.hpp"

using namespace pipeforge;
using pftest::ordered_json;
using nlohmann::json;

namespace {

ordered_json three_step_config() {
  auto doc = pftest::exp1_config(3, "scripted");
  doc["policy_options"]["scripted_actions"] = ordered_json::parse(R"([
    {"action": "sft", "objects": ["gemma-2-2b--gsm8k_1k", "commonsense_qa_1k", "1e-06"]},
    {"action": "sft", "objects": ["gemma-2-2b--trivia_qa_1k_w_context", "gsm8k_1k", "1e-06"]},
    {"action": "ties_merging", "objects": ["gemma-2-2b", "0--1--0", "0--2--0", "[0.5, 0.5]", "0.5"]}
  ])");
  return doc;
}

}  // namespace

TEST_CASE("pipelines recovered from a run replay to the same scores") {
  const auto config = pftest::to_config(three_step_config());
  Orchestrator run(config);
  run.run();
  const auto& s = run.state();
  const auto from_lineage = pipeline_from_lineage(s.registry, s.history[2].produced);
  const auto from_trials = pipeline_from_trials(s.history, 2);
  CHECK(from_lineage == from_trials);
  REQUIRE(from_lineage.steps.size() == 3);
  CHECK(from_lineage.steps[2].objects[1] == "0--1--0");

  const auto result = replay(config, from_lineage);
  CHECK(result.aggregate == s.history[2].aggregate);
  CHECK(result.scores == s.history[2].scores);
  CHECK(result.final_payload == s.registry.get(s.history[2].produced).payload);
  CHECK_FALSE(result.test_aggregate.has_value());

  const auto only_first = pipeline_from_trials(s.history, 0);
  CHECK(only_first.steps.size() == 1);
  CHECK_THROWS_AS(pipeline_from_trials(s.history, 3), ExperimentError);

  pftest::TempDir dir;
  save_pipeline(from_lineage, dir / "p.json");
  CHECK(load_pipeline(dir / "p.json") == from_lineage);
  const auto table = replay_table(result);
  CHECK(table.rows.size() == 3);
}

TEST_CASE("replay rejects malformed pipelines") {
  const auto config = pftest::to_config(three_step_config());
  CHECK_THROWS_AS(replay(config, PipelineScript{}), ExperimentError);
  CHECK_THROWS_AS(replay(config, PipelineScript{{{"distill", {"a"}, ""}}}), ExperimentError);
  CHECK_THROWS_AS(replay(config, PipelineScript{{{"sft", {"gemma-2-2b"}, ""}}}), ExperimentError);
  CHECK_THROWS_AS(replay(config, PipelineScript{{{"sft", {"nope", "gsm8k_1k", "1e-06"}, ""}}}), ExperimentError);
  CHECK_THROWS_AS(pipeline_from_json(json::parse(R"({"version": 9, "steps": []})")), ExperimentError);
  CHECK_THROWS_AS(pipeline_from_json(json::parse(R"({"steps": [{"objects": []}]})")), ExperimentError);
}

TEST_CASE("data scaling multiplies every dataset") {
  const auto config = pftest::to_config(three_step_config());
  const PipelineScript script{{{"sft", {"gemma-2-2b", "gsm8k_1k", "1e-06"}, "x"}}};
  const std::vector<double> factors{1, 2, 4};
  const auto rows = scale_data_replay(config, script, factors);
  REQUIRE(rows.size() == 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto want = pftest::oracle_sft({0.2, 0.25, 0.3}, {0.5, 0, 0}, {1, 0, 0}, 1000 * factors[i], 1e-6);
    const auto& got = std::get<SimModel>(rows[i].result.final_payload).skills;
    CHECK(got[0] == doctest::Approx(want[0]).epsilon(1e-15));
    CHECK(got[1] == doctest::Approx(want[1]).epsilon(1e-15));
  }
  CHECK(scale_table(rows).rows.size() == 3);
}

TEST_CASE("model substitution") {
  const auto config = pftest::to_config(three_step_config());
  const PipelineScript script{{{"sft", {"gemma-2-2b--gsm8k_1k", "commonsense_qa_1k", "1e-06"}, "x"},
                               {"sft", {"x", "gsm8k_1k", "1e-06"}, "y"}}};
  const auto same = transfer_model_replay(config, script, {{"gemma-2-2b--gsm8k_1k", "gemma-2-2b--gsm8k_1k"}});
  CHECK(same.original.aggregate == same.substituted.aggregate);
  const auto other = transfer_model_replay(config, script, {{"gemma-2-2b--gsm8k_1k", "gemma-2-2b"}});
  CHECK(other.substituted.steps[0].labels[0] == "gemma-2-2b");
  CHECK(other.original.aggregate != other.substituted.aggregate);
  CHECK(transfer_table(other).rows.size() >= 1);
  CHECK_THROWS_AS(transfer_model_replay(config, script, {{"unknown", "gemma-2-2b"}}), ExperimentError);
  CHECK_THROWS_AS(transfer_model_replay(config, script, {{"gemma-2-2b--gsm8k_1k", "gsm8k_1k"}}), ExperimentError);
}

TEST_CASE("weight lattice") {
  const auto half = simplex_lattice(3, 0.5);
  CHECK(half == std::vector<std::vector<double>>{{0, 0, 1}, {0, 0.5, 0.5}, {0, 1, 0}, {0.5, 0, 0.5}, {0.5, 0.5, 0}, {1, 0, 0}});
  CHECK(simplex_lattice(3, 0.1).size() == 66);
  CHECK(simplex_lattice(2, 0.25).size() == 5);
  CHECK_THROWS_AS(simplex_lattice(3, 0.3), ExperimentError);
  CHECK_THROWS_AS(simplex_lattice(0, 0.5), ExperimentError);
}

TEST_CASE("grid search over merge weights") {
  const SimModel base{{0, 0, 0}};
  const std::vector<SimModel> specialists{{{0.8, 0, 0}}, {{0, 0.6, 0}}, {{0, 0, 0.4}}};
  const auto scorer = [](const SimModel& m) {
    ScoreVector v{{"a", m.skills[0]}, {"b", m.skills[1]}, {"c", m.skills[2]}};
    return std::pair{v, (m.skills[0] + m.skills[1] + m.skills[2]) / 3.0};
  };
  const auto grid = grid_search_ties(base, specialists, 0.5, 1.0, scorer);
  REQUIRE(grid.rows.size() == 6);
  for (const auto& row : grid.rows) {
    CHECK(row.aggregate <= grid.rows[grid.best].aggregate);
  }
  CHECK(grid.rows[grid.best].weights == std::vector<double>{0.5, 0.5, 0});
  const std::vector<TaskSpec> tasks{{"a", "acc"}, {"b", "acc"}, {"c", "acc"}};
  CHECK(grid_table(grid, tasks, 0.5).rows.size() == 6);

  const auto from_config = grid_search_ties(pftest::to_config(three_step_config()), 0.5);
  CHECK(from_config.rows.size() == 6);
}

TEST_CASE("random baseline and tables") {
  const auto state = run_random_baseline(pftest::to_config(three_step_config()));
  CHECK(state.history.size() == 3);
  Table t{{"a", "b"}, {{1, "x"}, {2.5, "y"}}, json::object()};
  CHECK(t.to_tsv() == "a\tb\n1\tx\n2.5\ty\n");
  CHECK(t.to_json()["rows"].size() == 2);
}
