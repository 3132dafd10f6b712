// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "fixtures.hpp"
#include "pipeforge/error.hpp"
#include "pipeforge/policy.hpp"

using namespace pipeforge;

namespace {

const std::vector<ActionSchema> kSchemas = {
    {"sft", {"models", "sft_dataset", "sft_lr"}},
    {"ties_merging", {"base_models", "models", "models", "ties_weights", "ties_density"}},
};

Registry small_pool() {
  Registry reg;
  reg.register_object("base_models", "base", 0.0);
  reg.register_object("models", "m0", 0.0);
  reg.register_object("models", "m1", 0.0);
  reg.register_object("models", "m2", 0.0);
  reg.register_object("sft_dataset", "d0", 0.0);
  reg.register_object("sft_lr", "1e-06", 1e-6);
  reg.register_object("ties_weights", "[0.5, 0.5]", RealTuple{0.5, 0.5});
  reg.register_object("ties_density", "0.5", 0.5);
  return reg;
}

struct Harness {
  Registry pool = small_pool();
  std::vector<ActionCandidate> candidates = enumerate_candidates(kSchemas, pool);
  Rng rng{7};
  AgentGateway gateway;
  LlmPolicy policy;

  explicit Harness(std::map<Phase, std::vector<std::string>> script, int retries = 3)
      : gateway(std::make_unique<ScriptedAgent>(std::move(script))),
        policy(gateway, TemplateSet::load(TemplateSet::default_directory()),
               LlmPolicyOptions{0.0, 256, "m", retries}) {}

  Selection select(std::string_view memory = "") {
    return policy.select(SelectionContext{memory, kSchemas, pool, candidates, 1, rng});
  }
};

}  // namespace

TEST_CASE("policy names") {
  CHECK(policy_kind_from_string("LaMDAgent_gpt") == PolicyKind::Llm);
  CHECK(policy_kind_from_string("llm") == PolicyKind::Llm);
  CHECK(policy_kind_from_string("random") == PolicyKind::Random);
  CHECK(policy_kind_from_string("scripted") == PolicyKind::Scripted);
  CHECK_THROWS_AS(policy_kind_from_string("gpt"), ConfigError);
}

TEST_CASE("uniform_index is in range and reproducible") {
  Rng a(3), b(3);
  for (int i = 0; i < 1000; ++i) {
    const auto x = uniform_index(a, 7);
    CHECK(x < 7);
    CHECK(x == uniform_index(b, 7));
  }
  CHECK_THROWS_AS(uniform_index(a, 0), ConfigError);
}

TEST_CASE("two-stage selection makes one call per stage") {
  Harness h({{Phase::TypeSelection, {"Selected Action Type NUMBER: 1"}},
             {Phase::ObjectSelection, {"[[0, 2, 0, 0, 0]]"}}});
  const auto s = h.select("memo");
  CHECK(describe(s.candidate, h.pool) == "ties_merging(base, m0, m2, [0.5, 0.5], 0.5)");
  CHECK(s.trace.presented_types == std::vector<std::string>{"sft", "ties_merging"});
  CHECK(s.trace.type_index == 1);
  CHECK(s.trace.object_indices == std::vector<std::size_t>{0, 2, 0, 0, 0});
  CHECK(s.trace.retries == 0);
  CHECK_FALSE(s.trace.fallback);
  const auto& calls = h.gateway.trace().calls();
  REQUIRE(calls.size() == 2);
  CHECK(calls[0].request.prompt.find("memo") != std::string::npos);
  CHECK(calls[1].request.prompt.find("Object type 1: models\n0: m0\n1: m1\n2: m2") != std::string::npos);
  CHECK(calls[1].request.max_tokens == 256);
}

TEST_CASE("unordered picks are canonicalised, self-pairs are re-asked") {
  Harness h({{Phase::TypeSelection, {"1"}},
             {Phase::ObjectSelection, {"[[0, 1, 1, 0, 0]]", "[[0, 2, 1, 0, 0]]"}}});
  const auto s = h.select();
  CHECK(binding_labels(s.candidate, h.pool) == std::vector<std::string>{"base", "m1", "m2", "[0.5, 0.5]", "0.5"});
  CHECK(s.trace.retries == 1);
  CHECK_FALSE(s.trace.fallback);
  REQUIRE(h.gateway.trace().size() == 3);
  CHECK(h.gateway.trace().calls()[2].retry);
}

TEST_CASE("exhausted re-asks fall back to a uniform pick") {
  Harness bad_type({{Phase::TypeSelection, {"x", "y"}}}, 1);
  const auto a = bad_type.select();
  CHECK(a.trace.fallback);
  CHECK_FALSE(a.trace.type_index.has_value());
  CHECK(a.trace.retries == 1);
  CHECK(std::find(bad_type.candidates.begin(), bad_type.candidates.end(), a.candidate) != bad_type.candidates.end());

  Harness bad_objects({{Phase::TypeSelection, {"0"}}, {Phase::ObjectSelection, {"?", "[[9, 9, 9]]", "[[]]"}}}, 2);
  const auto b = bad_objects.select();
  CHECK(b.trace.fallback);
  CHECK(b.trace.type_index == 0);
  CHECK(b.candidate.action_type == "sft");
  CHECK(b.trace.retries == 2);
  CHECK(b.trace.raw_texts.size() == 4);
}

TEST_CASE("types without candidates are not offered") {
  Harness h({{Phase::TypeSelection, {"0"}}, {Phase::ObjectSelection, {"[[0, 0, 1, 0, 0]]"}}});
  Registry pool;
  pool.register_object("base_models", "base", 0.0);
  pool.register_object("models", "m0", 0.0);
  pool.register_object("models", "m1", 0.0);
  pool.register_object("ties_weights", "[0.5, 0.5]", RealTuple{0.5, 0.5});
  pool.register_object("ties_density", "0.5", 0.5);
  const auto candidates = enumerate_candidates(kSchemas, pool);
  const auto s = h.policy.select(SelectionContext{"", kSchemas, pool, candidates, 1, h.rng});
  CHECK(s.trace.presented_types == std::vector<std::string>{"ties_merging"});
  CHECK(s.candidate.action_type == "ties_merging");
  CHECK(h.gateway.trace().calls()[0].request.prompt.find("Action List:\n0: ties_merging\n\n") != std::string::npos);
}

TEST_CASE("random and scripted policies") {
  auto pool = small_pool();
  const auto candidates = enumerate_candidates(kSchemas, pool);
  Rng rng(11);
  RandomPolicy random;
  std::vector<int> hits(candidates.size());
  for (int i = 0; i < 600; ++i) {
    const auto s = random.select(SelectionContext{"", kSchemas, pool, candidates, 1, rng});
    const auto it = std::find(candidates.begin(), candidates.end(), s.candidate);
    REQUIRE(it != candidates.end());
    ++hits[static_cast<std::size_t>(it - candidates.begin())];
  }
  for (int h : hits) {
    CHECK(h > 0);
  }
  CHECK_THROWS_AS(random.select(SelectionContext{"", kSchemas, pool, {}, 1, rng}), ConfigError);

  ScriptedPolicy scripted({{"sft", {"m1", "d0", "1e-06"}}, {"sft", {"m9", "d0", "1e-06"}}});
  const auto first = scripted.select(SelectionContext{"", kSchemas, pool, candidates, 1, rng});
  CHECK(describe(first.candidate, pool) == "sft(m1, d0, 1e-06)");
  CHECK(scripted.cursor() == 1);
  CHECK_THROWS_AS(scripted.select(SelectionContext{"", kSchemas, pool, candidates, 2, rng}), ConfigError);
  scripted.restore(2);
  CHECK_THROWS_AS(scripted.select(SelectionContext{"", kSchemas, pool, candidates, 3, rng}), ConfigError);
  scripted.restore(0);
  CHECK(scripted.select(SelectionContext{"", kSchemas, pool, candidates, 1, rng}).candidate == first.candidate);
  CHECK_THROWS_AS(scripted.restore(-1), CheckpointError);
  CHECK_THROWS_AS(scripted.restore("x"), CheckpointError);
}
