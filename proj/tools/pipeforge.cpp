// SPDX-License-Identifier: Apache-2.0
//
// pipeforge: validate configurations, run and resume searches, report on
// traces and replay pipelines.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "pipeforge/action_space.hpp"
#include "pipeforge/config.hpp"
#include "pipeforge/error.hpp"
#include "pipeforge/experiments.hpp"
#include "pipeforge/orchestrator.hpp"
#include "pipeforge/statistics.hpp"
#include "pipeforge/trace.hpp"

namespace fs = std::filesystem;
using namespace pipeforge;

namespace {

/// Bad invocation: reported with exit status 2.
struct UsageError : Error {
  explicit UsageError(const std::string& message) : Error("usage", message) {}
};

struct Args {
  std::string config;
  std::string trace;
  std::string checkpoint;
  std::optional<std::uint64_t> seed;
  std::string endpoint;
  std::size_t top = 3;
  std::size_t rank = 1;
  std::size_t window = 15;
  std::vector<double> factors{1, 2, 4, 6};
  double grid_step = 0.1;
  std::string pipeline;
  std::vector<std::string> substitutions;
  std::string out;
};

void require_file(const std::string& path, const char* what) {
  if (path.empty()) {
    throw UsageError(fmt::format("{} is required", what));
  }
  if (!fs::exists(path)) {
    throw UsageError(fmt::format("{} not found: {}", what, path));
  }
}

RunConfig config_from(const Args& args) {
  require_file(args.config, "--config");
  auto config = load_config(args.config);
  if (args.seed) {
    config.seed = *args.seed;
    config.source["seed"] = *args.seed;
  }
  if (!args.endpoint.empty()) {
    config.endpoint.url = args.endpoint;
    config.source["endpoint"]["url"] = args.endpoint;
  }
  return config;
}

/// The explicit --config, or the configuration recorded in the trace header.
RunConfig config_for_trace(const Args& args, const TraceSummary& trace) {
  if (!args.config.empty()) {
    return config_from(args);
  }
  if (trace.run.is_null()) {
    throw UsageError("trace has no run header; pass --config");
  }
  auto config = parse_config(nlohmann::ordered_json::parse(trace.run.at("config").dump()),
                             trace.run.at("base_dir").get<std::string>());
  config.seed = trace.run.at("seed").get<std::uint64_t>();
  return config;
}

std::map<std::string, std::string> parse_substitutions(const std::vector<std::string>& items) {
  std::map<std::string, std::string> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
      throw UsageError(fmt::format("--substitute expects FROM=TO, got '{}'", item));
    }
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

PipelineScript pipeline_from(const Args& args, const TraceSummary* trace) {
  if (!args.pipeline.empty()) {
    require_file(args.pipeline, "--pipeline");
    return load_pipeline(args.pipeline);
  }
  if (trace == nullptr) {
    throw UsageError("--pipeline or --trace is required");
  }
  const auto best = top_k(trace->trials, args.rank);
  if (best.trials.size() < args.rank) {
    throw UsageError(fmt::format("trace has {} trials, cannot take rank {}", trace->trials.size(), args.rank));
  }
  return pipeline_from_trials(trace->trials, best.trials[args.rank - 1]);
}

void emit(const Table& table, const Args& args) {
  if (args.out.empty()) {
    std::cout << table.to_tsv();
    return;
  }
  std::ofstream(args.out + ".tsv") << table.to_tsv();
  std::ofstream(args.out + ".json") << table.to_json().dump(2) << '\n';
  fmt::print("wrote {0}.tsv and {0}.json\n", args.out);
}

/// Error lines stay on one line so they can be parsed.
int fail(int status, const std::string& category, std::string message) {
  for (auto& ch : message) {
    if (ch == '\n' || ch == '\r') {
      ch = ' ';
    }
  }
  std::fprintf(stderr, "error: %s: %s\n", category.c_str(), message.c_str());
  return status;
}

std::string default_checkpoint(const Args& args) {
  return args.checkpoint.empty() ? args.trace + ".checkpoint.json" : args.checkpoint;
}

void print_summary(const Orchestrator& run) {
  const auto& state = run.state();
  fmt::print("completed {} of {} steps\n", state.step, run.config().total_timesteps);
  const auto best = top_k(state.history, 1);
  if (!best.trials.empty()) {
    const auto& r = state.history[best.trials.front()];
    fmt::print("best {} (step {}): {:.4f}\n", r.produced_label, r.step, r.aggregate);
  }
}

int cmd_validate(const Args& args) {
  const auto config = config_from(args);
  validate_config(config);
  const auto pool = build_registry(config);
  const auto n = count_candidates(config.action_types, pool, config.policy.merge_pairs);
  fmt::print("{} candidates at step 1\n", n);
  return 0;
}

int cmd_enumerate(const Args& args) {
  const auto config = config_from(args);
  validate_config(config);
  const auto pool = build_registry(config);
  const auto candidates = enumerate_candidates(config.action_types, pool, config.policy.merge_pairs);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    fmt::print("{}: {}\n", i, describe(candidates[i], pool));
  }
  fmt::print("{} candidates at step 1\n", candidates.size());
  return 0;
}

int run_loop(RunConfig config, const Args& args) {
  if (args.trace.empty()) {
    throw UsageError("--trace is required");
  }
  OrchestratorOptions options;
  options.trace_path = args.trace;
  options.checkpoint_path = default_checkpoint(args);
  options.checkpoint_each_step = true;
  Orchestrator run(std::move(config), options);
  run.run();
  run.checkpoint(options.checkpoint_path);
  print_summary(run);
  return 0;
}

int cmd_run(const Args& args) { return run_loop(config_from(args), args); }

int cmd_random_baseline(const Args& args) {
  auto config = config_from(args);
  config.controller = "random";
  config.source["controller"] = "random";
  return run_loop(std::move(config), args);
}

int cmd_resume(const Args& args) {
  require_file(args.checkpoint, "--checkpoint");
  OrchestratorOptions options;
  options.trace_path = args.trace;
  options.checkpoint_path = args.checkpoint;
  options.checkpoint_each_step = true;
  auto run = Orchestrator::resume(args.checkpoint, options);
  run->run();
  run->checkpoint(args.checkpoint);
  print_summary(*run);
  return 0;
}

int cmd_report(const Args& args) {
  require_file(args.trace, "--trace");
  const auto trace = read_trace(args.trace);
  const auto config = config_for_trace(args, trace);

  fmt::print("# windows (size {})\n", args.window);
  fmt::print("start\tcount\tmean\tmax\tstddev\trunning_max\n");
  double best = 0.0;
  for (const auto& w : window_stats(trace.trials, args.window)) {
    best = w.start == 1 ? w.max : std::max(best, w.max);
    fmt::print("{}\t{}\t{:.4f}\t{:.4f}\t{:.4f}\t{:.4f}\n", w.start, w.count, w.mean, w.max, w.stddev, best);
  }

  const auto top = top_k(trace.trials, args.top);
  fmt::print("\n# top {}{}\n", args.top, top.truncated ? fmt::format(" (only {} models)", top.trials.size()) : "");
  for (std::size_t rank = 0; rank < top.trials.size(); ++rank) {
    const auto& r = trace.trials[top.trials[rank]];
    fmt::print("Top-{}: {} (step {}) validation {:.4f}", rank + 1, r.produced_label, r.step, r.aggregate);
    for (const auto& s : r.scores) {
      fmt::print(" {}={:.4f}", s.task, s.value);
    }
    fmt::print("\n");
    const auto script = pipeline_from_trials(trace.trials, top.trials[rank]);
    std::map<std::string, double> score_of;
    for (const auto& t : trace.trials) {
      score_of[t.produced_label] = t.aggregate;
    }
    for (const auto& step : script.steps) {
      fmt::print("  {}({}) -> {}  {:.4f}\n", step.action, fmt::join(step.objects, ", "), step.output,
                 score_of[step.output]);
    }
    auto replayed = replay(config, script);
    fmt::print("  {} {:.4f}", config.test_tasks.empty() ? "validation (replayed)" : "test",
               replayed.test_aggregate.value_or(replayed.aggregate));
    for (const auto& s : config.test_tasks.empty() ? replayed.scores : replayed.test_scores) {
      fmt::print(" {}={:.4f}", s.task, s.value);
    }
    fmt::print("\n");
  }
  return 0;
}

int cmd_grid_search(const Args& args) {
  const auto config = config_from(args);
  const auto result = grid_search_ties(config, args.grid_step);
  const auto table = grid_table(result, config.eval_tasks, args.grid_step);
  emit(table, args);
  const auto& best = result.rows[result.best];
  fmt::print("best weights ({}) aggregate {:.4f} over {} points (step {})\n", fmt::join(best.weights, ", "),
             best.aggregate, result.rows.size(), args.grid_step);
  return 0;
}

std::optional<TraceSummary> optional_trace(const Args& args) {
  if (args.trace.empty()) {
    return std::nullopt;
  }
  require_file(args.trace, "--trace");
  return read_trace(args.trace);
}

RunConfig config_for(const Args& args, const std::optional<TraceSummary>& trace) {
  return trace ? config_for_trace(args, *trace) : config_from(args);
}

int cmd_scale_data(const Args& args) {
  const auto trace = optional_trace(args);
  const auto config = config_for(args, trace);
  const auto script = pipeline_from(args, trace ? &*trace : nullptr);
  emit(scale_table(scale_data_replay(config, script, args.factors)), args);
  return 0;
}

int cmd_transfer(const Args& args) {
  const auto trace = optional_trace(args);
  const auto config = config_for(args, trace);
  const auto script = pipeline_from(args, trace ? &*trace : nullptr);
  const auto subs = parse_substitutions(args.substitutions);
  emit(transfer_table(transfer_model_replay(config, script, subs)), args);
  return 0;
}

int cmd_replay(const Args& args) {
  const auto trace = optional_trace(args);
  const auto config = config_for(args, trace);
  const auto script = pipeline_from(args, trace ? &*trace : nullptr);
  emit(replay_table(replay(config, script)), args);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pipeforge: agent-driven post-training pipeline search"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "pipeforge 0.1.0");
  Args args;

  auto add_config = [&](CLI::App* c) { c->add_option("--config", args.config, "Run configuration (JSON)"); };
  auto add_trace = [&](CLI::App* c) { c->add_option("--trace", args.trace, "Run trace (JSON lines)"); };
  auto add_checkpoint = [&](CLI::App* c) {
    c->add_option("--checkpoint", args.checkpoint, "Checkpoint file (default: <trace>.checkpoint.json)");
  };
  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", args.seed, "Override the configured seed"); };
  auto add_pipeline = [&](CLI::App* c) {
    c->add_option("--pipeline", args.pipeline, "Pipeline script (JSON)");
    c->add_option("--rank", args.rank, "With --trace: replay the Top-<rank> pipeline")->check(CLI::PositiveNumber);
    c->add_option("--out", args.out, "Write <out>.tsv and <out>.json instead of printing");
  };

  auto* validate = app.add_subcommand("validate-config", "Check a configuration and count step-1 candidates");
  add_config(validate);
  auto* enumerate = app.add_subcommand("enumerate", "List every step-1 candidate");
  add_config(enumerate);
  auto* run = app.add_subcommand("run", "Run the search loop");
  add_config(run);
  add_trace(run);
  add_checkpoint(run);
  add_seed(run);
  run->add_option("--endpoint", args.endpoint, "Chat-completions URL (key from the configured env variable)");
  auto* resume = app.add_subcommand("resume", "Continue a run from its checkpoint");
  add_checkpoint(resume);
  add_trace(resume);
  auto* report = app.add_subcommand("report", "Window statistics and Top-k pipelines of a trace");
  add_config(report);
  add_trace(report);
  report->add_option("--top", args.top, "Number of models")->check(CLI::PositiveNumber);
  report->add_option("--window", args.window, "Window size")->check(CLI::PositiveNumber);
  auto* grid = app.add_subcommand("grid-search", "TIES weight grid search over the specialists");
  add_config(grid);
  grid->add_option("--grid-step", args.grid_step, "Simplex lattice step");
  grid->add_option("--out", args.out, "Write <out>.tsv and <out>.json instead of printing");
  auto* random = app.add_subcommand("random-baseline", "Run the loop with the random policy");
  add_config(random);
  add_trace(random);
  add_checkpoint(random);
  add_seed(random);
  auto* scale = app.add_subcommand("scale-data", "Replay a pipeline with scaled datasets");
  add_config(scale);
  add_trace(scale);
  add_pipeline(scale);
  scale->add_option("--factors", args.factors, "Dataset size factors")->delimiter(',');
  auto* transfer = app.add_subcommand("transfer-model", "Replay a pipeline with substituted objects");
  add_config(transfer);
  add_trace(transfer);
  add_pipeline(transfer);
  transfer->add_option("--substitute", args.substitutions, "FROM=TO label substitution")->required();
  auto* replay_cmd = app.add_subcommand("replay", "Replay a pipeline and score every step");
  add_config(replay_cmd);
  add_trace(replay_cmd);
  add_pipeline(replay_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, "usage", e.what());
  }

  try {
    if (*validate) return cmd_validate(args);
    if (*enumerate) return cmd_enumerate(args);
    if (*run) return cmd_run(args);
    if (*resume) return cmd_resume(args);
    if (*report) return cmd_report(args);
    if (*grid) return cmd_grid_search(args);
    if (*random) return cmd_random_baseline(args);
    if (*scale) return cmd_scale_data(args);
    if (*transfer) return cmd_transfer(args);
    if (*replay_cmd) return cmd_replay(args);
  } catch (const UsageError& e) {
    return fail(2, "usage", e.what());
  } catch (const Error& e) {
    return fail(1, e.category(), e.what());
  } catch (const std::exception& e) {
    return fail(1, "internal", e.what());
  }
  return 2;
}
