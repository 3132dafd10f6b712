// SPDX-License-Identifier: Apache-2.0

#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <httplib.h>
#include <unistd.h>

#include "pipeforge/sim_model.hpp"

namespace pftest {

namespace fs = std::filesystem;

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          fmt::format("pipeforge-test-{}-{}", ::getpid(), counter.fetch_add(1));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_file(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<double> oracle_ties(const std::vector<double>& base,
                                const std::vector<std::vector<double>>& models,
                                const std::vector<double>& weights, std::size_t keep) {
  const auto K = base.size();
  const auto M = models.size();
  std::vector<std::vector<double>> trimmed(M, std::vector<double>(K, 0.0));
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      const double tk = models[i][k] - base[k];
      std::size_t above = 0;
      for (std::size_t j = 0; j < K; ++j) {
        const double tj = std::abs(models[i][j] - base[j]);
        if (tj > std::abs(tk) || (tj == std::abs(tk) && j < k)) {
          ++above;
        }
      }
      trimmed[i][k] = above < keep ? tk : 0.0;
    }
  }
  std::vector<double> out = base;
  for (std::size_t k = 0; k < K; ++k) {
    double total = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
      total += weights[i] * trimmed[i][k];
    }
    const int gamma = total > 0 ? 1 : (total < 0 ? -1 : 0);
    if (gamma == 0) {
      continue;
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
      const int s = trimmed[i][k] > 0 ? 1 : (trimmed[i][k] < 0 ? -1 : 0);
      if (s == gamma) {
        num += weights[i] * trimmed[i][k];
        den += weights[i];
      }
    }
    if (den > 0) {
      out[k] += num / den;
    }
  }
  return out;
}

std::vector<double> oracle_sft(const std::vector<double>& skills, const std::vector<double>& targets,
                               const std::vector<int>& coverage, double examples, double lr) {
  const double eta = std::min(1.0, (lr / 1e-6) * (1.0 - std::exp(-examples / 1000.0)));
  std::vector<double> out(skills.size());
  for (std::size_t k = 0; k < skills.size(); ++k) {
    out[k] = coverage[k] != 0 ? skills[k] + eta * (targets[k] - skills[k]) : skills[k] * (1.0 - 0.3 * eta);
  }
  return out;
}

std::set<std::pair<std::string, std::vector<std::string>>> oracle_candidates(
    std::size_t m, std::size_t d, std::size_t r, std::size_t b, std::size_t w, std::size_t p) {
  std::set<std::pair<std::string, std::vector<std::string>>> out;
  auto name = [](const char* prefix, std::size_t i) { return fmt::format("{}{}", prefix, i); };
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t k = 0; k < r; ++k) {
        out.insert({"sft", {name("m", i), name("d", j), name("r", k)}});
      }
    }
  }
  for (std::size_t x = 0; x < b; ++x) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) {
        for (std::size_t y = 0; y < w; ++y) {
          for (std::size_t z = 0; z < p; ++z) {
            out.insert({"ties_merging", {name("b", x), name("m", i), name("m", j), name("w", y), name("p", z)}});
          }
        }
      }
    }
  }
  return out;
}

double fisher_one_sided(int a, int n1, int b, int n2) {
  const int successes = a + b;
  const int total = n1 + n2;
  auto log_choose = [](int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  };
  double p = 0.0;
  for (int x = a; x <= std::min(n1, successes); ++x) {
    if (successes - x > n2) {
      continue;
    }
    p += std::exp(log_choose(n1, x) + log_choose(n2, successes - x) - log_choose(total, successes));
  }
  return p;
}

namespace {

ordered_json dataset(const std::string& label, std::vector<double> targets, std::vector<int> coverage,
                     std::uint64_t examples) {
  return ordered_json{{"label", label}, {"targets", targets}, {"coverage", coverage}, {"examples", examples}};
}

ordered_json accuracy_tasks() {
  return ordered_json::parse(
      R"([["gsm8k", "acc"], ["commonsenseqa", "acc"], ["trivia_qa_w_context", "acc"]])");
}

}  // namespace

std::vector<std::string> exp1_model_labels() {
  return {"gemma-2-2b--gsm8k_1k", "gemma-2-2b--commonsense_qa_1k", "gemma-2-2b--trivia_qa_1k_w_context",
          "gemma-2-2b"};
}

std::vector<std::string> exp1_dataset_labels() {
  return {"gsm8k_1k", "commonsense_qa_1k", "trivia_qa_1k_w_context", "gsm1k_cqa1k_tqa1k"};
}

ordered_json exp1_config(std::size_t budget, const std::string& controller) {
  ordered_json doc;
  doc["seed"] = 42;
  doc["total_timesteps"] = budget;
  doc["controller"] = controller;
  doc["controller_model"] = "scripted-agent";
  ordered_json objects;
  objects["base_models"] = ordered_json::array({{{"label", "gemma-2-2b"}, {"skills", {0.2, 0.25, 0.3}}}});
  objects["models"] = ordered_json::array({
      {{"label", "gemma-2-2b--gsm8k_1k"}, {"skills", {0.45, 0.2, 0.25}}},
      {{"label", "gemma-2-2b--commonsense_qa_1k"}, {"skills", {0.15, 0.6, 0.25}}},
      {{"label", "gemma-2-2b--trivia_qa_1k_w_context"}, {"skills", {0.15, 0.2, 0.65}}},
      {{"label", "gemma-2-2b"}, {"skills", {0.2, 0.25, 0.3}}},
  });
  objects["sft_dataset"] = ordered_json::array({
      dataset("gsm8k_1k", {0.5, 0, 0}, {1, 0, 0}, 1000),
      dataset("commonsense_qa_1k", {0, 0.75, 0}, {0, 1, 0}, 1000),
      dataset("trivia_qa_1k_w_context", {0, 0, 0.7}, {0, 0, 1}, 1000),
      {{"label", "gsm1k_cqa1k_tqa1k"},
       {"mixture_of", {"gsm8k_1k", "commonsense_qa_1k", "trivia_qa_1k_w_context"}}},
  });
  objects["sft_lr"] = ordered_json::array({0.000001});
  objects["ties_weights"] = ordered_json::array({ordered_json::array({0.5, 0.5})});
  objects["ties_density"] = ordered_json::array({0.5});
  doc["objects"] = objects;
  doc["action_types"] = ordered_json::parse(
      R"({"sft": ["models", "sft_dataset", "sft_lr"],
          "ties_merging": ["base_models", "models", "models", "ties_weights", "ties_density"]})");
  doc["eval_tasks"] = accuracy_tasks();
  doc["score_aggregation"] = "mean";
  return doc;
}

ordered_json curriculum_config(std::size_t budget, const std::string& controller) {
  ordered_json doc;
  doc["seed"] = 0;
  doc["total_timesteps"] = budget;
  doc["controller"] = controller;
  doc["controller_model"] = "greedy-oracle";
  ordered_json objects;
  objects["models"] = ordered_json::array({{{"label", "base"}, {"skills", {0.8, 0.2, 0.0}}}});
  objects["sft_dataset"] = ordered_json::array({
      dataset("A", {0.1, 0, 0}, {1, 0, 0}, 1000),
      dataset("B", {0, 0.5, 0}, {0, 1, 0}, 3000),
      dataset("C", {0, 0, 0.3}, {0, 0, 1}, 3000),
      {{"label", "Mix"}, {"mixture_of", {"A", "B", "C"}}},
  });
  objects["sft_lr"] = ordered_json::array({0.000001});
  doc["objects"] = objects;
  doc["action_types"] = ordered_json::parse(R"({"sft": ["models", "sft_dataset", "sft_lr"]})");
  doc["eval_tasks"] = accuracy_tasks();
  doc["score_aggregation"] = "mean";
  doc["simulator"] = ordered_json{{"forgetting", 0.3}};
  return doc;
}

ordered_json sft_pool_config(const std::vector<std::vector<double>>& bases,
                             const std::vector<std::string>& base_labels, const std::vector<double>& targets) {
  ordered_json doc;
  doc["seed"] = 0;
  doc["total_timesteps"] = 0;
  doc["controller"] = "random";
  ordered_json models = ordered_json::array();
  for (std::size_t i = 0; i < bases.size(); ++i) {
    models.push_back({{"label", base_labels[i]}, {"skills", bases[i]}});
  }
  ordered_json objects;
  objects["models"] = models;
  objects["sft_dataset"] = ordered_json::array({
      dataset("G", {targets[0], 0, 0}, {1, 0, 0}, 1000),
      dataset("C", {0, targets[1], 0}, {0, 1, 0}, 1000),
      dataset("T", {0, 0, targets[2]}, {0, 0, 1}, 1000),
      {{"label", "M"}, {"mixture_of", {"G", "C", "T"}}},
  });
  objects["sft_lr"] = ordered_json::array({0.000001});
  doc["objects"] = objects;
  doc["action_types"] = ordered_json::parse(R"({"sft": ["models", "sft_dataset", "sft_lr"]})");
  doc["eval_tasks"] = accuracy_tasks();
  doc["score_aggregation"] = "mean";
  return doc;
}

pipeforge::RunConfig to_config(const ordered_json& doc, const fs::path& base_dir) {
  return pipeforge::parse_config(doc, base_dir);
}

std::string section(std::string_view text, std::string_view begin, std::string_view end) {
  const auto b = text.find(begin);
  if (b == std::string_view::npos) {
    return {};
  }
  const auto start = b + begin.size();
  const auto e = text.find(end, start);
  return std::string(text.substr(start, e == std::string_view::npos ? std::string_view::npos : e - start));
}

std::vector<std::vector<std::string>> object_candidates(std::string_view prompt) {
  const auto block = section(prompt, "Object Candidates:\n", "\n\nSelected Object NUMBERs:");
  std::vector<std::vector<std::string>> slots;
  std::istringstream in(block);
  std::string line;
  while (std::getline(in, line)) {
    if (line.starts_with("Object type ")) {
      slots.emplace_back();
    } else if (!line.empty() && !slots.empty()) {
      const auto colon = line.find(": ");
      slots.back().push_back(line.substr(colon + 2));
    }
  }
  return slots;
}

std::size_t action_count(std::string_view prompt) {
  const auto block = section(prompt, "Action List:\n", "\n\nSelected Action Type NUMBER:");
  return static_cast<std::size_t>(std::count(block.begin(), block.end(), '\n')) + (block.empty() ? 0 : 1);
}

pipeforge::ScriptedAgent::Responder cycling_responder() {
  using pipeforge::Phase;
  return [](Phase phase, std::size_t index, std::string_view prompt) -> std::string {
    switch (phase) {
      case Phase::TypeSelection:
        return fmt::format("Mixing it up.\nSelected Action Type NUMBER: {}", (index * 5 + 1) % action_count(prompt));
      case Phase::ObjectSelection: {
        const auto slots = object_candidates(prompt);
        std::vector<std::size_t> picks;
        for (std::size_t s = 0; s < slots.size(); ++s) {
          picks.push_back((index * (2 * s + 3) + 7 * s) % slots[s].size());
        }
        return fmt::format("Selected Object NUMBERs: [[{}]]", fmt::join(picks, ", "));
      }
      case Phase::MemoryUpdate:
        return fmt::format("memory {}: {}", index + 1, section(prompt, "# Newly acquired Results\n", "\n\nUpdated Memory:"));
    }
    return {};
  };
}

pipeforge::ScriptedAgent::Responder GreedyAgent::responder() {
  using pipeforge::Phase;
  return [this](Phase phase, std::size_t, std::string_view prompt) -> std::string {
    if (phase == Phase::TypeSelection) {
      return "Only training is available.\nSelected Action Type NUMBER: 0";
    }
    if (phase == Phase::MemoryUpdate) {
      auto previous = section(prompt, "# Previous Memories Acquired from Previous Trials\n", "\n\n# Newly acquired Results");
      const auto latest = section(prompt, "# Newly acquired Results\n", "\n\nUpdated Memory:");
      if (previous == "None") {
        return latest;
      }
      if (const auto cut = previous.rfind("\n\n"); cut != std::string::npos) {
        previous = previous.substr(cut + 2);
      }
      return previous + "\n" + latest;
    }
    std::set<std::pair<std::string, std::string>> tried;
    std::istringstream history(section(prompt, "Self-Reflections:\n", "\n\nObject Candidates:"));
    std::string line;
    while (std::getline(history, line)) {
      const auto open = line.find("sft(");
      const auto close = line.find(") -> ");
      if (open == std::string::npos || close == std::string::npos) {
        continue;
      }
      const auto args = line.substr(open + 4, close - open - 4);
      const auto first = args.find(", ");
      const auto second = args.find(", ", first + 2);
      tried.insert({args.substr(0, first), args.substr(first + 2, second - first - 2)});
    }
    const auto slots = object_candidates(prompt);
    const double lr = std::get<double>(lookup("sft_lr", slots[2][0])->payload);
    double best = -1.0;
    std::pair<std::size_t, std::size_t> pick{0, 0};
    for (std::size_t i = 0; i < slots[0].size(); ++i) {
      for (std::size_t j = 0; j < slots[1].size(); ++j) {
        if (tried.contains({slots[0][i], slots[1][j]})) {
          continue;
        }
        const auto& model = std::get<pipeforge::SimModel>(lookup("models", slots[0][i])->payload);
        const auto& data = std::get<pipeforge::SimDataset>(lookup("sft_dataset", slots[1][j])->payload);
        std::vector<int> coverage(data.coverage.begin(), data.coverage.end());
        const double value =
            score(oracle_sft(model.skills, data.targets, coverage, static_cast<double>(data.examples), lr));
        if (value > best + 1e-15) {
          best = value;
          pick = {i, j};
        }
      }
    }
    return fmt::format("Best untried training step.\nSelected Object NUMBERs: [[{}, {}, 0]]", pick.first, pick.second);
  };
}

struct StubServer::Impl {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  Reply reply;
  int failures = 0;
  mutable std::mutex mutex;
  int requests = 0;
  std::vector<nlohmann::json> bodies;
  std::vector<std::string> authorizations;
};

StubServer::StubServer(Reply reply, int failures) : impl_(std::make_unique<Impl>()) {
  impl_->reply = std::move(reply);
  impl_->failures = failures;
  impl_->server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body, nullptr, false);
    std::string prompt;
    {
      std::lock_guard lock(impl_->mutex);
      ++impl_->requests;
      impl_->bodies.push_back(body);
      impl_->authorizations.push_back(req.get_header_value("Authorization"));
      if (impl_->failures > 0) {
        --impl_->failures;
        res.status = 503;
        res.set_content("busy", "text/plain");
        return;
      }
    }
    if (!body.is_discarded() && body.contains("messages") && !body["messages"].empty()) {
      prompt = body["messages"][0].value("content", "");
    }
    nlohmann::json answer = {
        {"id", "stub"},
        {"object", "chat.completion"},
        {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", impl_->reply(prompt)}}}}}}};
    res.set_content(answer.dump(), "application/json");
  });
  impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

StubServer::~StubServer() {
  impl_->server.stop();
  if (impl_->thread.joinable()) {
    impl_->thread.join();
  }
}

std::string StubServer::url() const {
  return fmt::format("http://127.0.0.1:{}/v1/chat/completions", impl_->port);
}

int StubServer::requests() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->requests;
}

std::vector<nlohmann::json> StubServer::bodies() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->bodies;
}

std::vector<std::string> StubServer::authorizations() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->authorizations;
}

}  // namespace pftest
