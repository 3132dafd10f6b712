// SPDX-License-Identifier: Apache-2.0

#include "pipeforge/agent.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "pipeforge/error.hpp"

namespace pipeforge {

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::TypeSelection: return "type-selection";
    case Phase::ObjectSelection: return "object-selection";
    case Phase::MemoryUpdate: return "memory-update";
  }
  return "type-selection";
}

Phase phase_from_string(std::string_view text) {
  if (text == "type-selection") return Phase::TypeSelection;
  if (text == "object-selection") return Phase::ObjectSelection;
  if (text == "memory-update") return Phase::MemoryUpdate;
  throw AgentError(fmt::format("unknown agent phase '{}'", text));
}

std::size_t AgentTrace::count(Phase phase) const {
  return static_cast<std::size_t>(
      std::count_if(calls_.begin(), calls_.end(), [&](const AgentCall& c) { return c.phase == phase; }));
}

ScriptedAgent::ScriptedAgent(std::map<Phase, std::vector<std::string>> table)
    : table_(std::move(table)) {}

ScriptedAgent::ScriptedAgent(Responder responder) : responder_(std::move(responder)) {}

std::map<Phase, std::vector<std::string>> ScriptedAgent::parse_script(std::string_view text) {
  std::map<Phase, std::vector<std::string>> table;
  std::vector<std::string>* current = nullptr;
  std::string body;
  auto flush = [&] {
    if (current != nullptr) {
      if (!body.empty() && body.back() == '\n') {
        body.pop_back();
      }
      current->push_back(body);
    }
    body.clear();
  };
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    const auto line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    if (line.starts_with("=== ")) {
      flush();
      auto name = line.substr(4);
      while (!name.empty() && (name.back() == ' ' || name.back() == '\r')) {
        name.remove_suffix(1);
      }
      current = &table[phase_from_string(name)];
      continue;
    }
    if (current == nullptr) {
      if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
        throw AgentError("agent script content appears before the first '=== <phase>' marker");
      }
      continue;
    }
    body.append(line);
    body.push_back('\n');
  }
  flush();
  return table;
}

std::unique_ptr<ScriptedAgent> ScriptedAgent::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw AgentError(fmt::format("cannot open agent script {}", path.string()));
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return std::make_unique<ScriptedAgent>(parse_script(buffer.str()));
}

std::string ScriptedAgent::complete(const AgentRequest& request, Phase phase, std::size_t iteration) {
  const std::size_t index = next_[phase];
  std::string response;
  if (responder_) {
    response = responder_(phase, index, request.prompt);
  } else {
    auto it = table_.find(phase);
    if (it == table_.end() || index >= it->second.size()) {
      throw AgentError(fmt::format("script exhausted at iteration {} ({} call #{})", iteration,
                                   to_string(phase), index + 1));
    }
    response = it->second[index];
  }
  next_[phase] = index + 1;
  return response;
}

nlohmann::json ScriptedAgent::cursor() const {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [phase, index] : next_) {
    out[std::string(to_string(phase))] = index;
  }
  return out;
}

void ScriptedAgent::restore(const nlohmann::json& cursor) {
  next_.clear();
  if (cursor.is_null()) {
    return;
  }
  for (const auto& [name, index] : cursor.items()) {
    next_[phase_from_string(name)] = index.get<std::size_t>();
  }
}

AgentGateway::AgentGateway(std::unique_ptr<AgentBackend> backend, RetryPolicy retry)
    : backend_(std::move(backend)), retry_(retry) {
  if (!backend_) {
    throw AgentError("agent gateway needs a backend");
  }
  if (retry_.max_attempts < 1) {
    retry_.max_attempts = 1;
  }
  sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

void AgentGateway::record(AgentCall call) {
  if (observer_) {
    observer_(call);
  }
  trace_.append(std::move(call));
}

std::string AgentGateway::complete(const AgentRequest& request, Phase phase, std::size_t iteration,
                                   bool retry) {
  if (request.prompt.empty()) {
    throw AgentError("agent prompt must be nonempty");
  }
  auto backoff = retry_.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    AgentCall call{iteration, phase, request, {}, {}, attempt, retry, 0.0};
    const auto start = std::chrono::steady_clock::now();
    try {
      call.response = backend_->complete(request, phase, iteration);
      call.latency_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      std::string response = call.response;
      record(std::move(call));
      return response;
    } catch (const TransportError& e) {
      call.error = e.what();
      call.latency_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      record(std::move(call));
      if (attempt >= retry_.max_attempts) {
        throw AgentError(fmt::format("agent unreachable after {} attempts at iteration {}: {}",
                                     attempt, iteration, e.what()));
      }
    } catch (const std::exception& e) {
      call.error = e.what();
      record(std::move(call));
      throw;
    }
    sleeper_(backoff);
    backoff = std::min(retry_.max_backoff,
                       std::chrono::milliseconds(static_cast<long long>(
                           static_cast<double>(backoff.count()) * retry_.multiplier)));
  }
}

}  // namespace pipeforge
