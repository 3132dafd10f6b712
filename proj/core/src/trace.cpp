// SPDX-License-Identifier: Apache-2.0

#include "pipeforge/trace.hpp"

#include <fmt/format.h>

#include "pipeforge/error.hpp"
#include "pipeforge/json_io.hpp"

namespace pipeforge {

TraceWriter TraceWriter::create(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ConfigError(fmt::format("cannot create trace {}", path.string()));
  }
  TraceWriter writer;
  writer.path_ = path;
  return writer;
}

TraceWriter TraceWriter::reopen(const std::filesystem::path& path, std::uint64_t offset) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) {
    throw CheckpointError(fmt::format("trace {} is missing: {}", path.string(), ec.message()));
  }
  if (size < offset) {
    throw CheckpointError(fmt::format("trace {} is shorter ({} bytes) than the checkpoint offset {}",
                                      path.string(), size, offset));
  }
  std::filesystem::resize_file(path, offset);
  TraceWriter writer;
  writer.path_ = path;
  writer.offset_ = offset;
  return writer;
}

void TraceWriter::write(const nlohmann::json& record) {
  if (!enabled()) {
    return;
  }
  pending_ += record.dump();
  pending_ += '\n';
}

void TraceWriter::flush() {
  if (!enabled() || pending_.empty()) {
    return;
  }
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  out.write(pending_.data(), static_cast<std::streamsize>(pending_.size()));
  if (!out) {
    throw ConfigError(fmt::format("cannot append to trace {}", path_.string()));
  }
  offset_ += pending_.size();
  pending_.clear();
}

TraceSummary read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError(fmt::format("cannot open trace {}", path.string()));
  }
  TraceSummary out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) {
      continue;
    }
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
      const auto type = record.at("type").get<std::string>();
      if (type == "run") {
        out.run = record;
      } else if (type == "trial") {
        out.trials.push_back(trial_from_json(record));
      } else if (type == "memory") {
        out.memories.push_back(memory_from_json(record));
      } else if (type == "agent_call") {
        out.agent_calls.push_back(record);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(fmt::format("{}:{}: malformed trace record: {}", path.string(), number, e.what()));
    }
    ++out.records;
  }
  return out;
}

}  // namespace pipeforge
