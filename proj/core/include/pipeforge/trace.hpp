// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pipeforge/memory.hpp"

namespace pipeforge {

inline constexpr int kTraceVersion = 1;

/// Append-only JSON-lines run log. Records of one step are buffered and
/// reach the file together on flush().
class TraceWriter {
 public:
  TraceWriter() = default;

  /// Starts a new file, replacing any existing one.
  static TraceWriter create(const std::filesystem::path& path);
  /// Reopens `path`, dropping everything after byte `offset`.
  static TraceWriter reopen(const std::filesystem::path& path, std::uint64_t offset);

  bool enabled() const { return !path_.empty(); }
  const std::filesystem::path& path() const { return path_; }

  void write(const nlohmann::json& record);
  void flush();
  /// Discards buffered records.
  void discard() { pending_.clear(); }
  /// Bytes on disk after the last flush.
  std::uint64_t offset() const { return offset_; }

 private:
  std::filesystem::path path_;
  std::string pending_;
  std::uint64_t offset_ = 0;
};

/// Records of a trace file grouped by their "type" field.
struct TraceSummary {
  nlohmann::json run;  // the header record
  std::vector<TrialRecord> trials;
  std::vector<MemoryState> memories;
  std::vector<nlohmann::json> agent_calls;
  std::size_t records = 0;
};

TraceSummary read_trace(const std::filesystem::path& path);

}  // namespace pipeforge
