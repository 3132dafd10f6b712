// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>

namespace pipeforge {

struct ShellResult {
  int exit_code = -1;
  bool timed_out = false;
  std::string stdout_text;
  std::string stderr_text;
};

/// Runs `command` through /bin/sh in its own process group, capturing both
/// output streams. On timeout the whole group is killed.
ShellResult run_shell(const std::string& command, std::chrono::milliseconds timeout);

/// POSIX single-quote escaping.
std::string shell_quote(const std::string& value);

/// Replaces every {name} in `command_template` with the shell-quoted value.
/// Unknown placeholders throw ExecutorError.
std::string render_command(const std::string& command_template,
                           const std::map<std::string, std::string>& values);

/// Runs a rendered template and requires exit 0 plus an existing `output`.
/// Returns the captured log; failures throw ExecutorError carrying stderr.
std::string shell_execute(const std::string& command_template,
                          const std::map<std::string, std::string>& values,
                          const std::filesystem::path& output, std::chrono::milliseconds timeout);

}  // namespace pipeforge
