// SPDX-License-Identifier: Apache-2.0

#include "pipeforge/shell.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstring>

#include <fmt/format.h>

#include "pipeforge/error.hpp"

namespace pipeforge {

namespace {

class Pipe {
 public:
  Pipe() {
    if (::pipe(fds_.data()) != 0) {
      throw ExecutorError(fmt::format("pipe() failed: {}", std::strerror(errno)));
    }
  }
  ~Pipe() {
    close_read();
    close_write();
  }
  Pipe(const Pipe&) = delete;
  Pipe& operator=(const Pipe&) = delete;

  int read_end() const { return fds_[0]; }
  int write_end() const { return fds_[1]; }
  void close_read() { close_fd(fds_[0]); }
  void close_write() { close_fd(fds_[1]); }

 private:
  static void close_fd(int& fd) {
    if (fd >= 0) {
      ::close(fd);
      fd = -1;
    }
  }
  std::array<int, 2> fds_{-1, -1};
};

bool drain(int fd, std::string& sink) {
  std::array<char, 4096> buffer{};
  const ssize_t n = ::read(fd, buffer.data(), buffer.size());
  if (n > 0) {
    sink.append(buffer.data(), static_cast<std::size_t>(n));
    return true;
  }
  return false;
}

}  // namespace

ShellResult run_shell(const std::string& command, std::chrono::milliseconds timeout) {
  Pipe out;
  Pipe err;
  const pid_t pid = ::fork();
  if (pid < 0) {
    throw ExecutorError(fmt::format("fork() failed: {}", std::strerror(errno)));
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(out.write_end(), STDOUT_FILENO);
    ::dup2(err.write_end(), STDERR_FILENO);
    ::close(out.read_end());
    ::close(err.read_end());
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  out.close_write();
  err.close_write();

  ShellResult result;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  bool out_open = true;
  bool err_open = true;
  while (out_open || err_open) {
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) {
      result.timed_out = true;
      break;
    }
    std::array<pollfd, 2> fds{pollfd{out_open ? out.read_end() : -1, POLLIN, 0},
                              pollfd{err_open ? err.read_end() : -1, POLLIN, 0}};
    const int ready = ::poll(fds.data(), fds.size(), static_cast<int>(remaining.count()));
    if (ready < 0 && errno != EINTR) {
      break;
    }
    if (out_open && (fds[0].revents & (POLLIN | POLLHUP)) != 0) {
      out_open = drain(out.read_end(), result.stdout_text);
    }
    if (err_open && (fds[1].revents & (POLLIN | POLLHUP)) != 0) {
      err_open = drain(err.read_end(), result.stderr_text);
    }
  }

  int status = 0;
  if (result.timed_out) {
    ::kill(-pid, SIGKILL);
    ::waitpid(pid, &status, 0);
    return result;
  }
  // Output closed; the child may still be running (e.g. it closed its fds).
  while (true) {
    const pid_t done = ::waitpid(pid, &status, WNOHANG);
    if (done == pid) {
      break;
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      result.timed_out = true;
      ::kill(-pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      return result;
    }
    ::usleep(2000);
  }
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  return result;
}

std::string shell_quote(const std::string& value) {
  std::string out = "'";
  for (char c : value) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  out += '\'';
  return out;
}

std::string render_command(const std::string& command_template,
                           const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t pos = 0;
  while (pos < command_template.size()) {
    const auto open = command_template.find('{', pos);
    if (open == std::string::npos) {
      out.append(command_template, pos);
      break;
    }
    const auto close = command_template.find('}', open);
    if (close == std::string::npos) {
      throw ExecutorError(fmt::format("unterminated placeholder in '{}'", command_template));
    }
    out.append(command_template, pos, open - pos);
    const auto name = command_template.substr(open + 1, close - open - 1);
    auto it = values.find(name);
    if (it == values.end()) {
      throw ExecutorError(fmt::format("command placeholder {{{}}} has no value", name));
    }
    out += shell_quote(it->second);
    pos = close + 1;
  }
  return out;
}

std::string shell_execute(const std::string& command_template,
                          const std::map<std::string, std::string>& values,
                          const std::filesystem::path& output, std::chrono::milliseconds timeout) {
  const auto command = render_command(command_template, values);
  const auto result = run_shell(command, timeout);
  auto log = fmt::format("$ {}\n{}{}", command, result.stdout_text, result.stderr_text);
  if (result.timed_out) {
    throw ExecutorError(fmt::format("command timed out after {} ms: {}", timeout.count(), command));
  }
  if (result.exit_code != 0) {
    throw ExecutorError(fmt::format("command exited with status {}: {}", result.exit_code,
                                    result.stderr_text));
  }
  if (!std::filesystem::exists(output)) {
    throw ExecutorError(fmt::format("command succeeded but did not create {}", output.string()));
  }
  return log;
}

}  // namespace pipeforge
