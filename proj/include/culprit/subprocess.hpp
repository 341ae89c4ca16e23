#pragma once

// Minimal POSIX subprocess runner: argv-style exec, separate stdout/stderr
// capture, optional working directory. No shell unless the caller asks for
// one explicitly.

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "culprit/errors.hpp"

namespace culprit {

struct ProcessResult {
  int exit_code = -1;
  std::string out;
  std::string err;

  bool ok() const { return exit_code == 0; }
};

inline ProcessResult run_process(const std::vector<std::string>& argv,
                                 const std::string& workdir = "",
                                 const std::vector<std::pair<std::string, std::string>>& env = {}) {
  if (argv.empty()) throw EnvironmentError("run_process: empty argv");

  int out_pipe[2], err_pipe[2];
  if (pipe(out_pipe) != 0 || pipe(err_pipe) != 0)
    throw EnvironmentError(std::string("pipe failed: ") + std::strerror(errno));

  const pid_t pid = fork();
  if (pid < 0) throw EnvironmentError(std::string("fork failed: ") + std::strerror(errno));

  if (pid == 0) {
    // child
    dup2(out_pipe[1], STDOUT_FILENO);
    dup2(err_pipe[1], STDERR_FILENO);
    close(out_pipe[0]);
    close(out_pipe[1]);
    close(err_pipe[0]);
    close(err_pipe[1]);
    if (!workdir.empty() && chdir(workdir.c_str()) != 0) _exit(127);
    for (const auto& [k, v] : env) setenv(k.c_str(), v.c_str(), 1);
    std::vector<char*> args;
    args.reserve(argv.size() + 1);
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    execvp(args[0], args.data());
    _exit(127);
  }

  close(out_pipe[1]);
  close(err_pipe[1]);

  ProcessResult res;
  struct pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
  bool open_fd[2] = {true, true};
  char buf[4096];
  while (open_fd[0] || open_fd[1]) {
    if (poll(fds, 2, -1) < 0) {
      if (errno == EINTR) continue;
      break;
    }
    for (int k = 0; k < 2; ++k) {
      if (!open_fd[k]) continue;
      if (fds[k].revents & (POLLIN | POLLHUP)) {
        const ssize_t n = read(fds[k].fd, buf, sizeof(buf));
        if (n > 0) {
          (k == 0 ? res.out : res.err).append(buf, static_cast<std::size_t>(n));
        } else if (n == 0 || (n < 0 && errno != EINTR)) {
          open_fd[k] = false;
          fds[k].fd = -1;
        }
      } else if (fds[k].revents & (POLLERR | POLLNVAL)) {
        open_fd[k] = false;
        fds[k].fd = -1;
      }
    }
  }
  close(out_pipe[0]);
  close(err_pipe[0]);

  int status = 0;
  if (waitpid(pid, &status, 0) < 0)
    throw EnvironmentError(std::string("waitpid failed: ") + std::strerror(errno));
  if (WIFEXITED(status))
    res.exit_code = WEXITSTATUS(status);
  else if (WIFSIGNALED(status))
    res.exit_code = 128 + WTERMSIG(status);
  return res;
}

// Runs a user command line through the shell, in the given directory.
inline ProcessResult run_shell(const std::string& command, const std::string& workdir = "") {
  return run_process({"/bin/sh", "-c", command}, workdir);
}

}  // namespace culprit
