#pragma once

// Thin wrapper over the system git binary. The binary can be overridden with
// the CULPRIT_GIT environment variable.

#include <algorithm>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "culprit/errors.hpp"
#include "culprit/model.hpp"
#include "culprit/semantic.hpp"
#include "culprit/subprocess.hpp"

namespace culprit {

inline std::string git_binary() {
  const char* env = std::getenv("CULPRIT_GIT");
  return env && *env ? env : "git";
}

class GitRepo {
 public:
  explicit GitRepo(std::string path) : path_(std::move(path)) {}

  const std::string& path() const { return path_; }

  ProcessResult run(std::vector<std::string> args) const {
    std::vector<std::string> argv{git_binary(), "-C", path_};
    for (auto& a : args) argv.push_back(std::move(a));
    return run_process(argv);
  }

  ProcessResult run_checked(std::vector<std::string> args, const std::string& what) const {
    ProcessResult res = run(std::move(args));
    if (!res.ok())
      throw EnvironmentError("git " + what + " failed (exit " + std::to_string(res.exit_code) +
                             "): " + res.err);
    return res;
  }

  std::string resolve_rev(const std::string& rev) const {
    ProcessResult res = run({"rev-parse", "--verify", rev + "^{commit}"});
    if (!res.ok()) throw EnvironmentError("cannot resolve revision '" + rev + "': " + res.err);
    std::string hash = res.out;
    while (!hash.empty() && (hash.back() == '\n' || hash.back() == '\r')) hash.pop_back();
    return hash;
  }

  // File content at a commit; nullopt when the path does not exist there.
  std::optional<std::string> show_file(const std::string& commit, const std::string& file) const {
    ProcessResult res = run({"show", commit + ":" + file});
    if (!res.ok()) return std::nullopt;
    return res.out;
  }

  // All commits reachable from `end`, newest first, with the canonical total
  // order: time descending, traversal position breaking ties. order_index is
  // assigned after sorting so it always agrees with that order.
  std::vector<Commit> list_commits(const std::string& end) const {
    ProcessResult res = run_checked({"log", "--format=%H %ct", end}, "log");
    std::vector<Commit> commits;
    for (const auto& line : split(res.out, '\n')) {
      if (line.empty()) continue;
      auto cols = split(line, ' ');
      if (cols.size() != 2) continue;
      auto time = parse_int(cols[1]);
      if (!time) throw EnvironmentError("git log: bad timestamp in line: " + line);
      Commit c;
      c.hash = cols[0];
      c.time = *time;
      c.order_index = static_cast<int>(commits.size());  // traversal position for now
      commits.push_back(std::move(c));
    }
    std::stable_sort(commits.begin(), commits.end(), [](const Commit& a, const Commit& b) {
      if (a.time != b.time) return a.time > b.time;
      return a.order_index < b.order_index;
    });
    for (std::size_t i = 0; i < commits.size(); ++i)
      commits[i].order_index = static_cast<int>(i);
    return commits;
  }

  // A file reader suitable for the semantic filter: AFTER reads the commit's
  // own tree, BEFORE its first parent's.
  FileReader file_reader() const {
    return [this](const std::string& commit, const std::string& file, FileSide side) {
      return show_file(side == FileSide::After ? commit : commit + "^", file);
    };
  }

 private:
  std::string path_;
};

struct Worktree {
  GitRepo* repo = nullptr;
  std::string dir;

  Worktree(GitRepo& r, const std::string& commit, const std::string& dir_path)
      : repo(&r), dir(dir_path) {
    repo->run_checked({"worktree", "add", "--detach", dir, commit}, "worktree add");
  }
  ~Worktree() {
    if (repo) repo->run({"worktree", "remove", "--force", dir});
  }
  Worktree(const Worktree&) = delete;
  Worktree& operator=(const Worktree&) = delete;
};

}  // namespace culprit
