#pragma once

// Builds the per-element change history from a live git repository: resolve
// each statement's enclosing method span, then trace that span through
// history with `git log -C -M -L`.

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "culprit/errors.hpp"
#include "culprit/git.hpp"
#include "culprit/lexer.hpp"
#include "culprit/model.hpp"

namespace culprit {

struct MethodRange {
  int start = 1;
  int end = 1;
  bool whole_file = false;
  bool warning = false;  // set when unbalanced braces forced the fallback
};

namespace detail {

inline bool is_control_keyword(const std::string& s) {
  return s == "if" || s == "for" || s == "while" || s == "switch" || s == "catch" ||
         s == "synchronized" || s == "return" || s == "do" || s == "else" || s == "new";
}

// A '{' opens a method body when, walking back, we find ')' separated only by
// harmless tokens (const, noexcept, throws lists, trailing annotations), and
// the identifier in front of the matching '(' is a plain name: not a control
// keyword, and not preceded by `new` (anonymous classes).
inline bool brace_opens_method(const std::vector<Token>& toks, std::size_t brace_pos) {
  std::size_t i = brace_pos;
  // skip back over throws lists, const/noexcept/override, trailing returns
  while (i > 0) {
    const Token& t = toks[i - 1];
    if (t.kind == TokenKind::Identifier || t.is(",") || t.is(".") || t.is("@") || t.is("->")) {
      --i;
      continue;
    }
    break;
  }
  if (i == 0 || !toks[i - 1].is(")")) return false;
  // match back to the opening parenthesis
  int depth = 0;
  std::size_t j = i - 1;
  while (true) {
    const Token& t = toks[j];
    if (t.is(")")) ++depth;
    if (t.is("(")) {
      --depth;
      if (depth == 0) break;
    }
    if (j == 0) return false;
    --j;
  }
  if (j == 0) return false;
  const Token& name = toks[j - 1];
  if (name.kind != TokenKind::Identifier || is_control_keyword(name.text)) return false;
  if (j >= 2 && toks[j - 2].kind == TokenKind::Identifier && toks[j - 2].text == "new")
    return false;
  return true;
}

struct MethodSpan {
  int start;  // line of the method name
  int end;    // line of the closing brace
};

}  // namespace detail

// The smallest method span containing `line`; whole file when none does, with
// the warning flag set when braces were unbalanced or the file did not lex.
inline MethodRange resolve_enclosing_range(const std::string& source_text, int line) {
  LexResult lexed = lex_c_family(source_text);
  // whole-file fallbacks must not reach past the real end of file, or
  // `git log -L` rejects the range
  const int last_line = std::max(count_lines(source_text), line);
  if (!lexed.ok) return MethodRange{1, last_line, true, true};

  struct Open {
    std::size_t token;
    bool method;
    int name_line;
  };
  std::vector<Open> stack;
  std::vector<detail::MethodSpan> spans;
  bool unbalanced = false;

  const auto& toks = lexed.tokens;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const Token& t = toks[i];
    if (t.is("{")) {
      bool method = detail::brace_opens_method(toks, i);
      int name_line = t.line;
      if (method) {
        // range starts at the method name so signature edits count
        std::size_t j = i;
        int depth = 0;
        while (j > 0) {
          const Token& u = toks[j - 1];
          if (u.is(")")) ++depth;
          if (u.is("(")) {
            --depth;
            if (depth == 0) {
              if (j >= 2) name_line = toks[j - 2].line;
              break;
            }
          }
          --j;
        }
      }
      stack.push_back({i, method, name_line});
    } else if (t.is("}")) {
      if (stack.empty()) {
        unbalanced = true;
        continue;
      }
      Open open = stack.back();
      stack.pop_back();
      if (open.method) spans.push_back({open.name_line, t.line});
    }
  }
  if (!stack.empty()) unbalanced = true;
  if (unbalanced) return MethodRange{1, last_line, true, true};

  const detail::MethodSpan* best = nullptr;
  for (const auto& s : spans) {
    if (s.start <= line && line <= s.end) {
      if (!best || (s.end - s.start) < (best->end - best->start)) best = &s;
    }
  }
  if (!best) return MethodRange{1, last_line, true, false};
  return MethodRange{best->start, best->end, false, false};
}

struct MiningRequest {
  std::string repo_path;
  std::string end_commit;  // the buggy snapshot; resolved hash
  std::vector<Element> elements;  // enclosing ranges resolved
  int jobs = 1;
  bool keep_going = false;
};

struct MiningNote {
  Element element;
  std::string message;
};

struct MiningReport {
  std::vector<MiningNote> notes;
};

// Resolves enclosing ranges for raw (file, line) elements against the tree at
// end_commit. Missing files raise unless keep_going is set.
inline MiningRequest prepare_request(const GitRepo& repo, const std::string& end_rev,
                                     const std::vector<Element>& raw_elements, int jobs = 1,
                                     bool keep_going = false, MiningReport* report = nullptr) {
  MiningRequest req;
  req.repo_path = repo.path();
  req.end_commit = repo.resolve_rev(end_rev);
  req.jobs = jobs;
  req.keep_going = keep_going;

  std::map<std::string, std::optional<std::string>> file_cache;
  for (const Element& raw : raw_elements) {
    auto it = file_cache.find(raw.file);
    if (it == file_cache.end())
      it = file_cache.emplace(raw.file, repo.show_file(req.end_commit, raw.file)).first;
    if (!it->second) {
      if (!keep_going)
        throw ValidationError("element file not found at end commit: " + raw.file);
      if (report) report->notes.push_back({raw, "file not found at end commit"});
      continue;
    }
    Element e = raw;
    MethodRange r = resolve_enclosing_range(*it->second, e.line);
    if (r.warning && report)
      report->notes.push_back({raw, "unbalanced braces; using whole-file range"});
    e.enclosing = LineRange{r.start, r.end};
    req.elements.push_back(std::move(e));
  }
  return req;
}

namespace detail {

struct TraceOutcome {
  std::vector<std::string> hashes;  // newest first, as printed by git
  std::string note;                 // non-empty when the trace stopped early
  bool failed = false;
  std::string error;
};

// git log -C -M -s -L<start>,<end>:<file> <end_commit>, commit hashes parsed
// from \x01-marked format lines. A nonzero exit with partial output means the
// range disappeared mid-history; we keep what was traced.
inline TraceOutcome trace_range(const GitRepo& repo, const std::string& end_commit,
                                const std::string& file, int start, int end) {
  TraceOutcome out;
  ProcessResult res =
      repo.run({"log", "-C", "-M", "-s", "--format=\x01%H %ct",
                "-L" + std::to_string(start) + "," + std::to_string(end) + ":" + file,
                end_commit});
  for (const auto& line : split(res.out, '\n')) {
    if (line.empty() || line[0] != '\x01') continue;
    auto cols = split(line.substr(1), ' ');
    if (!cols.empty() && !cols[0].empty()) out.hashes.push_back(cols[0]);
  }
  if (!res.ok()) {
    if (!out.hashes.empty()) {
      out.note = "history trace stopped early: " + res.err;
    } else if (res.err.find("no match") != std::string::npos ||
               res.err.find("does not exist") != std::string::npos ||
               res.err.find("cannot find file") != std::string::npos) {
      out.note = "file absent in history";
    } else {
      out.failed = true;
      out.error = res.err.empty() ? ("git log -L exited " + std::to_string(res.exit_code))
                                  : res.err;
    }
  }
  return out;
}

}  // namespace detail

// History of one element's enclosing range, newest first, as canonical
// commits (time + order_index from the end_commit enumeration).
inline std::vector<Commit> mine_element_history(const MiningRequest& request, const Element& e,
                                                const std::map<std::string, Commit>& by_hash) {
  if (!e.enclosing) throw ValidationError("mine_element_history: enclosing range not resolved");
  GitRepo repo(request.repo_path);
  auto outcome =
      detail::trace_range(repo, request.end_commit, e.file, e.enclosing->start, e.enclosing->end);
  if (outcome.failed) throw EnvironmentError("git log -L for " + to_string(e) + ": " + outcome.error);
  std::vector<Commit> commits;
  for (const auto& h : outcome.hashes) {
    auto it = by_hash.find(h);
    if (it != by_hash.end()) commits.push_back(it->second);
  }
  sort_newest_first(commits);
  return commits;
}

struct MiningResult {
  EvolveRelation evolve;
  MiningReport report;
  std::vector<Commit> all_commits;  // the full analysed range, newest first
};

// Mines all elements, deduplicating identical ranges and fanning out over a
// bounded worker pool. The merge happens in sorted element order, so the
// result is independent of scheduling.
inline MiningResult build_evolve_relation(const MiningRequest& request) {
  GitRepo repo(request.repo_path);
  MiningResult result;
  result.all_commits = repo.list_commits(request.end_commit);
  std::map<std::string, Commit> by_hash;
  for (const auto& c : result.all_commits) by_hash.emplace(c.hash, c);

  struct Task {
    std::string file;
    int start, end;
    detail::TraceOutcome outcome;
  };
  std::map<std::pair<std::string, std::pair<int, int>>, std::size_t> task_index;
  std::vector<Task> tasks;
  for (const Element& e : request.elements) {
    if (!e.enclosing) throw ValidationError("build_evolve_relation: unresolved element " + to_string(e));
    auto key = std::make_pair(e.file, std::make_pair(e.enclosing->start, e.enclosing->end));
    if (!task_index.count(key)) {
      task_index[key] = tasks.size();
      tasks.push_back(Task{e.file, e.enclosing->start, e.enclosing->end, {}});
    }
  }

  const int jobs = std::max(1, request.jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    GitRepo local(request.repo_path);
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) break;
      tasks[i].outcome =
          detail::trace_range(local, request.end_commit, tasks[i].file, tasks[i].start,
                              tasks[i].end);
    }
  };
  if (jobs == 1 || tasks.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const int n = std::min<std::size_t>(jobs, tasks.size());
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // deterministic merge: elements in sorted order, outcomes by range key
  for (const Element& e : request.elements) {
    auto key = std::make_pair(e.file, std::make_pair(e.enclosing->start, e.enclosing->end));
    const Task& task = tasks[task_index.at(key)];
    const auto& outcome = task.outcome;
    if (outcome.failed) {
      if (!request.keep_going)
        throw EnvironmentError("git log -L for " + to_string(e) + ": " + outcome.error);
      result.report.notes.push_back({e, "mining failed: " + outcome.error});
      result.evolve.history[e] = {};
      continue;
    }
    if (!outcome.note.empty()) result.report.notes.push_back({e, outcome.note});
    std::vector<Commit> commits;
    for (const auto& h : outcome.hashes) {
      auto it = by_hash.find(h);
      if (it != by_hash.end()) commits.push_back(it->second);
    }
    sort_newest_first(commits);
    result.evolve.history[e] = std::move(commits);
  }
  return result;
}

}  // namespace culprit
