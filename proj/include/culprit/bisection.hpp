#pragma once

// Weighted bisection: binary search over a newest-first commit array whose
// pivot balances the remaining score mass instead of the commit count.
// Constant weights degrade to textbook binary search.

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "culprit/errors.hpp"
#include "culprit/model.hpp"
#include "culprit/scoring.hpp"
#include "culprit/util.hpp"

namespace culprit {

enum class Verdict { Bad, Good };  // Bad = the bug is detected at the pivot snapshot

struct BisectionStep {
  std::size_t pivot;
  Verdict verdict;
};

struct BisectionSession {
  std::vector<Commit> candidates;  // newest first; candidates[i] newer than candidates[j] iff i<j
  std::vector<double> weights;     // parallel to candidates, all > 0
  std::size_t bad = 0;
  std::size_t good = 0;  // virtual index one past the oldest candidate
  std::optional<std::size_t> pivot;
  std::vector<BisectionStep> log;

  bool finished() const { return bad + 1 >= good; }
  const Commit& result() const { return candidates[bad]; }
};

// Builds a session from scored commits. `all_commits` must be sorted newest
// first; only positive-score commits become candidates, preserving order.
inline BisectionSession new_session(const CommitScoreTable& table,
                                    const std::vector<Commit>& all_commits) {
  BisectionSession s;
  for (const auto& c : all_commits) {
    const double w = table.score_of(c.hash);
    if (w > 0.0) {
      s.candidates.push_back(c);
      s.weights.push_back(w);
    }
  }
  if (s.candidates.empty())
    throw ValidationError(
        "no commit has a positive score; run a standard bisection over the full history instead");
  s.bad = 0;
  s.good = s.candidates.size();
  return s;
}

inline BisectionSession session_from_weights(std::vector<Commit> candidates,
                                             std::vector<double> weights) {
  BisectionSession s;
  s.candidates = std::move(candidates);
  s.weights = std::move(weights);
  s.bad = 0;
  s.good = s.candidates.size();
  for (double w : s.weights)
    if (!(w > 0.0)) throw ValidationError("bisection weights must be positive");
  if (s.candidates.empty()) throw ValidationError("bisection needs at least one candidate");
  return s;
}

// The pivot in [bad+1, good-1] minimising |left-sum - right-sum|, where the
// left sum covers [bad, p-1] and the right sum covers [p, good-1]. Ties go to
// the smallest index, i.e. the more recent split.
inline std::size_t select_pivot(const BisectionSession& s) {
  if (s.finished()) throw ValidationError("bisection already finished; no pivot to select");
  double left = s.weights[s.bad];
  double right = 0.0;
  for (std::size_t i = s.bad + 1; i < s.good; ++i) right += s.weights[i];

  std::size_t best = s.bad + 1;
  double best_diff = std::abs(left - right);
  for (std::size_t p = s.bad + 2; p < s.good; ++p) {
    left += s.weights[p - 1];
    right -= s.weights[p - 1];
    const double diff = std::abs(left - right);
    if (diff < best_diff) {
      best_diff = diff;
      best = p;
    }
  }
  return best;
}

inline void step(BisectionSession& s, Verdict verdict) {
  if (!s.pivot) throw ValidationError("no pivot selected");
  if (s.finished()) throw ValidationError("bisection already finished");
  const std::size_t p = *s.pivot;
  if (verdict == Verdict::Bad)
    s.bad = p;
  else
    s.good = p;
  s.log.push_back(BisectionStep{p, verdict});
  s.pivot.reset();
}

struct BisectionResult {
  Commit bic;
  std::size_t iterations = 0;
};

// Oracle: given the candidate index under inspection, report whether the bug
// is present in that snapshot. Called once per iteration.
using BisectionOracle = std::function<Verdict(std::size_t index, const Commit& commit)>;

inline BisectionResult run(BisectionSession& s, const BisectionOracle& oracle) {
  std::size_t iterations = 0;
  while (!s.finished()) {
    s.pivot = select_pivot(s);
    const Verdict v = oracle(*s.pivot, s.candidates[*s.pivot]);
    ++iterations;
    step(s, v);
  }
  return BisectionResult{s.result(), iterations};
}

// A perfect oracle for simulations: snapshots at or newer than the true BIC
// exhibit the bug.
inline BisectionOracle simulated_oracle(std::size_t bic_index) {
  return [bic_index](std::size_t index, const Commit&) {
    return index <= bic_index ? Verdict::Bad : Verdict::Good;
  };
}

// ---------------------------------------------------------------------------
// Session log: pivot_index <TAB> commit_hash <TAB> verdict, append-only.

inline std::string format_log_entry(const BisectionSession& s, const BisectionStep& e) {
  std::ostringstream out;
  out << e.pivot << '\t' << s.candidates[e.pivot].hash << '\t'
      << (e.verdict == Verdict::Bad ? "bad" : "good") << '\n';
  return out.str();
}

// Replays a persisted log against a fresh session. Pivots are recomputed and
// must agree with the logged ones; a mismatch means the scores or the commit
// list changed since the log was written.
inline void replay_log(BisectionSession& s, const std::string& log_text) {
  std::istringstream in(log_text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto cols = split(line, '\t');
    if (cols.size() != 3)
      throw ValidationError("bisect log: line " + std::to_string(lineno) + ": want 3 columns");
    auto pivot = parse_int(cols[0]);
    if (!pivot || *pivot < 0)
      throw ValidationError("bisect log: line " + std::to_string(lineno) + ": bad pivot index");
    Verdict v;
    if (cols[2] == "bad")
      v = Verdict::Bad;
    else if (cols[2] == "good")
      v = Verdict::Good;
    else
      throw ValidationError("bisect log: line " + std::to_string(lineno) + ": bad verdict \"" +
                            cols[2] + "\"");
    const std::size_t expect = select_pivot(s);
    if (expect != static_cast<std::size_t>(*pivot) ||
        s.candidates[expect].hash != cols[1])
      throw ValidationError("bisect log: line " + std::to_string(lineno) +
                            " does not match the session (scores or commits changed?)");
    s.pivot = expect;
    step(s, v);
  }
}

}  // namespace culprit
