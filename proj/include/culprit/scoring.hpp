#pragma once

// Commit scoring: reduce the search space to failure-relevant commits, then
// convert element suspiciousness into commit scores through rank-based voting
// power and depth-based decay. Also provides the max-aggregation baseline.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "culprit/errors.hpp"
#include "culprit/model.hpp"
#include "culprit/suspiciousness.hpp"

namespace culprit {

enum class Tau { Max, Dense };
enum class VoteMode { Rank, Raw };

struct VotingConfig {
  int alpha = 0;               // {0,1}: use raw suspiciousness in the numerator or not
  Tau tau = Tau::Max;          // tie-breaking scheme for ranks
  double lambda = 0.1;         // decay per unit of historical depth, in [0,1)
  VoteMode vote = VoteMode::Rank;  // Raw bypasses ranking entirely (ablation)
};

inline void validate(const VotingConfig& c) {
  if (c.alpha != 0 && c.alpha != 1) throw ValidationError("alpha must be 0 or 1");
  if (!(c.lambda >= 0.0 && c.lambda < 1.0)) throw ValidationError("lambda must be in [0,1)");
}

struct CommitScore {
  double score = 0.0;
  int rank = 0;  // 1-based, worst rank shared within a tied group
};

struct CommitScoreTable {
  std::map<std::string, CommitScore> entries;  // hash -> score/rank, search-space members only
  std::set<std::string> in_search_space;       // C_BIC
  std::map<std::string, Commit> commits;       // metadata for every scored commit

  // The piecewise scoring function: 0 for anything outside the search space.
  double score_of(const std::string& hash) const {
    auto it = entries.find(hash);
    return it == entries.end() ? 0.0 : it->second.score;
  }
};

// Stage 1: commits involved in the evolution of at least one failing-covered
// element. Keyed by hash, metadata carried along.
inline std::map<std::string, Commit> reduce_search_space(const std::set<Element>& failure_elems,
                                                         const EvolveRelation& evolve) {
  std::map<std::string, Commit> c_f;
  for (const auto& e : failure_elems) {
    const auto* hist = evolve.find(e);
    if (!hist) continue;
    for (const auto& c : *hist) c_f.emplace(c.hash, c);
  }
  return c_f;
}

// Ranks by descending score. Max gives every tied element the worst rank of
// its group; Dense gives the best and skips none afterwards.
inline std::map<Element, int> rank_elements(const std::map<Element, double>& scores, Tau tau) {
  std::vector<double> values;
  values.reserve(scores.size());
  for (const auto& [e, s] : scores) values.push_back(s);
  std::sort(values.begin(), values.end(), std::greater<>());

  std::map<Element, int> ranks;
  for (const auto& [e, s] : scores) {
    if (tau == Tau::Max) {
      // elements scoring >= s, ties included
      auto it = std::upper_bound(values.begin(), values.end(), s, std::greater<>());
      ranks[e] = static_cast<int>(it - values.begin());
    } else {
      int distinct_above = 0;
      double prev = std::numeric_limits<double>::infinity();
      for (double v : values) {
        if (v <= s) break;
        if (v != prev) ++distinct_above;
        prev = v;
      }
      ranks[e] = distinct_above + 1;
    }
  }
  return ranks;
}

// Voting power of one element under the given configuration.
inline double vote(const Element& e, const std::map<Element, double>& susp,
                   const std::map<Element, int>& ranks, const VotingConfig& cfg) {
  const double s = susp.at(e);
  if (cfg.vote == VoteMode::Raw) return s;
  const double numerator = cfg.alpha * s + (1 - cfg.alpha) * 1.0;
  return numerator / ranks.at(e);
}

// Number of search-space commits newer than `commit` in the element's history.
inline int depth(const Element& e, const Commit& commit, const std::set<std::string>& c_bic,
                 const EvolveRelation& evolve) {
  const auto* hist = evolve.find(e);
  if (!hist) return 0;
  int d = 0;
  for (const auto& other : *hist) {
    if (other.hash == commit.hash) continue;
    if (c_bic.count(other.hash) && is_newer(other, commit)) ++d;
  }
  return d;
}

namespace detail {

// susp restricted to the failing-covered elements; ranks are computed over
// exactly this set.
inline std::map<Element, double> restrict_scores(const SuspiciousnessMap& susp,
                                                 const std::set<Element>& failure_elems) {
  std::map<Element, double> out;
  for (const auto& e : failure_elems) out[e] = susp.score_of(e);
  return out;
}

}  // namespace detail

// Score of one commit: sum over the failing-covered elements it evolved of
// vote(e) * (1-lambda)^depth(e, c). Elements iterate in sorted order so the
// floating-point sum is reproducible.
inline double commit_score(const Commit& commit, const VotingConfig& cfg,
                           const std::map<Element, double>& restricted_susp,
                           const std::map<Element, int>& ranks, const EvolveRelation& evolve,
                           const std::set<std::string>& c_bic) {
  double total = 0.0;
  for (const auto& [e, s] : restricted_susp) {
    const auto* hist = evolve.find(e);
    if (!hist) continue;
    bool evolved = false;
    for (const auto& c : *hist) {
      if (c.hash == commit.hash) {
        evolved = true;
        break;
      }
    }
    if (!evolved) continue;
    const double v = vote(e, restricted_susp, ranks, cfg);
    total += v * std::pow(1.0 - cfg.lambda, depth(e, commit, c_bic, evolve));
  }
  return total;
}

// Max-aggregation baseline: a commit scores the highest suspiciousness among
// the failing-covered elements it altered.
inline double max_aggregation(const Commit& commit, const SuspiciousnessMap& susp,
                              const std::set<Element>& failure_elems,
                              const EvolveRelation& evolve) {
  double best = 0.0;
  for (const auto& e : failure_elems) {
    const auto* hist = evolve.find(e);
    if (!hist) continue;
    for (const auto& c : *hist) {
      if (c.hash == commit.hash) {
        best = std::max(best, susp.score_of(e));
        break;
      }
    }
  }
  return best;
}

namespace detail {

inline void assign_ranks(CommitScoreTable& table) {
  std::vector<double> values;
  values.reserve(table.entries.size());
  for (const auto& [h, e] : table.entries) values.push_back(e.score);
  std::sort(values.begin(), values.end(), std::greater<>());
  for (auto& [h, e] : table.entries) {
    auto it = std::upper_bound(values.begin(), values.end(), e.score, std::greater<>());
    e.rank = static_cast<int>(it - values.begin());  // max tiebreaker
  }
}

}  // namespace detail

// Full stage-3 scoring over the reduced search space.
inline CommitScoreTable score_all(const VotingConfig& cfg, const SuspiciousnessMap& susp,
                                  const std::set<Element>& failure_elems,
                                  const EvolveRelation& evolve,
                                  const std::map<std::string, Commit>& c_bic_commits) {
  validate(cfg);
  CommitScoreTable table;
  for (const auto& [hash, c] : c_bic_commits) {
    table.in_search_space.insert(hash);
    table.commits.emplace(hash, c);
  }
  const auto restricted = detail::restrict_scores(susp, failure_elems);
  const auto ranks = rank_elements(restricted, cfg.tau);
  for (const auto& [hash, c] : c_bic_commits)
    table.entries[hash] =
        CommitScore{commit_score(c, cfg, restricted, ranks, evolve, table.in_search_space), 0};
  detail::assign_ranks(table);
  return table;
}

// Rows ordered by rank (score desc), hash as the deterministic tiebreak.
inline std::vector<std::string> ranked_hashes(const CommitScoreTable& table) {
  std::vector<std::string> hashes;
  hashes.reserve(table.entries.size());
  for (const auto& [h, e] : table.entries) hashes.push_back(h);
  std::sort(hashes.begin(), hashes.end(), [&](const std::string& a, const std::string& b) {
    const auto& ea = table.entries.at(a);
    const auto& eb = table.entries.at(b);
    if (ea.score != eb.score) return ea.score > eb.score;
    return a < b;
  });
  return hashes;
}

inline std::string serialise_scores(const CommitScoreTable& table) {
  std::ostringstream out;
  for (const auto& hash : ranked_hashes(table)) {
    const auto& e = table.entries.at(hash);
    out << e.rank << '\t' << hash << '\t' << fmt_double(e.score, 9) << "\n";
  }
  return out.str();
}

}  // namespace culprit
