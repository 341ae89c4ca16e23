#pragma once

// Composition of the full scoring pipeline: coverage -> suspiciousness ->
// change histories -> search-space reduction -> semantic filter -> scores.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "culprit/errors.hpp"
#include "culprit/git.hpp"
#include "culprit/history.hpp"
#include "culprit/model.hpp"
#include "culprit/scoring.hpp"
#include "culprit/semantic.hpp"
#include "culprit/suspiciousness.hpp"

namespace culprit {

struct PipelineConfig {
  std::string repo;            // optional when histories come from a cache
  std::string coverage_path;
  std::string end_commit = "HEAD";
  std::string external_scores; // empty = Ochiai from coverage
  bool shift_to_zero = false;
  VotingConfig voting;
  bool no_stage2 = false;
  std::string evolve_cache;    // read when present, written after mining
  int jobs = 1;
  bool keep_going = false;
};

struct PipelineResult {
  CoverageMatrix coverage;
  SuspiciousnessMap susp;
  std::set<Element> e_f;
  EvolveRelation evolve;
  std::vector<Commit> all_commits;  // full analysed range; empty without a repo
  std::map<std::string, Commit> c_f;
  FilterResult filter;
  CommitScoreTable table;
  MiningReport mining_report;
};

inline EvolveRelation mine_or_load_evolve(const PipelineConfig& cfg,
                                          const std::set<Element>& e_f,
                                          std::vector<Commit>* all_commits,
                                          MiningReport* report) {
  const bool cache_hit =
      !cfg.evolve_cache.empty() && std::filesystem::exists(cfg.evolve_cache);
  if (cache_hit) {
    EvolveRelation evolve = parse_evolve(cfg.evolve_cache);
    if (!cfg.repo.empty() && all_commits) {
      GitRepo repo(cfg.repo);
      *all_commits = repo.list_commits(cfg.end_commit);
    }
    return evolve;
  }
  if (cfg.repo.empty())
    throw ValidationError("no repository given and no change-history cache found");
  GitRepo repo(cfg.repo);
  std::vector<Element> elements(e_f.begin(), e_f.end());
  MiningRequest req =
      prepare_request(repo, cfg.end_commit, elements, cfg.jobs, cfg.keep_going, report);
  MiningResult mined = build_evolve_relation(req);
  if (report)
    report->notes.insert(report->notes.end(), mined.report.notes.begin(),
                         mined.report.notes.end());
  if (all_commits) *all_commits = std::move(mined.all_commits);
  if (!cfg.evolve_cache.empty())
    write_file(cfg.evolve_cache, serialise_evolve(mined.evolve));
  return mined.evolve;
}

inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  PipelineResult r;
  r.coverage = parse_coverage(cfg.coverage_path);
  r.e_f = failure_elements(r.coverage);
  r.susp = cfg.external_scores.empty()
               ? ochiai_scores(r.coverage)
               : load_external_scores(cfg.external_scores, cfg.shift_to_zero);

  r.evolve = mine_or_load_evolve(cfg, r.e_f, &r.all_commits, &r.mining_report);
  r.c_f = reduce_search_space(r.e_f, r.evolve);

  if (cfg.no_stage2) {
    for (const auto& [hash, c] : r.c_f) r.filter.c_bic.insert(hash);
  } else {
    if (cfg.repo.empty())
      throw ValidationError(
          "the semantic filter needs --repo to read file contents; pass --no-stage2 to skip it");
    GitRepo repo(cfg.repo);
    std::set<std::string> c_f_hashes;
    for (const auto& [hash, c] : r.c_f) c_f_hashes.insert(hash);
    r.filter = filter_commits(c_f_hashes, r.e_f, r.evolve, repo.file_reader());
  }

  std::map<std::string, Commit> c_bic_commits;
  for (const auto& hash : r.filter.c_bic) c_bic_commits.emplace(hash, r.c_f.at(hash));
  r.table = score_all(cfg.voting, r.susp, r.e_f, r.evolve, c_bic_commits);
  return r;
}

}  // namespace culprit
