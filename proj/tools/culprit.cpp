// culprit: find the commit that introduced an observed test failure.
//
// Subcommands: mine, reduce, score, bisect, eval, simulate. All machine
// output is TSV on stdout (or --out); human summaries go to stderr.
// Exit codes: 0 success, 1 validation error, 2 environment error.

#include <unistd.h>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "culprit/bisection.hpp"
#include "culprit/evaluation.hpp"
#include "culprit/git.hpp"
#include "culprit/history.hpp"
#include "culprit/model.hpp"
#include "culprit/pipeline.hpp"
#include "culprit/scoring.hpp"
#include "culprit/suspiciousness.hpp"
#include "culprit/util.hpp"

namespace {

using namespace culprit;

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty() || out_path == "-")
    std::cout << content;
  else
    write_file(out_path, content);
}

void print_mining_notes(const MiningReport& report) {
  for (const auto& note : report.notes)
    std::cerr << "note: " << to_string(note.element) << ": " << note.message << "\n";
}

// ---------------------------------------------------------------------------

struct ScoreFlags {
  std::string fl = "ochiai";
  bool shift_to_zero = false;
  int alpha = 0;
  std::string tau = "max";
  double lambda = 0.1;
  std::string vote = "rank";
};

VotingConfig to_voting_config(const ScoreFlags& f) {
  VotingConfig cfg;
  cfg.alpha = f.alpha;
  if (f.tau == "max")
    cfg.tau = Tau::Max;
  else if (f.tau == "dense")
    cfg.tau = Tau::Dense;
  else
    throw ValidationError("--tau must be max or dense");
  cfg.lambda = f.lambda;
  if (f.vote == "rank")
    cfg.vote = VoteMode::Rank;
  else if (f.vote == "raw")
    cfg.vote = VoteMode::Raw;
  else
    throw ValidationError("--vote must be rank or raw");
  validate(cfg);
  return cfg;
}

void apply_fl_flag(PipelineConfig& cfg, const std::string& fl, bool shift_to_zero) {
  if (fl == "ochiai") {
    cfg.external_scores.clear();
  } else if (fl.rfind("external:", 0) == 0) {
    cfg.external_scores = fl.substr(9);
    if (cfg.external_scores.empty())
      throw ValidationError("--fl external: needs a score file path");
  } else {
    throw ValidationError("--fl must be ochiai or external:<path>");
  }
  cfg.shift_to_zero = shift_to_zero;
}

int cmd_mine(const PipelineConfig& cfg, const std::string& out_path) {
  if (cfg.repo.empty()) throw ValidationError("mine needs --repo");
  CoverageMatrix coverage = parse_coverage(cfg.coverage_path);
  std::set<Element> e_f = failure_elements(coverage);
  GitRepo repo(cfg.repo);
  MiningReport report;
  std::vector<Element> elements(e_f.begin(), e_f.end());
  MiningRequest req =
      prepare_request(repo, cfg.end_commit, elements, cfg.jobs, cfg.keep_going, &report);
  MiningResult mined = build_evolve_relation(req);
  report.notes.insert(report.notes.end(), mined.report.notes.begin(), mined.report.notes.end());
  emit(out_path.empty() ? cfg.evolve_cache : out_path, serialise_evolve(mined.evolve));
  print_mining_notes(report);
  std::cerr << "mined " << mined.evolve.history.size() << " elements over "
            << mined.all_commits.size() << " commits\n";
  return 0;
}

int cmd_reduce(const PipelineConfig& cfg, const std::string& out_path) {
  if (cfg.repo.empty()) throw ValidationError("reduce needs --repo");
  PipelineResult r = run_pipeline(cfg);

  std::ostringstream out;
  const std::size_t total = r.all_commits.size();
  out << "count_total\t" << total << "\n";
  out << "count_stage1\t" << r.c_f.size() << "\n";
  out << "count_semantic_preserving\t" << r.filter.c_sp.size() << "\n";
  out << "count_stage2\t" << r.filter.c_bic.size() << "\n";
  if (total > 0) {
    out << "ratio_stage1\t" << fmt_double(double(r.c_f.size()) / double(total)) << "\n";
    out << "ratio_stage2\t" << fmt_double(double(r.filter.c_bic.size()) / double(total)) << "\n";
  }
  for (const auto& [hash, c] : r.c_f) out << "C_F\t" << hash << "\n";
  for (const auto& hash : r.filter.c_sp) out << "C_SP\t" << hash << "\n";
  for (const auto& hash : r.filter.c_bic) out << "C_BIC\t" << hash << "\n";
  emit(out_path, out.str());

  print_mining_notes(r.mining_report);
  std::cerr << "search space: " << total << " -> " << r.c_f.size() << " -> "
            << r.filter.c_bic.size() << " commits\n";
  return 0;
}

int cmd_score(const PipelineConfig& cfg, const std::string& out_path) {
  PipelineResult r = run_pipeline(cfg);
  emit(out_path, serialise_scores(r.table));
  print_mining_notes(r.mining_report);
  std::cerr << "scored " << r.table.entries.size() << " candidate commits\n";
  return 0;
}

// ---------------------------------------------------------------------------
// bisect

struct BisectFlags {
  std::string scores_path;
  std::string repo;
  std::string end_commit = "HEAD";
  std::string run_cmd;
  bool interactive = false;
  long long oracle_index = -1;
  std::string resume;
  std::string log_path = "bisect.log";
};

struct ScoredRow {
  std::string hash;
  double score;
};

std::vector<ScoredRow> parse_scores_file(const std::string& path) {
  std::vector<ScoredRow> rows;
  std::istringstream in(read_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto cols = split(line, '\t');
    if (cols.size() != 3)
      throw ValidationError("scores: line " + std::to_string(lineno) + ": want 3 columns");
    auto score = parse_double(cols[2]);
    if (!score || *score < 0)
      throw ValidationError("scores: line " + std::to_string(lineno) + ": bad score");
    rows.push_back({cols[1], *score});
  }
  if (rows.empty()) throw ValidationError("scores: empty file");
  return rows;
}

Verdict ask_interactively(const Commit& commit) {
  while (true) {
    std::cerr << "inspect commit " << commit.hash << " -- good/bad/skip? ";
    std::string answer;
    if (!std::getline(std::cin, answer))
      throw EnvironmentError("interactive input closed; resume later with --resume");
    if (answer == "good" || answer == "g") return Verdict::Good;
    if (answer == "bad" || answer == "b") return Verdict::Bad;
    if (answer == "skip" || answer == "s") {
      std::cerr << "skip is not supported: flaky-failure handling is out of scope. "
                   "Re-run the check and answer good or bad.\n";
      continue;
    }
    std::cerr << "please answer good or bad\n";
  }
}

int cmd_bisect(const BisectFlags& flags) {
  const int modes = int(!flags.run_cmd.empty()) + int(flags.interactive) +
                    int(flags.oracle_index >= 0);
  if (modes != 1)
    throw ValidationError("bisect needs exactly one of --run, --interactive, --oracle-index");
  if (!flags.run_cmd.empty() && flags.repo.empty())
    throw ValidationError("--run needs --repo to check out pivot commits");

  std::vector<ScoredRow> rows = parse_scores_file(flags.scores_path);
  std::map<std::string, double> score_by_hash;
  for (const auto& r : rows) {
    if (!score_by_hash.emplace(r.hash, r.score).second)
      throw ValidationError("scores: duplicate commit " + r.hash);
  }

  // Candidate chronology: from the repository when available, otherwise the
  // file order is trusted to be newest-first.
  std::vector<Commit> ordered;
  if (!flags.repo.empty()) {
    GitRepo repo(flags.repo);
    for (const auto& c : repo.list_commits(flags.end_commit))
      if (score_by_hash.count(c.hash)) ordered.push_back(c);
    if (ordered.size() != rows.size())
      throw ValidationError("scores name commits that are not reachable from " +
                            flags.end_commit);
  } else {
    for (std::size_t i = 0; i < rows.size(); ++i)
      ordered.push_back(Commit{rows[i].hash, 0, static_cast<int>(i)});
  }

  CommitScoreTable table;
  for (const auto& [hash, score] : score_by_hash) {
    table.entries[hash] = CommitScore{score, 0};
    table.in_search_space.insert(hash);
  }
  BisectionSession session = new_session(table, ordered);
  std::cerr << session.candidates.size() << " candidates with positive scores\n";

  std::string log_path = flags.log_path;
  if (!flags.resume.empty()) {
    log_path = flags.resume;
    replay_log(session, read_file(flags.resume));
    std::cerr << "resumed " << session.log.size() << " recorded verdicts\n";
  } else if (std::filesystem::exists(log_path)) {
    throw ValidationError("log file " + log_path +
                          " already exists; pass --resume " + log_path +
                          " to continue or remove it");
  }

  GitRepo repo(flags.repo);
  std::size_t iterations = session.log.size();
  while (!session.finished()) {
    session.pivot = select_pivot(session);
    const Commit& commit = session.candidates[*session.pivot];
    Verdict v;
    if (flags.oracle_index >= 0) {
      v = *session.pivot <= static_cast<std::size_t>(flags.oracle_index) ? Verdict::Bad
                                                                         : Verdict::Good;
    } else if (flags.interactive) {
      v = ask_interactively(commit);
    } else {
      const std::string wt =
          (std::filesystem::temp_directory_path() /
           ("culprit-wt-" + std::to_string(getpid())))
              .string();
      Worktree tree(repo, commit.hash, wt);
      ProcessResult res = run_shell(flags.run_cmd, wt);
      v = res.ok() ? Verdict::Good : Verdict::Bad;
      std::cerr << "ran check at " << commit.hash << ": exit " << res.exit_code << " ("
                << (v == Verdict::Good ? "good" : "bad") << ")\n";
    }
    step(session, v);
    ++iterations;
    std::ofstream log(log_path, std::ios::app);
    log << format_log_entry(session, session.log.back());
  }

  std::ostringstream out;
  out << "bic\t" << session.result().hash << "\n";
  out << "iterations\t" << iterations << "\n";
  std::cout << out.str();
  std::cerr << "culprit: " << session.result().hash << " after " << iterations
            << " inspections\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval / simulate

int cmd_eval(const std::string& ranks_path, const std::string& out_path) {
  std::vector<RankRecord> records = parse_ranks_text(read_file(ranks_path));
  if (records.empty()) throw ValidationError("ranks: empty file");
  std::vector<int> ranks, sizes;
  for (const auto& r : records) {
    ranks.push_back(r.rank);
    sizes.push_back(r.search_space_size);
  }
  const std::vector<int> ns = {1, 2, 3, 5, 10};
  RandomBaseline baseline = random_baseline(sizes, ns);

  std::ostringstream out;
  out << "metric\tobserved\trandom_baseline\n";
  out << "mrr\t" << fmt_double(mrr(ranks), 4) << '\t' << fmt_double(baseline.mrr, 4) << "\n";
  for (int n : ns)
    out << "acc@" << n << '\t' << fmt_double(acc_at_n(ranks, n), 1) << '\t'
        << fmt_double(baseline.acc.at(n), 1) << "\n";
  emit(out_path, out.str());
  return 0;
}

SimulationInput scenario_to_simulation(const Scenario& sc) {
  SimulationInput input;
  input.bug_id = sc.bug_id;
  input.bic_hash = sc.bic_hash;
  input.all_commits = sc.all_commits;
  SuspiciousnessMap susp = ochiai_scores(sc.coverage);
  std::set<Element> e_f = failure_elements(sc.coverage);
  std::map<std::string, Commit> c_bic;
  for (const auto& c : sc.all_commits)
    if (sc.expected_c_bic.count(c.hash)) c_bic.emplace(c.hash, c);
  CommitScoreTable table = score_all(VotingConfig{}, susp, e_f, sc.evolve, c_bic);
  for (const auto& [hash, entry] : table.entries) input.scores[hash] = entry.score;
  return input;
}

int cmd_simulate(const std::string& dir, const std::string& out_path, int generate,
                 std::uint64_t seed) {
  namespace fs = std::filesystem;
  if (generate > 0) {
    fs::create_directories(dir);
    for (int i = 0; i < generate; ++i) {
      ScenarioParams params;
      params.seed = seed + static_cast<std::uint64_t>(i);
      Scenario sc = generate_scenario(params);
      SimulationInput input = scenario_to_simulation(sc);
      char name[32];
      std::snprintf(name, sizeof(name), "scenario-%04d.json", i);
      write_file((fs::path(dir) / name).string(), serialise_simulation_input(input));
    }
  }
  if (!fs::is_directory(dir))
    throw ValidationError("scenario directory does not exist: " + dir);

  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationError("no scenario .json files in " + dir);

  std::ostringstream out;
  out << "bug_id\tn_total\tn_candidates\tstd_full\tstd_reduced\tweighted\tsaved_full\t"
         "saved_reduced\tbic_found\n";
  long long total_saved = 0;
  std::size_t found = 0;
  for (const auto& f : files) {
    SimulationInput input = parse_simulation_input_text(read_file(f));
    SimulationOutcome o = compare_bisection(input);
    out << o.bug_id << '\t' << o.n_total << '\t' << o.n_candidates << '\t' << o.std_full << '\t'
        << o.std_reduced << '\t' << o.weighted << '\t' << o.saved_full << '\t' << o.saved_reduced
        << '\t' << (o.bic_found ? 1 : 0) << "\n";
    if (o.bic_found) {
      total_saved += o.saved_full;
      ++found;
    }
  }
  emit(out_path, out.str());
  std::cerr << "simulated " << files.size() << " scenarios";
  if (found > 0)
    std::cerr << "; mean saving vs full-history search: "
              << fmt_double(double(total_saved) / double(found), 2) << " iterations";
  std::cerr << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"culprit: locate the commit that introduced a test failure"};
  app.require_subcommand(1);

  PipelineConfig cfg;
  ScoreFlags score_flags;
  std::string out_path;

  auto add_pipeline_flags = [&](CLI::App* cmd, bool with_stage2) {
    cmd->add_option("--repo", cfg.repo, "path to the git repository");
    cmd->add_option("--coverage", cfg.coverage_path, "coverage JSON file")->required();
    cmd->add_option("--end-commit", cfg.end_commit, "buggy snapshot revision (default HEAD)");
    cmd->add_option("--jobs", cfg.jobs, "parallel history-mining processes");
    cmd->add_flag("--keep-going", cfg.keep_going,
                  "mine past per-element failures, reporting them instead");
    cmd->add_option("--evolve-cache", cfg.evolve_cache,
                    "change-history TSV: read when present, written after mining");
    if (with_stage2)
      cmd->add_flag("--no-stage2", cfg.no_stage2, "skip the semantic-preserving commit filter");
    cmd->add_option("--out", out_path, "output file (default stdout)");
  };

  CLI::App* mine = app.add_subcommand("mine", "build the per-statement change history TSV");
  add_pipeline_flags(mine, false);

  CLI::App* reduce = app.add_subcommand("reduce", "narrow the candidate commit search space");
  add_pipeline_flags(reduce, true);

  CLI::App* score = app.add_subcommand("score", "rank candidate commits by failure relevance");
  add_pipeline_flags(score, true);
  score->add_option("--fl", score_flags.fl, "fault localisation: ochiai or external:<path>");
  score->add_flag("--shift-to-zero", score_flags.shift_to_zero,
                  "shift external scores so the minimum is 0");
  score->add_option("--alpha", score_flags.alpha, "0: uniform numerator, 1: raw score numerator")
      ->check(CLI::IsMember({0, 1}));
  score->add_option("--tau", score_flags.tau, "rank tie-breaking: max or dense");
  score->add_option("--lambda", score_flags.lambda, "decay factor in [0,1)");
  score->add_option("--vote", score_flags.vote, "voting power: rank or raw");

  BisectFlags bf;
  CLI::App* bisect = app.add_subcommand("bisect", "weighted bisection over scored commits");
  bisect->add_option("--scores", bf.scores_path, "scores TSV from `culprit score`")->required();
  bisect->add_option("--repo", bf.repo, "repository for chronology and checkouts");
  bisect->add_option("--end-commit", bf.end_commit, "buggy snapshot revision (default HEAD)");
  bisect->add_option("--run", bf.run_cmd, "command run at each pivot; exit 0 = good");
  bisect->add_flag("--interactive", bf.interactive, "ask good/bad on the terminal");
  bisect->add_option("--oracle-index", bf.oracle_index,
                     "simulate with the true BIC at this candidate index");
  bisect->add_option("--resume", bf.resume, "continue from a session log");
  bisect->add_option("--log", bf.log_path, "session log path (default bisect.log)");

  std::string ranks_path;
  CLI::App* eval = app.add_subcommand("eval", "ranking metrics for recorded BIC ranks");
  eval->add_option("--ranks", ranks_path, "TSV: bug_id, rank, search_space_size")->required();
  eval->add_option("--out", out_path, "output file (default stdout)");

  std::string scenario_dir;
  int generate = 0;
  std::uint64_t seed = 0;
  CLI::App* simulate =
      app.add_subcommand("simulate", "standard vs weighted bisection on scenario files");
  simulate->add_option("--scenarios", scenario_dir, "directory of scenario .json files")
      ->required();
  simulate->add_option("--out", out_path, "output TSV")->required();
  simulate->add_option("--generate", generate, "generate this many scenarios first");
  simulate->add_option("--seed", seed, "seed for scenario generation (default 0)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (mine->parsed()) return cmd_mine(cfg, out_path);
    if (reduce->parsed()) return cmd_reduce(cfg, out_path);
    if (score->parsed()) {
      cfg.voting = to_voting_config(score_flags);
      apply_fl_flag(cfg, score_flags.fl, score_flags.shift_to_zero);
      return cmd_score(cfg, out_path);
    }
    if (bisect->parsed()) return cmd_bisect(bf);
    if (eval->parsed()) return cmd_eval(ranks_path, out_path);
    if (simulate->parsed()) return cmd_simulate(scenario_dir, out_path, generate, seed);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const EnvironmentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
