#pragma once

// Evaluation harness: ranking metrics, the uniform-rank random baseline,
// standard-vs-weighted bisection comparison, and a deterministic scenario
// generator that can materialise real git fixture repositories with known
// ground truth.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "culprit/bisection.hpp"
#include "culprit/errors.hpp"
#include "culprit/git.hpp"
#include "culprit/model.hpp"
#include "culprit/scoring.hpp"
#include "culprit/suspiciousness.hpp"
#include "culprit/util.hpp"

namespace culprit {

// ---------------------------------------------------------------------------
// Metrics

inline double mrr(const std::vector<int>& ranks) {
  if (ranks.empty()) throw ValidationError("mrr: empty rank list");
  double total = 0.0;
  for (int r : ranks) {
    if (r < 1) throw ValidationError("mrr: ranks must be >= 1");
    total += 1.0 / r;
  }
  return total / static_cast<double>(ranks.size());
}

// Percentage of ranks within the top n.
inline double acc_at_n(const std::vector<int>& ranks, int n) {
  if (n < 1) throw ValidationError("acc_at_n: n must be >= 1");
  if (ranks.empty()) return 0.0;
  std::size_t hits = 0;
  for (int r : ranks)
    if (r <= n) ++hits;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(ranks.size());
}

// Expected rank of the target under a uniformly random ordering of `size`
// candidates.
inline double random_expected_rank(int size) {
  if (size < 1) throw ValidationError("random baseline: search space size must be >= 1");
  return (1.0 + size) / 2.0;
}

struct RandomBaseline {
  double mrr = 0.0;
  std::map<int, double> acc;  // n -> percentage
};

inline RandomBaseline random_baseline(const std::vector<int>& search_space_sizes,
                                      const std::vector<int>& ns = {1, 2, 3, 5, 10}) {
  if (search_space_sizes.empty()) throw ValidationError("random baseline: no search spaces");
  RandomBaseline out;
  for (int size : search_space_sizes) out.mrr += 1.0 / random_expected_rank(size);
  out.mrr /= static_cast<double>(search_space_sizes.size());
  for (int n : ns) {
    double acc = 0.0;
    for (int size : search_space_sizes) acc += std::min(1.0, static_cast<double>(n) / size);
    out.acc[n] = 100.0 * acc / static_cast<double>(search_space_sizes.size());
  }
  return out;
}

// Ranks file: bug_id <TAB> rank <TAB> search_space_size
struct RankRecord {
  std::string bug_id;
  int rank;
  int search_space_size;
};

inline std::vector<RankRecord> parse_ranks_text(const std::string& text) {
  std::vector<RankRecord> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto cols = split(line, '\t');
    if (cols.size() != 3)
      throw ValidationError("ranks: line " + std::to_string(lineno) + ": want 3 columns");
    auto rank = parse_int(cols[1]);
    auto size = parse_int(cols[2]);
    if (!rank || *rank < 1)
      throw ValidationError("ranks: line " + std::to_string(lineno) + ": bad rank");
    if (!size || *size < 1)
      throw ValidationError("ranks: line " + std::to_string(lineno) + ": bad search space size");
    out.push_back({cols[0], static_cast<int>(*rank), static_cast<int>(*size)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Standard vs weighted bisection on one subject

struct SimulationInput {
  std::string bug_id;
  std::vector<Commit> all_commits;        // newest first
  std::map<std::string, double> scores;   // hash -> score (missing means 0)
  std::string bic_hash;
};

struct SimulationOutcome {
  std::string bug_id;
  std::size_t n_total = 0;
  std::size_t n_candidates = 0;
  bool bic_found = false;       // BIC carries a positive score
  std::size_t std_full = 0;     // standard bisection over the full history
  std::size_t std_reduced = 0;  // standard bisection over the positive-score subset
  std::size_t weighted = 0;     // weighted bisection over the positive-score subset
  long long saved_full = 0;
  long long saved_reduced = 0;
};

namespace detail {

inline std::size_t run_simulated(std::vector<Commit> candidates, std::vector<double> weights,
                                 std::size_t bic_index) {
  BisectionSession s = session_from_weights(std::move(candidates), std::move(weights));
  return run(s, simulated_oracle(bic_index)).iterations;
}

}  // namespace detail

inline SimulationOutcome compare_bisection(const SimulationInput& input) {
  SimulationOutcome out;
  out.bug_id = input.bug_id;
  out.n_total = input.all_commits.size();

  std::optional<std::size_t> bic_full;
  for (std::size_t i = 0; i < input.all_commits.size(); ++i)
    if (input.all_commits[i].hash == input.bic_hash) bic_full = i;
  if (!bic_full) throw ValidationError("simulation: BIC not present in commit list");

  std::vector<Commit> candidates;
  std::vector<double> weights;
  std::optional<std::size_t> bic_reduced;
  for (const auto& c : input.all_commits) {
    auto it = input.scores.find(c.hash);
    const double w = it == input.scores.end() ? 0.0 : it->second;
    if (w > 0.0) {
      if (c.hash == input.bic_hash) bic_reduced = candidates.size();
      candidates.push_back(c);
      weights.push_back(w);
    }
  }
  out.n_candidates = candidates.size();

  out.std_full = detail::run_simulated(input.all_commits,
                                       std::vector<double>(input.all_commits.size(), 1.0),
                                       *bic_full);
  if (!bic_reduced) return out;  // weighted search cannot find a zero-scored BIC
  out.bic_found = true;
  out.std_reduced = detail::run_simulated(candidates,
                                          std::vector<double>(candidates.size(), 1.0),
                                          *bic_reduced);
  out.weighted = detail::run_simulated(candidates, weights, *bic_reduced);
  out.saved_full = static_cast<long long>(out.std_full) - static_cast<long long>(out.weighted);
  out.saved_reduced =
      static_cast<long long>(out.std_reduced) - static_cast<long long>(out.weighted);
  return out;
}

// Scenario JSON: {"bug_id":str,"bic":hash,"commits":[{"hash":str,"time":int,"score":num}]}
inline SimulationInput parse_simulation_input_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& err) {
    throw ValidationError(std::string("scenario: JSON parse error: ") + err.what());
  }
  if (!doc.is_object() || !doc.contains("commits") || !doc["commits"].is_array() ||
      !doc.contains("bic") || !doc["bic"].is_string())
    throw ValidationError("scenario: want object with \"bic\" and \"commits\"");
  SimulationInput input;
  input.bug_id = doc.value("bug_id", "scenario");
  input.bic_hash = doc["bic"].get<std::string>();
  for (const auto& jc : doc["commits"]) {
    if (!jc.is_object() || !jc.contains("hash") || !jc["hash"].is_string() ||
        !jc.contains("time") || !jc["time"].is_number())
      throw ValidationError("scenario: malformed commit entry");
    Commit c;
    c.hash = jc["hash"].get<std::string>();
    c.time = jc["time"].get<std::int64_t>();
    c.order_index = static_cast<int>(input.all_commits.size());
    input.all_commits.push_back(c);
    input.scores[c.hash] = jc.value("score", 0.0);
  }
  std::stable_sort(input.all_commits.begin(), input.all_commits.end(),
                   [](const Commit& a, const Commit& b) {
                     if (a.time != b.time) return a.time > b.time;
                     return a.order_index < b.order_index;
                   });
  for (std::size_t i = 0; i < input.all_commits.size(); ++i)
    input.all_commits[i].order_index = static_cast<int>(i);
  return input;
}

inline std::string serialise_simulation_input(const SimulationInput& input) {
  nlohmann::json doc;
  doc["bug_id"] = input.bug_id;
  doc["bic"] = input.bic_hash;
  doc["commits"] = nlohmann::json::array();
  for (const auto& c : input.all_commits) {
    doc["commits"].push_back(
        {{"hash", c.hash}, {"time", c.time}, {"score", input.scores.count(c.hash) ? input.scores.at(c.hash) : 0.0}});
  }
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Scenario generator

struct ScenarioParams {
  int commits = 30;           // total, including the initial file-creating commit
  int files = 3;
  int methods_per_file = 4;
  double edit_density = 0.25; // chance an intermediate commit edits a given method
  int infected_methods = 2;   // methods whose statements the failing test covers
  int bic_position = -1;      // schedule position (0 = oldest); -1 = deterministic choice
  bool comment_only_commit = true;
  std::uint64_t seed = 0;
};

// One planned commit. `edits` maps method id -> new constant value; the
// comment-only commit bumps a comment counter instead.
struct PlannedCommit {
  int position = 0;  // 0 = oldest
  std::set<int> edited_methods;
  bool creates_files = false;
  bool comment_only = false;
  bool is_bic = false;
};

struct Scenario {
  std::string bug_id;
  ScenarioParams params;
  std::vector<PlannedCommit> schedule;  // oldest first
  std::vector<Element> method_elements; // per method id, at the final snapshot
  CoverageMatrix coverage;
  EvolveRelation evolve;                // ground truth with synthetic commit ids
  std::vector<Commit> all_commits;      // synthetic ids, newest first
  std::set<std::string> expected_c_f;
  std::set<std::string> expected_c_sp;
  std::set<std::string> expected_c_bic;
  std::string bic_hash;                 // synthetic id of the seeded BIC
  int bic_position = 0;
  int comment_position = -1;

  int method_count() const { return params.files * params.methods_per_file; }
};

namespace detail {

inline std::string scenario_file_name(int f) { return "src/mod" + std::to_string(f) + ".c"; }

// Lines are 1-based. Each method occupies a fixed 6-line slot so single-line
// edits keep every position stable across history.
inline int method_decl_line(int slot) { return 3 + slot * 6; }
inline int method_stmt_line(int slot) { return method_decl_line(slot) + 1; }
inline int method_comment_line(int slot) { return method_decl_line(slot) + 2; }
inline int method_close_line(int slot) { return method_decl_line(slot) + 3 + 1; }

inline std::string render_scenario_file(int f, int methods_per_file,
                                        const std::vector<int>& edit_counter,
                                        const std::vector<int>& comment_counter) {
  std::ostringstream out;
  out << "// module " << f << "\n\n";
  for (int s = 0; s < methods_per_file; ++s) {
    const int m = f * methods_per_file + s;
    out << "int method_" << f << "_" << s << "(int input) {\n";
    out << "  int acc = input + " << edit_counter[m] << ";\n";
    out << "  // note " << comment_counter[m] << "\n";
    out << "  return acc * 2;\n";
    out << "}\n\n";
  }
  return out.str();
}

inline std::string synthetic_hash(int position) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%04d", position);
  return buf;
}

constexpr std::int64_t kScenarioEpoch = 1600000000;  // fixed base so repos are reproducible

inline std::int64_t scenario_time(int position) { return kScenarioEpoch + 86400LL * position; }

}  // namespace detail

inline Scenario generate_scenario(const ScenarioParams& params) {
  if (params.commits < 3) throw ValidationError("scenario: need at least 3 commits");
  if (params.files < 1 || params.methods_per_file < 1)
    throw ValidationError("scenario: need at least one file and one method");
  const int methods = params.files * params.methods_per_file;
  if (params.infected_methods < 1 || params.infected_methods > methods)
    throw ValidationError("scenario: infected method count out of range");
  if (!(params.edit_density > 0.0 && params.edit_density <= 1.0))
    throw ValidationError("scenario: edit density must be in (0,1]");

  std::mt19937_64 rng(params.seed);
  Scenario sc;
  sc.params = params;
  sc.bug_id = "scenario-" + std::to_string(params.seed);

  // infected methods: a deterministic random sample
  std::set<int> infected;
  while (static_cast<int>(infected.size()) < params.infected_methods)
    infected.insert(static_cast<int>(uniform_below(rng, methods)));

  // BIC somewhere in the middle; the comment-only commit comes after it
  int bic = params.bic_position;
  const int last = params.commits - 1;
  if (bic < 0) bic = 1 + static_cast<int>(uniform_below(rng, std::max(1, last - 1)));
  if (bic < 1 || bic > last) throw ValidationError("scenario: BIC position out of range");
  int comment_pos = -1;
  if (params.comment_only_commit) {
    if (bic >= last) throw ValidationError("scenario: no room for the comment-only commit");
    comment_pos = bic + 1 + static_cast<int>(uniform_below(rng, last - bic));
  }

  sc.bic_position = bic;
  sc.comment_position = comment_pos;

  for (int p = 0; p < params.commits; ++p) {
    PlannedCommit c;
    c.position = p;
    if (p == 0) {
      c.creates_files = true;
      for (int m = 0; m < methods; ++m) c.edited_methods.insert(m);
    } else if (p == bic) {
      c.is_bic = true;
      c.edited_methods = infected;
    } else if (p == comment_pos) {
      c.comment_only = true;
      c.edited_methods.insert(*infected.begin());
    } else {
      for (int m = 0; m < methods; ++m) {
        // after the BIC, infected methods are left alone so the BIC stays
        // their most recent semantic editor
        if (p > bic && infected.count(m)) continue;
        if (uniform_unit(rng) < params.edit_density) c.edited_methods.insert(m);
      }
      if (c.edited_methods.empty()) {
        // force one deterministic edit so every commit touches something
        for (int m = 0; m < methods; ++m) {
          if (p > bic && infected.count(m)) continue;
          c.edited_methods.insert(m);
          break;
        }
      }
    }
    sc.schedule.push_back(std::move(c));
  }

  // synthetic commit ids, newest first
  for (int p = params.commits - 1; p >= 0; --p) {
    Commit c;
    c.hash = detail::synthetic_hash(p);
    c.time = detail::scenario_time(p);
    c.order_index = params.commits - 1 - p;
    sc.all_commits.push_back(c);
  }

  // elements and ground-truth histories
  auto commit_at = [&](int position) { return sc.all_commits[params.commits - 1 - position]; };
  for (int m = 0; m < methods; ++m) {
    const int f = m / params.methods_per_file;
    const int slot = m % params.methods_per_file;
    Element e{detail::scenario_file_name(f), detail::method_stmt_line(slot),
              LineRange{detail::method_decl_line(slot), detail::method_close_line(slot)}};
    sc.method_elements.push_back(e);
    std::vector<Commit> hist;
    for (const auto& c : sc.schedule)
      if (c.edited_methods.count(m)) hist.push_back(commit_at(c.position));
    sort_newest_first(hist);
    sc.evolve.history[e] = std::move(hist);
  }

  // coverage: the failing test covers infected methods; one passing test per
  // file covers that file's methods
  TestCase failing{"FailingTest::reproducesBug", Outcome::Fail};
  sc.coverage.tests.push_back(failing);
  std::vector<std::uint32_t> frow;
  std::map<Element, std::uint32_t> index;
  auto element_idx = [&](const Element& e) {
    auto it = index.find(e);
    if (it != index.end()) return it->second;
    sc.coverage.elements.push_back(e);
    auto id = static_cast<std::uint32_t>(sc.coverage.elements.size() - 1);
    index.emplace(e, id);
    return id;
  };
  for (int m : infected) frow.push_back(element_idx(sc.method_elements[m]));
  std::sort(frow.begin(), frow.end());
  sc.coverage.covered.push_back(frow);
  for (int f = 0; f < params.files; ++f) {
    TestCase passing{"Mod" + std::to_string(f) + "Test::exercisesModule", Outcome::Pass};
    std::vector<std::uint32_t> row;
    for (int s = 0; s < params.methods_per_file; ++s)
      row.push_back(element_idx(sc.method_elements[f * params.methods_per_file + s]));
    std::sort(row.begin(), row.end());
    sc.coverage.tests.push_back(passing);
    sc.coverage.covered.push_back(row);
  }

  // expected stage outputs
  for (int m : infected) {
    const Element& e = sc.method_elements[m];
    for (const auto& c : sc.evolve.history[e]) sc.expected_c_f.insert(c.hash);
  }
  if (comment_pos >= 0) sc.expected_c_sp.insert(detail::synthetic_hash(comment_pos));
  sc.expected_c_bic = sc.expected_c_f;
  for (const auto& h : sc.expected_c_sp) sc.expected_c_bic.erase(h);
  sc.bic_hash = detail::synthetic_hash(bic);
  return sc;
}

struct MaterialisedScenario {
  std::string repo_path;
  std::vector<std::string> hash_by_position;  // real git hashes, oldest first
  std::string end_commit;

  std::string real_hash(const std::string& synthetic) const {
    auto pos = parse_int(std::string_view(synthetic).substr(1));
    if (!pos || *pos < 0 || *pos >= static_cast<std::int64_t>(hash_by_position.size()))
      throw ValidationError("unknown synthetic commit id: " + synthetic);
    return hash_by_position[static_cast<std::size_t>(*pos)];
  }
};

// Replays the schedule as real commits. Fixed author, message, and timestamps
// make the resulting history byte-identical for a given scenario.
inline MaterialisedScenario materialise_scenario(const Scenario& sc, const std::string& dir) {
  MaterialisedScenario mat;
  mat.repo_path = dir;

  auto git = [&](std::vector<std::string> args,
                 const std::vector<std::pair<std::string, std::string>>& env = {}) {
    std::vector<std::string> argv{git_binary(), "-C", dir};
    for (auto& a : args) argv.push_back(std::move(a));
    ProcessResult res = run_process(argv, "", env);
    if (!res.ok())
      throw EnvironmentError("scenario git " + args[0] + " failed: " + res.err);
    return res;
  };

  ProcessResult init = run_process({git_binary(), "init", "-q", "-b", "main", dir});
  if (!init.ok()) throw EnvironmentError("scenario git init failed: " + init.err);
  git({"config", "user.name", "fixture"});
  git({"config", "user.email", "fixture@example.com"});

  const int methods = sc.method_count();
  std::vector<int> edit_counter(methods, 0);
  std::vector<int> comment_counter(methods, 0);

  std::error_code ec;
  std::filesystem::create_directories(dir + "/src", ec);
  if (ec) throw EnvironmentError("scenario mkdir failed: " + ec.message());

  for (const auto& plan : sc.schedule) {
    for (int m : plan.edited_methods) {
      if (plan.comment_only)
        ++comment_counter[m];
      else if (!plan.creates_files)
        ++edit_counter[m];
    }
    for (int f = 0; f < sc.params.files; ++f)
      write_file(dir + "/" + detail::scenario_file_name(f),
                 detail::render_scenario_file(f, sc.params.methods_per_file, edit_counter,
                                              comment_counter));
    git({"add", "-A"});
    std::string msg = plan.creates_files ? "add modules"
                      : plan.comment_only ? "tidy comments"
                                          : "update methods";
    msg += " (" + std::to_string(plan.position) + ")";
    const std::string date = std::to_string(detail::scenario_time(plan.position)) + " +0000";
    // --allow-empty keeps degenerate schedules (nothing left to edit) valid
    git({"commit", "-q", "--allow-empty", "-m", msg},
        {{"GIT_AUTHOR_DATE", date}, {"GIT_COMMITTER_DATE", date}});
    ProcessResult head = git({"rev-parse", "HEAD"});
    std::string hash = head.out;
    while (!hash.empty() && (hash.back() == '\n' || hash.back() == '\r')) hash.pop_back();
    mat.hash_by_position.push_back(hash);
  }
  mat.end_commit = mat.hash_by_position.back();
  return mat;
}

}  // namespace culprit
