// Acceptance suite: every release-gating property in one binary, one
// pass/fail line per criterion. Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "culprit/bisection.hpp"
#include "culprit/evaluation.hpp"
#include "culprit/model.hpp"
#include "culprit/scoring.hpp"
#include "culprit/semantic.hpp"
#include "culprit/subprocess.hpp"
#include "culprit/suspiciousness.hpp"
#include "culprit/util.hpp"
#include "support/generators.hpp"
#include "support/git_fixture.hpp"
#include "support/oracles.hpp"

using namespace culprit;

namespace {

struct Check {
  std::string name;
  std::function<bool(std::string&)> fn;
  double time_limit_s = 0.0;  // 0 = no limit
};

bool expect(bool cond, std::string& detail, const std::string& message) {
  if (!cond && detail.empty()) detail = message;
  return cond;
}

// --------------------------------------------------------------------------
// 1. voting table exactness

bool check_voting_table(std::string& detail) {
  std::map<Element, double> scores;
  const std::vector<double> raw = {1.0, 0.6, 0.6, 0.6, 0.3};
  for (int i = 0; i < 5; ++i) scores[{"e.c", i + 1, std::nullopt}] = raw[i];

  auto ranks_max = rank_elements(scores, Tau::Max);
  auto ranks_dense = rank_elements(scores, Tau::Dense);
  const std::vector<int> want_max = {1, 4, 4, 4, 5};
  const std::vector<int> want_dense = {1, 2, 2, 2, 3};
  int i = 0;
  for (const auto& [e, s] : scores) {
    if (!expect(ranks_max.at(e) == want_max[i], detail, "max rank mismatch")) return false;
    if (!expect(ranks_dense.at(e) == want_dense[i], detail, "dense rank mismatch")) return false;
    ++i;
  }

  struct Row {
    int alpha;
    Tau tau;
    std::vector<double> want;
  };
  const std::vector<Row> rows = {
      {0, Tau::Max, {1.00, 0.25, 0.25, 0.25, 0.20}},
      {1, Tau::Max, {1.00, 0.15, 0.15, 0.15, 0.06}},
      {0, Tau::Dense, {1.00, 0.50, 0.50, 0.50, 0.33}},
      {1, Tau::Dense, {1.00, 0.30, 0.30, 0.30, 0.10}},
  };
  for (const auto& row : rows) {
    VotingConfig cfg;
    cfg.alpha = row.alpha;
    cfg.tau = row.tau;
    auto ranks = rank_elements(scores, row.tau);
    int k = 0;
    for (const auto& [e, s] : scores) {
      const double v = vote(e, scores, ranks, cfg);
      if (!expect(std::abs(v - row.want[k]) <= 0.005, detail,
                  "vote " + fmt_double(v, 4) + " vs printed " + fmt_double(row.want[k], 2)))
        return false;
      ++k;
    }
  }
  return true;
}

// --------------------------------------------------------------------------
// 2. scoring model equals the brute-force recomputation

bool check_scoring_oracle(std::string& detail) {
  std::mt19937_64 rng(2024);
  for (int iter = 0; iter < 1000; ++iter) {
    oracle::Instance in = testgen::random_instance(rng, 20, 30);
    testgen::LibraryInstance lib = testgen::to_library(in);
    for (int alpha : {0, 1}) {
      for (bool max_tau : {true, false}) {
        for (double lambda : {0.0, 0.1, 0.2, 0.3}) {
          VotingConfig cfg;
          cfg.alpha = alpha;
          cfg.tau = max_tau ? Tau::Max : Tau::Dense;
          cfg.lambda = lambda;
          CommitScoreTable table = score_all(cfg, lib.susp, lib.e_f, lib.evolve, lib.c_bic);
          for (int c = 0; c < in.n_commits; ++c) {
            const double got = table.score_of(lib.commits[c].hash);
            const double want =
                in.in_search_space[c]
                    ? oracle::commit_score_of(in, c, alpha, max_tau, false, lambda)
                    : 0.0;
            const double tol = std::max(std::abs(want), 1.0) * 1e-12;
            if (!expect(std::abs(got - want) <= tol, detail,
                        "instance " + std::to_string(iter) + " commit " + std::to_string(c) +
                            ": got " + fmt_double(got, 15) + " want " + fmt_double(want, 15)))
              return false;
          }
        }
      }
    }
  }
  return true;
}

// --------------------------------------------------------------------------
// 3. order preservation of the voting power

bool check_order_preservation(std::string& detail) {
  for (int alpha : {0, 1}) {
    for (Tau tau : {Tau::Max, Tau::Dense}) {
      std::mt19937_64 rng(777);
      VotingConfig cfg;
      cfg.alpha = alpha;
      cfg.tau = tau;
      long long pairs = 0;
      while (pairs < 10000) {
        std::map<Element, double> scores;
        const int n = testgen::rand_int(rng, 2, 10);
        for (int i = 0; i < n; ++i)
          scores[{"p.c", i + 1, std::nullopt}] =
              rng() % 3 == 0 ? 0.25 : testgen::rand_unit(rng);
        auto ranks = rank_elements(scores, tau);
        for (const auto& [ea, sa] : scores) {
          for (const auto& [eb, sb] : scores) {
            if (ea == eb) continue;
            const double va = vote(ea, scores, ranks, cfg);
            const double vb = vote(eb, scores, ranks, cfg);
            if (!expect((va > vb) == (sa > sb), detail,
                        "order violated: susp " + fmt_double(sa, 6) + "," + fmt_double(sb, 6)))
              return false;
            ++pairs;
          }
        }
      }
    }
  }
  return true;
}

// --------------------------------------------------------------------------
// 4. weighted bisection always finds the culprit

std::vector<Commit> synthetic_commits(std::size_t n) {
  std::vector<Commit> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(
        Commit{"c" + std::to_string(i), 100000 - static_cast<std::int64_t>(i), static_cast<int>(i)});
  return out;
}

bool check_bisection_fuzz(std::string& detail) {
  std::mt19937_64 rng(4242);
  for (int n = 2; n <= 64; ++n) {
    for (int rep = 0; rep < 100; ++rep) {
      std::vector<double> w(n);
      for (auto& x : w) x = 0.001 + testgen::rand_unit(rng) * 10.0;
      for (int bic = 0; bic < n; ++bic) {
        BisectionSession s = session_from_weights(synthetic_commits(n), w);
        BisectionResult res = run(s, simulated_oracle(bic));
        if (!expect(res.bic.hash == "c" + std::to_string(bic), detail,
                    "n=" + std::to_string(n) + " bic=" + std::to_string(bic) + ": got " +
                        res.bic.hash))
          return false;
      }
    }
  }
  return true;
}

// --------------------------------------------------------------------------
// 5. constant weights behave exactly like binary search

bool check_standard_equivalence(std::string& detail) {
  std::mt19937_64 rng(555);
  for (int iter = 0; iter < 1000; ++iter) {
    const std::size_t n = testgen::rand_int(rng, 2, 300);
    const std::size_t bic = rng() % n;
    BisectionSession s = session_from_weights(synthetic_commits(n), std::vector<double>(n, 1.0));
    std::vector<std::size_t> pivots;
    BisectionResult res = run(s, [&](std::size_t idx, const Commit&) {
      pivots.push_back(idx);
      return idx <= bic ? Verdict::Bad : Verdict::Good;
    });
    oracle::BinarySearchTrace ref = oracle::reference_binary_search(n, bic);
    if (!expect(pivots == ref.pivots, detail, "pivot sequence diverged at n=" + std::to_string(n)))
      return false;
    const auto bound = static_cast<std::size_t>(std::ceil(std::log2(double(n))));
    if (!expect(res.iterations <= bound, detail,
                "iterations " + std::to_string(res.iterations) + " > ceil(log2 n) at n=" +
                    std::to_string(n)))
      return false;
  }
  return true;
}

// --------------------------------------------------------------------------
// 6. skewed scores reproduce the five-vs-three iteration saving

bool check_weighted_saving(std::string& detail) {
  // 20 candidates, newest first; mass concentrated on the recent commits and
  // the culprit is the fifth-newest. Hand-built so the counts land exactly.
  std::vector<double> weights = {3, 3, 3, 3, 4};
  for (int i = 0; i < 15; ++i) weights.push_back(0.6);
  const std::size_t bic = 4;

  BisectionSession standard =
      session_from_weights(synthetic_commits(weights.size()), std::vector<double>(20, 1.0));
  const std::size_t std_iters = run(standard, simulated_oracle(bic)).iterations;

  BisectionSession weighted = session_from_weights(synthetic_commits(weights.size()), weights);
  const std::size_t weighted_iters = run(weighted, simulated_oracle(bic)).iterations;

  if (!expect(std_iters == 5, detail, "standard took " + std::to_string(std_iters))) return false;
  if (!expect(weighted_iters == 3, detail, "weighted took " + std::to_string(weighted_iters)))
    return false;
  return expect(std_iters > weighted_iters, detail, "no saving");
}

// --------------------------------------------------------------------------
// 7. semantic filter corpus

struct FilePair {
  const char* before;
  const char* after;
};

const FilePair kCommentOnly[] = {
    {"int f() { return 1; } // one", "int f() { return 1; } // two"},
    {"/* a */ int x = 3;", "/* b */ int x = 3;"},
    {"int g() {\n  // step\n  return 2;\n}", "int g() {\n  // changed step\n  return 2;\n}"},
    {"int h() { return 3; }", "// new leading note\nint h() { return 3; }"},
    {"int i() { /* inline */ return 4; }", "int i() { return 4; }"},
    {"// top\nint j = 1;", "int j = 1; // trailing"},
    {"/** doc */ void k() {}", "/** richer doc\n * @since now\n */ void k() {}"},
    {"int l() { return 5; } /* tail */", "int l() { return 5; }"},
    {"int m() {\n  return 6; // why\n}", "int m() {\n  // why\n  return 6;\n}"},
    {"int n() { return 7; }", "int n() { return 7; } //"},
};

const FilePair kWhitespaceOnly[] = {
    {"int a=1;", "int a = 1;"},
    {"void f() {\n  g();\n}\n", "void f() {\n\tg();\n}\n"},
    {"x = y + z;", "x=y+z;"},
    {"int b (int c) { return c; }", "int b(int c){return c;}"},
    {"p();\nq();\n", "p();\n\n\nq();\n"},
};

const FilePair kBraceStyle[] = {
    {"if (x) y();", "if (x) { y(); }"},
    {"if (x) y(); else z();", "if (x) { y(); } else { z(); }"},
    {"while (ready) poll();", "while (ready) { poll(); }"},
    {"for (int i = 0; i < n; i++) sum += i;", "for (int i = 0; i < n; i++) { sum += i; }"},
    {"void f() { if (a) if (b) c(); }", "void f() { if (a) { if (b) { c(); } } }"},
};

// comment edit plus brace enclosure in one change, the motivating pattern
const FilePair kCombined[] = {
    {"public void ensureCapacity(int capacity) {\n"
     "    // checks the capacity\n"
     "    if (capacity > buffer.length)\n"
     "        buffer = expand(capacity);\n"
     "}\n",
     "public void ensureCapacity(int capacity) {\n"
     "    // checks the capacity and grows the buffer when needed\n"
     "    if (capacity > buffer.length) {\n"
     "        buffer = expand(capacity);\n"
     "    }\n"
     "}\n"},
};

const FilePair kGenuine[] = {
    {"int f() { return 1; }", "int f() { return 2; }"},
    {"if (x > 0) y();", "if (x >= 0) y();"},
    {"a = b + c;", "a = b - c;"},
    {"f(a, b);", "f(b, a);"},
    {"s = \"done\";", "s = \"Done\";"},
    {"while (x) work();", "while (x && y) work();"},
    {"int g() { p(); q(); return 0; }", "int g() { q(); p(); return 0; }"},
    {"x++;", "++x;"},
    {"a++ + b;", "a + ++b;"},
    // enclosing a DIFFERENT statement than before is not just brace style
    {"if (x) y(); z();", "if (x) { y(); z(); }"},
};

bool check_semantic_corpus(std::string& detail) {
  auto preserving = [](const FilePair& p) {
    return fingerprint_file(p.before) == fingerprint_file(p.after);
  };
  int cosmetic_total = 0;
  for (const auto& group : {std::vector<FilePair>(std::begin(kCommentOnly), std::end(kCommentOnly)),
                            std::vector<FilePair>(std::begin(kWhitespaceOnly), std::end(kWhitespaceOnly)),
                            std::vector<FilePair>(std::begin(kBraceStyle), std::end(kBraceStyle)),
                            std::vector<FilePair>(std::begin(kCombined), std::end(kCombined))}) {
    for (const auto& p : group) {
      ++cosmetic_total;
      if (!expect(preserving(p), detail,
                  std::string("cosmetic pair not filtered: ") + p.before))
        return false;
      // double-check with the independent tokenizer
      if (!expect(oracle::reference_canonical(p.before) == oracle::reference_canonical(p.after),
                  detail, std::string("reference disagrees on: ") + p.before))
        return false;
    }
  }
  int genuine_total = 0;
  for (const auto& p : kGenuine) {
    ++genuine_total;
    if (!expect(!preserving(p), detail,
                std::string("genuine edit classified preserving: ") + p.before))
      return false;
  }
  if (!expect(cosmetic_total + genuine_total >= 30, detail, "corpus too small")) return false;
  return true;
}

// --------------------------------------------------------------------------
// 8. Ochiai bounds and positivity

bool check_ochiai_properties(std::string& detail) {
  std::mt19937_64 rng(888);
  for (int iter = 0; iter < 1000; ++iter) {
    CoverageMatrix m = testgen::random_matrix(rng);
    std::set<Element> e_f = failure_elements(m);
    for (std::uint32_t e = 0; e < m.elements.size(); ++e) {
      const double s = ochiai(m, e);
      if (!expect(s >= 0.0 && s <= 1.0, detail, "score out of range: " + fmt_double(s, 6)))
        return false;
      const bool in_ef = e_f.count(m.elements[e]) == 1;
      if (!expect((s > 0.0) == in_ef, detail,
                  "positivity mismatch at " + to_string(m.elements[e])))
        return false;
    }
  }
  return true;
}

// --------------------------------------------------------------------------
// 9. end-to-end pipeline on a materialised repository

#ifndef CULPRIT_BIN
#define CULPRIT_BIN "culprit"
#endif

bool check_end_to_end(std::string& detail) {
  ScenarioParams params;
  params.commits = 32;
  params.files = 3;
  params.methods_per_file = 3;
  params.infected_methods = 2;
  params.seed = 42;
  Scenario sc = generate_scenario(params);

  testfix::TempDir dir;
  const std::string repo = dir.path() + "/repo";
  MaterialisedScenario mat = materialise_scenario(sc, repo);
  const std::string cov = dir.path() + "/coverage.json";
  write_file(cov, serialise_coverage(sc.coverage));
  const std::string cache = dir.path() + "/evolve.tsv";

  auto cli = [&](std::vector<std::string> args) {
    std::vector<std::string> argv{CULPRIT_BIN};
    for (auto& a : args) argv.push_back(std::move(a));
    return run_process(argv);
  };

  ProcessResult mined = cli({"mine", "--repo", repo, "--coverage", cov, "--out", cache});
  if (!expect(mined.ok(), detail, "mine failed: " + mined.err)) return false;

  ProcessResult reduced =
      cli({"reduce", "--repo", repo, "--coverage", cov, "--evolve-cache", cache});
  if (!expect(reduced.ok(), detail, "reduce failed: " + reduced.err)) return false;
  const std::string comment_hash =
      mat.real_hash(culprit::detail::synthetic_hash(sc.comment_position));
  if (!expect(reduced.out.find("C_SP\t" + comment_hash + "\n") != std::string::npos, detail,
              "comment-only commit missing from C_SP"))
    return false;

  ProcessResult scored =
      cli({"score", "--repo", repo, "--coverage", cov, "--evolve-cache", cache});
  if (!expect(scored.ok(), detail, "score failed: " + scored.err)) return false;
  auto rows = split(scored.out, '\n');
  if (!expect(!rows.empty() && !rows[0].empty(), detail, "empty score output")) return false;
  auto top = split(rows[0], '\t');
  if (!expect(top.size() == 3, detail, "malformed score row")) return false;
  const std::string bic_hash = mat.real_hash(sc.bic_hash);
  if (!expect(top[0] == "1" && top[1] == bic_hash, detail,
              "culprit not ranked first: top row is " + rows[0]))
    return false;
  return true;
}

// --------------------------------------------------------------------------
// 10. metric pins

bool check_metrics(std::string& detail) {
  const double m = mrr({1, 2, 4});
  if (!expect(std::abs(m - 0.5833) <= 1e-4, detail, "mrr([1,2,4]) = " + fmt_double(m, 6)))
    return false;
  return expect(random_expected_rank(5) == 3.0, detail, "expected rank for size 5 is not 3");
}

}  // namespace

int main() {
  const std::vector<Check> checks = {
      {"voting table rows match the printed values", check_voting_table, 1.0},
      {"commit scores equal the brute-force model on 1000 random instances", check_scoring_oracle,
       30.0},
      {"voting power preserves suspiciousness order on 10k pairs per config",
       check_order_preservation, 0.0},
      {"weighted bisection finds the culprit for every n in [2,64] and position",
       check_bisection_fuzz, 60.0},
      {"equal weights reproduce textbook binary search on 1000 instances",
       check_standard_equivalence, 0.0},
      {"skewed scores cut the five-iteration search to three", check_weighted_saving, 0.0},
      {"cosmetic-change corpus filtered, genuine edits kept", check_semantic_corpus, 0.0},
      {"Ochiai stays in [0,1] and is positive exactly on failing-covered code",
       check_ochiai_properties, 0.0},
      {"full pipeline ranks the seeded culprit first on a real repository", check_end_to_end,
       120.0},
      {"metric values match hand computation", check_metrics, 0.0},
  };

  int failures = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = checks[i].fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (ok && checks[i].time_limit_s > 0.0 && elapsed > checks[i].time_limit_s) {
      ok = false;
      detail = "exceeded time limit of " + fmt_double(checks[i].time_limit_s, 0) + "s";
    }
    std::printf("%s criterion %zu: %s (%.2fs)%s%s\n", ok ? "PASS" : "FAIL", i + 1,
                checks[i].name.c_str(), elapsed, detail.empty() ? "" : " -- ",
                detail.c_str());
    if (!ok) ++failures;
  }
  if (failures > 0) {
    std::printf("%d of %zu criteria failed\n", failures, checks.size());
    return 1;
  }
  std::printf("all %zu criteria passed\n", checks.size());
  return 0;
}
