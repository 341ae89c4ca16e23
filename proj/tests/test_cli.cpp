#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "culprit/evaluation.hpp"
#include "culprit/model.hpp"
#include "culprit/subprocess.hpp"
#include "culprit/util.hpp"
#include "support/git_fixture.hpp"

using namespace culprit;

#ifndef CULPRIT_BIN
#error "CULPRIT_BIN must point at the built binary"
#endif

namespace {

ProcessResult run_cli(std::vector<std::string> args, const std::string& cwd = "") {
  std::vector<std::string> argv{CULPRIT_BIN};
  for (auto& a : args) argv.push_back(std::move(a));
  return run_process(argv, cwd);
}

}  // namespace

TEST_CASE("cli validates its inputs with exit code 1") {
  ProcessResult res = run_cli({"score", "--coverage", "/nonexistent/coverage.json",
                               "--no-stage2", "--evolve-cache", "/nonexistent/evolve.tsv"});
  CHECK(res.exit_code == 2);  // unreadable file is an environment problem

  testfix::TempDir dir;
  const std::string cov = dir.path() + "/cov.json";
  write_file(cov, R"({"tests":[{"name":"T::a","outcome":"PASS","covered":[]}]})");
  ProcessResult invalid =
      run_cli({"score", "--coverage", cov, "--no-stage2", "--evolve-cache", cov});
  CHECK(invalid.exit_code == 1);  // no failing tests

  ProcessResult badflag = run_cli({"score", "--coverage", cov, "--tau", "median"});
  CHECK(badflag.exit_code == 1);
}

TEST_CASE("eval reports metrics with the random baseline") {
  testfix::TempDir dir;
  const std::string ranks = dir.path() + "/ranks.tsv";
  write_file(ranks, "bug-a\t1\t10\nbug-b\t2\t10\nbug-c\t4\t10\n");
  ProcessResult res = run_cli({"eval", "--ranks", ranks});
  REQUIRE(res.exit_code == 0);
  CHECK(res.out.find("metric\tobserved\trandom_baseline\n") == 0);
  CHECK(res.out.find("mrr\t0.5833") != std::string::npos);
  CHECK(res.out.find("acc@5\t100.0") != std::string::npos);
}

TEST_CASE("bisect simulates with a positional oracle") {
  testfix::TempDir dir;
  const std::string scores = dir.path() + "/scores.tsv";
  // eight constant-weight candidates, newest first
  std::string rows;
  for (int i = 0; i < 8; ++i) rows += "1\tc" + std::to_string(i) + "\t1.0\n";
  write_file(scores, rows);

  ProcessResult res = run_cli({"bisect", "--scores", scores, "--oracle-index", "0", "--log",
                               dir.path() + "/bisect.log"});
  REQUIRE(res.exit_code == 0);
  CHECK(res.out.find("bic\tc0\n") != std::string::npos);
  CHECK(res.out.find("iterations\t3\n") != std::string::npos);

  SECTION("the session log can be resumed and replayed") {
    ProcessResult resumed = run_cli({"bisect", "--scores", scores, "--oracle-index", "0",
                                     "--resume", dir.path() + "/bisect.log"});
    REQUIRE(resumed.exit_code == 0);
    CHECK(resumed.out.find("bic\tc0\n") != std::string::npos);
    CHECK(resumed.out.find("iterations\t3\n") != std::string::npos);  // replay, no new probes
  }
  SECTION("a stale log without --resume is refused") {
    ProcessResult refused = run_cli({"bisect", "--scores", scores, "--oracle-index", "0",
                                     "--log", dir.path() + "/bisect.log"});
    CHECK(refused.exit_code == 1);
  }
}

TEST_CASE("bisect runs an automated check command in a worktree") {
  testfix::GitFixture fx;
  fx.write("marker.txt", "clean\n");
  const std::string c1 = fx.commit_all("good state");
  fx.write("marker.txt", "broken\n");
  const std::string c2 = fx.commit_all("introduce marker");
  fx.write("other.txt", "noise\n");
  const std::string c3 = fx.commit_all("unrelated");

  testfix::TempDir out;
  const std::string scores = out.path() + "/scores.tsv";
  write_file(scores, "1\t" + c3 + "\t1.0\n1\t" + c2 + "\t1.0\n1\t" + c1 + "\t1.0\n");

  ProcessResult res = run_cli({"bisect", "--scores", scores, "--repo", fx.path(), "--run",
                               "grep -q clean marker.txt", "--log", out.path() + "/wt.log"});
  REQUIRE(res.exit_code == 0);
  CHECK(res.out.find("bic\t" + c2 + "\n") != std::string::npos);
  // the repository itself is left in place
  CHECK(std::filesystem::exists(fx.path() + "/marker.txt"));
}

TEST_CASE("simulate generates and replays scenario files") {
  testfix::TempDir dir;
  const std::string scen = dir.path() + "/scenarios";
  const std::string out = dir.path() + "/out.tsv";
  ProcessResult res = run_cli({"simulate", "--scenarios", scen, "--out", out, "--generate", "3",
                               "--seed", "5"});
  REQUIRE(res.exit_code == 0);
  std::string tsv = read_file(out);
  auto lines = split(tsv, '\n');
  REQUIRE(lines.size() >= 4);  // header + 3 rows
  CHECK(lines[0].rfind("bug_id\t", 0) == 0);
  for (int i = 1; i <= 3; ++i) {
    auto cols = split(lines[i], '\t');
    REQUIRE(cols.size() == 9);
    CHECK(cols[8] == "1");  // bic_found
  }

  SECTION("same seed gives byte-identical output") {
    testfix::TempDir dir2;
    const std::string scen2 = dir2.path() + "/scenarios";
    const std::string out2 = dir2.path() + "/out.tsv";
    ProcessResult res2 = run_cli({"simulate", "--scenarios", scen2, "--out", out2, "--generate",
                                  "3", "--seed", "5"});
    REQUIRE(res2.exit_code == 0);
    CHECK(read_file(out2) == tsv);
  }
}

TEST_CASE("score pipeline over a materialised scenario repo") {
  ScenarioParams params;
  params.commits = 12;
  params.files = 2;
  params.methods_per_file = 2;
  params.seed = 3;
  Scenario sc = generate_scenario(params);

  testfix::TempDir dir;
  const std::string repo = dir.path() + "/repo";
  MaterialisedScenario mat = materialise_scenario(sc, repo);
  REQUIRE(mat.hash_by_position.size() == static_cast<std::size_t>(params.commits));

  const std::string cov = dir.path() + "/coverage.json";
  write_file(cov, serialise_coverage(sc.coverage));

  const std::string cache = dir.path() + "/evolve.tsv";
  ProcessResult mined = run_cli({"mine", "--repo", repo, "--coverage", cov, "--out", cache});
  REQUIRE(mined.exit_code == 0);

  ProcessResult scored = run_cli({"score", "--repo", repo, "--coverage", cov, "--evolve-cache",
                                  cache});
  REQUIRE(scored.exit_code == 0);
  auto rows = split(scored.out, '\n');
  REQUIRE(!rows.empty());
  auto top = split(rows[0], '\t');
  REQUIRE(top.size() == 3);
  CHECK(top[0] == "1");
  CHECK(top[1] == mat.real_hash(sc.bic_hash));

  SECTION("scoring is deterministic byte for byte") {
    ProcessResult again = run_cli({"score", "--repo", repo, "--coverage", cov, "--evolve-cache",
                                   cache});
    REQUIRE(again.exit_code == 0);
    CHECK(again.out == scored.out);
  }
  SECTION("reduce reports both reduction stages") {
    ProcessResult reduced =
        run_cli({"reduce", "--repo", repo, "--coverage", cov, "--evolve-cache", cache});
    REQUIRE(reduced.exit_code == 0);
    CHECK(reduced.out.find("count_total\t12\n") != std::string::npos);
    CHECK(reduced.out.find("ratio_stage1\t") != std::string::npos);
    CHECK(reduced.out.find("ratio_stage2\t") != std::string::npos);
    const std::string comment_hash = mat.real_hash(detail::synthetic_hash(sc.comment_position));
    CHECK(reduced.out.find("C_SP\t" + comment_hash + "\n") != std::string::npos);
  }
  SECTION("--no-stage2 keeps the comment-only commit") {
    ProcessResult reduced = run_cli({"reduce", "--repo", repo, "--coverage", cov,
                                     "--evolve-cache", cache, "--no-stage2"});
    REQUIRE(reduced.exit_code == 0);
    CHECK(reduced.out.find("count_semantic_preserving\t0\n") != std::string::npos);
    const std::string comment_hash = mat.real_hash(detail::synthetic_hash(sc.comment_position));
    CHECK(reduced.out.find("C_BIC\t" + comment_hash + "\n") != std::string::npos);
  }
}

TEST_CASE("interactive bisect rejects skip and accepts verdicts") {
  testfix::TempDir dir;
  const std::string scores = dir.path() + "/scores.tsv";
  std::string rows;
  for (int i = 0; i < 4; ++i) rows += "1\tc" + std::to_string(i) + "\t1.0\n";
  write_file(scores, rows);

  // candidate order c0..c3 newest-first; culprit c1: pivot 2 -> good, pivot 1 -> bad
  const std::string cmd = std::string("printf 'skip\\ngood\\nbad\\n' | ") + CULPRIT_BIN +
                          " bisect --scores " + scores + " --interactive --log " + dir.path() +
                          "/i.log";
  ProcessResult res = run_shell(cmd);
  REQUIRE(res.exit_code == 0);
  CHECK(res.out.find("bic\tc1\n") != std::string::npos);
  CHECK(res.err.find("skip is not supported") != std::string::npos);

  SECTION("closed input aborts resumably with exit 2") {
    testfix::TempDir dir2;
    const std::string cmd2 = std::string("printf 'good\\n' | ") + CULPRIT_BIN +
                             " bisect --scores " + scores + " --interactive --log " +
                             dir2.path() + "/i.log";
    ProcessResult partial = run_shell(cmd2);
    CHECK(partial.exit_code == 2);  // ran out of answers mid-search
    CHECK(read_file(dir2.path() + "/i.log").find("\tgood") != std::string::npos);
  }
}

TEST_CASE("unreadable repositories surface git diagnostics with exit 2") {
  testfix::TempDir dir;
  const std::string cov = dir.path() + "/cov.json";
  write_file(cov, R"({"tests":[{"name":"F::t","outcome":"FAIL",
                     "covered":[{"file":"a.c","line":1}]}]})");
  ProcessResult res = run_cli({"reduce", "--repo", dir.path() + "/nope", "--coverage", cov});
  CHECK(res.exit_code == 2);
  CHECK(res.err.find("error:") != std::string::npos);
}

TEST_CASE("CULPRIT_GIT overrides the git binary") {
  testfix::GitFixture fx;
  fx.write("a.c", "int f() { return 1; }\n");
  fx.commit_all("init");
  testfix::TempDir dir;
  const std::string cov = dir.path() + "/cov.json";
  write_file(cov, R"({"tests":[{"name":"F::t","outcome":"FAIL",
                     "covered":[{"file":"a.c","line":1}]}]})");

  std::vector<std::string> argv{CULPRIT_BIN, "mine", "--repo", fx.path(), "--coverage", cov,
                                "--out", dir.path() + "/e.tsv"};
  ProcessResult broken = run_process(argv, "", {{"CULPRIT_GIT", "/bin/false"}});
  CHECK(broken.exit_code == 2);
  ProcessResult fine = run_process(argv, "", {{"CULPRIT_GIT", "git"}});
  CHECK(fine.exit_code == 0);
}

TEST_CASE("score ablation flags change the output") {
  // repo-less run: external scores + cached histories + --no-stage2
  testfix::TempDir dir;
  const std::string cov = dir.path() + "/cov.json";
  write_file(cov, R"({"tests":[
    {"name":"F::t","outcome":"FAIL","covered":[{"file":"a.c","line":2},{"file":"a.c","line":6}]}
  ]})");
  const std::string evolve = dir.path() + "/evolve.tsv";
  write_file(evolve, std::string(kEvolveHeader) + "\n" +
                         "a.c\t2\tnew\t300\t0\n"
                         "a.c\t2\told\t100\t1\n"
                         "a.c\t6\told\t100\t1\n");
  const std::string ext = dir.path() + "/scores.tsv";
  write_file(ext, "a.c\t2\t0.9\na.c\t6\t0.3\n");

  ProcessResult rank_mode = run_cli({"score", "--coverage", cov, "--evolve-cache", evolve,
                                     "--no-stage2", "--fl", "external:" + ext});
  REQUIRE(rank_mode.exit_code == 0);

  ProcessResult ablated = run_cli({"score", "--coverage", cov, "--evolve-cache", evolve,
                                   "--no-stage2", "--fl", "external:" + ext, "--vote", "raw",
                                   "--lambda", "0"});
  REQUIRE(ablated.exit_code == 0);
  CHECK(rank_mode.out != ablated.out);

  // raw votes with lambda 0: new = susp(a2) = 0.9, old = 0.9 + 0.3 = 1.2
  auto rows = split(ablated.out, '\n');
  REQUIRE(rows.size() >= 2);
  CHECK(rows[0].rfind("1\told\t1.2", 0) == 0);
  CHECK(rows[1].rfind("2\tnew\t0.9", 0) == 0);
}
