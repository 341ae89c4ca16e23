#pragma once

// Core data model: tests, statement-level code elements, commits, and the
// coverage / change-history relations everything downstream consumes.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "culprit/errors.hpp"
#include "culprit/util.hpp"

namespace culprit {

enum class Outcome { Pass, Fail };

struct TestCase {
  std::string full_name;  // e.g. pkg.Class::method
  Outcome outcome = Outcome::Pass;

  bool failing() const { return outcome == Outcome::Fail; }
};

struct LineRange {
  int start = 1;
  int end = 1;
};

// A statement. Identity is (file, line); the enclosing method range is carried
// alongside so change history can be mined at method granularity.
struct Element {
  std::string file;  // repo-relative path
  int line = 1;      // 1-based
  std::optional<LineRange> enclosing;

  friend bool operator==(const Element& a, const Element& b) {
    return a.file == b.file && a.line == b.line;
  }
  friend bool operator<(const Element& a, const Element& b) {
    if (a.file != b.file) return a.file < b.file;
    return a.line < b.line;
  }
};

inline std::string to_string(const Element& e) {
  return e.file + ":" + std::to_string(e.line);
}

struct Commit {
  std::string hash;
  std::int64_t time = 0;  // epoch seconds
  int order_index = 0;    // 0 = newest in the analysed range

  friend bool operator==(const Commit& a, const Commit& b) { return a.hash == b.hash; }
};

// Total order used everywhere "newer" matters: later time wins, ties resolved
// by the order the history source assigned.
inline bool is_newer(const Commit& a, const Commit& b) {
  if (a.time != b.time) return a.time > b.time;
  return a.order_index < b.order_index;
}

// tests x elements relation with pass/fail outcomes.
struct CoverageMatrix {
  std::vector<TestCase> tests;
  std::vector<Element> elements;
  // Per test, sorted indices into `elements`.
  std::vector<std::vector<std::uint32_t>> covered;

  std::size_t failing_count() const {
    std::size_t n = 0;
    for (const auto& t : tests)
      if (t.failing()) ++n;
    return n;
  }

  bool covers(std::size_t test, std::uint32_t element) const {
    const auto& row = covered[test];
    return std::binary_search(row.begin(), row.end(), element);
  }
};

inline void validate(const CoverageMatrix& m) {
  std::set<std::string> names;
  for (const auto& t : m.tests) {
    if (t.full_name.empty()) throw ValidationError("coverage: empty test name");
    if (!names.insert(t.full_name).second)
      throw ValidationError("coverage: duplicate test name: " + t.full_name);
  }
  std::set<Element> seen;
  for (const auto& e : m.elements) {
    if (e.line < 1) throw ValidationError("coverage: line < 1 in element " + to_string(e));
    if (e.enclosing && !(e.enclosing->start <= e.line && e.line <= e.enclosing->end))
      throw ValidationError("coverage: enclosing range excludes line in " + to_string(e));
    if (!seen.insert(e).second)
      throw ValidationError("coverage: duplicate element " + to_string(e));
  }
  if (m.covered.size() != m.tests.size())
    throw ValidationError("coverage: relation rows do not match test count");
  for (const auto& row : m.covered)
    for (auto idx : row)
      if (idx >= m.elements.size()) throw ValidationError("coverage: element index out of range");
  if (m.failing_count() == 0) throw ValidationError("coverage: no failing tests");
}

// Per-element change history, newest first.
struct EvolveRelation {
  std::map<Element, std::vector<Commit>> history;

  const std::vector<Commit>* find(const Element& e) const {
    auto it = history.find(e);
    return it == history.end() ? nullptr : &it->second;
  }
};

inline void sort_newest_first(std::vector<Commit>& commits) {
  std::sort(commits.begin(), commits.end(),
            [](const Commit& a, const Commit& b) { return is_newer(a, b); });
  commits.erase(std::unique(commits.begin(), commits.end()), commits.end());
}

// ---------------------------------------------------------------------------
// Coverage JSON:
// {"tests":[{"name":str,"outcome":"PASS"|"FAIL","covered":[{"file":str,"line":int}]}]}

inline CoverageMatrix parse_coverage_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& err) {
    throw ValidationError(std::string("coverage: JSON parse error: ") + err.what());
  }
  if (!doc.is_object() || !doc.contains("tests") || !doc["tests"].is_array())
    throw ValidationError("coverage: missing \"tests\" array");

  CoverageMatrix m;
  std::map<Element, std::uint32_t> element_index;
  for (const auto& jt : doc["tests"]) {
    if (!jt.is_object() || !jt.contains("name") || !jt["name"].is_string())
      throw ValidationError("coverage: test entry missing string field \"name\"");
    TestCase t;
    t.full_name = jt["name"].get<std::string>();
    if (!jt.contains("outcome") || !jt["outcome"].is_string())
      throw ValidationError("coverage: test \"" + t.full_name + "\" missing field \"outcome\"");
    const std::string outcome = jt["outcome"].get<std::string>();
    if (outcome == "PASS")
      t.outcome = Outcome::Pass;
    else if (outcome == "FAIL")
      t.outcome = Outcome::Fail;
    else
      throw ValidationError("coverage: test \"" + t.full_name + "\" has outcome \"" + outcome +
                            "\" (want PASS or FAIL)");

    std::vector<std::uint32_t> row;
    if (jt.contains("covered")) {
      if (!jt["covered"].is_array())
        throw ValidationError("coverage: field \"covered\" of \"" + t.full_name +
                              "\" is not an array");
      for (const auto& je : jt["covered"]) {
        if (!je.is_object() || !je.contains("file") || !je["file"].is_string() ||
            !je.contains("line") || !je["line"].is_number_integer())
          throw ValidationError("coverage: malformed covered entry in \"" + t.full_name +
                                "\" (want {\"file\":str,\"line\":int})");
        Element e{je["file"].get<std::string>(), je["line"].get<int>(), std::nullopt};
        if (e.line < 1)
          throw ValidationError("coverage: line < 1 in covered entry of \"" + t.full_name + "\"");
        auto [it, inserted] = element_index.try_emplace(e, 0);
        if (inserted) {
          m.elements.push_back(e);
          it->second = static_cast<std::uint32_t>(m.elements.size() - 1);
        }
        row.push_back(it->second);
      }
    }
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    m.tests.push_back(std::move(t));
    m.covered.push_back(std::move(row));
  }
  validate(m);
  return m;
}

inline CoverageMatrix parse_coverage(const std::string& path) {
  return parse_coverage_text(read_file(path));
}

inline std::string serialise_coverage(const CoverageMatrix& m) {
  nlohmann::json doc;
  doc["tests"] = nlohmann::json::array();
  for (std::size_t i = 0; i < m.tests.size(); ++i) {
    nlohmann::json jt;
    jt["name"] = m.tests[i].full_name;
    jt["outcome"] = m.tests[i].failing() ? "FAIL" : "PASS";
    jt["covered"] = nlohmann::json::array();
    for (auto idx : m.covered[i]) {
      const Element& e = m.elements[idx];
      jt["covered"].push_back({{"file", e.file}, {"line", e.line}});
    }
    doc["tests"].push_back(std::move(jt));
  }
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Evolve TSV: file <TAB> line <TAB> commit_hash <TAB> epoch_seconds <TAB> order_index
// Header row required; an entirely empty file is an empty relation.

inline constexpr const char* kEvolveHeader = "file\tline\tcommit_hash\tepoch_seconds\torder_index";

inline EvolveRelation parse_evolve_text(const std::string& text) {
  EvolveRelation rel;
  if (text.empty()) return rel;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto cols = split(line, '\t');
    if (!saw_header) {
      if (cols.size() < 5 || cols[0] != "file")
        throw ValidationError("evolve: missing header row (line 1)");
      saw_header = true;
      continue;
    }
    if (cols.size() != 5)
      throw ValidationError("evolve: line " + std::to_string(lineno) + ": want 5 columns, got " +
                            std::to_string(cols.size()));
    auto lno = parse_int(cols[1]);
    auto time = parse_int(cols[3]);
    auto order = parse_int(cols[4]);
    if (!lno || *lno < 1)
      throw ValidationError("evolve: line " + std::to_string(lineno) + ": bad line number");
    if (!time)
      throw ValidationError("evolve: line " + std::to_string(lineno) + ": missing timestamp");
    if (!order)
      throw ValidationError("evolve: line " + std::to_string(lineno) + ": missing order_index");
    if (cols[2].empty())
      throw ValidationError("evolve: line " + std::to_string(lineno) + ": empty commit hash");
    Element e{cols[0], static_cast<int>(*lno), std::nullopt};
    rel.history[e].push_back(Commit{cols[2], *time, static_cast<int>(*order)});
  }
  for (auto& [e, commits] : rel.history) sort_newest_first(commits);
  return rel;
}

inline EvolveRelation parse_evolve(const std::string& path) {
  return parse_evolve_text(read_file(path));
}

inline std::string serialise_evolve(const EvolveRelation& rel) {
  std::ostringstream out;
  out << kEvolveHeader << "\n";
  for (const auto& [e, commits] : rel.history)
    for (const auto& c : commits)
      out << e.file << '\t' << e.line << '\t' << c.hash << '\t' << c.time << '\t' << c.order_index
          << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------

// Keeps every failing test plus every test whose full name contains at least
// one of the given class names (plain case-sensitive substring match).
inline std::vector<TestCase> select_relevant_tests(const std::vector<TestCase>& all_tests,
                                                   const std::set<std::string>& covered_classes) {
  std::vector<TestCase> out;
  for (const auto& t : all_tests) {
    if (t.failing()) {
      out.push_back(t);
      continue;
    }
    for (const auto& cls : covered_classes) {
      if (!cls.empty() && t.full_name.find(cls) != std::string::npos) {
        out.push_back(t);
        break;
      }
    }
  }
  return out;
}

// Simple class name of a source file: basename without extension.
inline std::string simple_class_name(const std::string& file) {
  std::size_t slash = file.find_last_of('/');
  std::string base = slash == std::string::npos ? file : file.substr(slash + 1);
  std::size_t dot = base.find_last_of('.');
  return dot == std::string::npos ? base : base.substr(0, dot);
}

}  // namespace culprit
