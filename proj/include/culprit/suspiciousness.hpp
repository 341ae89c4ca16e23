#pragma once

// Element-level fault-localisation scores: Ochiai computed from a coverage
// matrix, or externally produced scores loaded from a TSV file.

#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "culprit/errors.hpp"
#include "culprit/model.hpp"
#include "culprit/util.hpp"

namespace culprit {

enum class ScoreSource { SbflOchiai, External };

struct SuspiciousnessMap {
  std::map<Element, double> scores;  // all values >= 0
  ScoreSource source = ScoreSource::SbflOchiai;

  double score_of(const Element& e) const {
    auto it = scores.find(e);
    return it == scores.end() ? 0.0 : it->second;
  }
};

// Union of elements covered by failing tests.
inline std::set<Element> failure_elements(const CoverageMatrix& m) {
  if (m.failing_count() == 0) throw ValidationError("no failing tests in coverage matrix");
  std::set<Element> out;
  for (std::size_t t = 0; t < m.tests.size(); ++t) {
    if (!m.tests[t].failing()) continue;
    for (auto idx : m.covered[t]) out.insert(m.elements[idx]);
  }
  return out;
}

// failing-cover / sqrt(|T_F| * total-cover); 0 for elements covered by no test.
inline double ochiai(const CoverageMatrix& m, std::uint32_t element_index) {
  std::size_t failing_total = 0, failing_cover = 0, total_cover = 0;
  for (std::size_t t = 0; t < m.tests.size(); ++t) {
    const bool covers = m.covers(t, element_index);
    if (covers) ++total_cover;
    if (m.tests[t].failing()) {
      ++failing_total;
      if (covers) ++failing_cover;
    }
  }
  if (total_cover == 0 || failing_cover == 0) return 0.0;
  return static_cast<double>(failing_cover) /
         std::sqrt(static_cast<double>(failing_total) * static_cast<double>(total_cover));
}

inline SuspiciousnessMap ochiai_scores(const CoverageMatrix& m) {
  if (m.failing_count() == 0) throw ValidationError("no failing tests in coverage matrix");
  SuspiciousnessMap susp;
  susp.source = ScoreSource::SbflOchiai;
  for (std::uint32_t i = 0; i < m.elements.size(); ++i)
    susp.scores[m.elements[i]] = ochiai(m, i);
  return susp;
}

// External scores TSV: file <TAB> line <TAB> score. With shift_to_zero, a
// negative minimum is shifted up so the lowest score becomes 0.
inline SuspiciousnessMap parse_external_scores_text(const std::string& text, bool shift_to_zero) {
  SuspiciousnessMap susp;
  susp.source = ScoreSource::External;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  double min_score = 0.0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto cols = split(line, '\t');
    if (cols.size() != 3)
      throw ValidationError("scores: line " + std::to_string(lineno) + ": want 3 columns, got " +
                            std::to_string(cols.size()));
    auto lno = parse_int(cols[1]);
    auto score = parse_double(cols[2]);
    if (!lno || *lno < 1)
      throw ValidationError("scores: line " + std::to_string(lineno) + ": bad line number");
    if (!score)
      throw ValidationError("scores: line " + std::to_string(lineno) + ": bad score");
    Element e{cols[0], static_cast<int>(*lno), std::nullopt};
    susp.scores[e] = *score;
    min_score = std::min(min_score, *score);
  }
  if (shift_to_zero && min_score < 0.0)
    for (auto& [e, s] : susp.scores) s += -min_score;
  for (const auto& [e, s] : susp.scores)
    if (s < 0.0)
      throw ValidationError("scores: negative score for " + to_string(e) +
                            " (use shift-to-zero normalisation)");
  return susp;
}

inline SuspiciousnessMap load_external_scores(const std::string& path, bool shift_to_zero = false) {
  return parse_external_scores_text(read_file(path), shift_to_zero);
}

inline std::string serialise_external_scores(const SuspiciousnessMap& susp) {
  std::ostringstream out;
  for (const auto& [e, s] : susp.scores)
    out << e.file << '\t' << e.line << '\t' << fmt_double(s) << "\n";
  return out.str();
}

}  // namespace culprit
