#pragma once

// Stage 2: classify commits whose changes to failure-relevant files are
// cosmetic (comments, whitespace, brace style, redundant semicolons).
// The check is one-sided: a commit is only ever discarded when the normalised
// token streams of every relevant file are provably identical. Any doubt
// (lexer failure, unreadable file) keeps the commit in the search space.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "culprit/lexer.hpp"
#include "culprit/model.hpp"
#include "culprit/util.hpp"

namespace culprit {

struct SyntacticFingerprint {
  std::uint64_t token_hash = 0;
  std::size_t token_count = 0;
  bool comparable = false;

  // Equal normalised token sequences; never true for non-comparable inputs.
  friend bool operator==(const SyntacticFingerprint& a, const SyntacticFingerprint& b) {
    return a.comparable && b.comparable && a.token_hash == b.token_hash &&
           a.token_count == b.token_count;
  }
};

namespace detail {

// Token-stream normaliser. Walks statements recursively, wrapping unbraced
// if/else/for/while bodies in braces and collapsing runs of statement-level
// semicolons. Everything it cannot confidently parse is passed through
// verbatim, which keeps the check conservative.
class Normaliser {
 public:
  explicit Normaliser(const std::vector<Token>& tokens) : in_(tokens) {}

  std::vector<Token> run() {
    while (pos_ < in_.size()) statement();
    return std::move(out_);
  }

 private:
  const std::vector<Token>& in_;
  std::vector<Token> out_;
  std::size_t pos_ = 0;

  static Token synth(std::string_view text) { return Token{TokenKind::Punct, std::string(text), 0}; }

  bool at(std::string_view text) const { return pos_ < in_.size() && in_[pos_].text == text; }

  void emit(const Token& t) {
    // collapse ;; at statement level
    if (t.kind == TokenKind::Punct && t.text == ";" && !out_.empty() &&
        out_.back().kind == TokenKind::Punct && out_.back().text == ";")
      return;
    out_.push_back(t);
  }

  void advance_emit() { emit(in_[pos_++]); }

  // Copies a balanced (...) / [...] group verbatim, including nested braces.
  void copy_group(const char open, const char close) {
    if (!at(std::string(1, open))) return;
    int depth = 0;
    do {
      const Token& t = in_[pos_];
      if (t.kind == TokenKind::Punct && t.text.size() == 1) {
        if (t.text[0] == open) ++depth;
        if (t.text[0] == close) --depth;
      }
      out_.push_back(t);  // group internals are never collapsed
      ++pos_;
    } while (pos_ < in_.size() && depth > 0);
  }

  void block() {
    advance_emit();  // {
    while (pos_ < in_.size() && !at("}")) statement();
    if (at("}")) advance_emit();
  }

  // Emits one statement, wrapping it in braces if it is not already a block.
  void braced_body() {
    if (pos_ >= in_.size()) return;
    if (at("{")) {
      block();
      return;
    }
    out_.push_back(synth("{"));
    statement();
    out_.push_back(synth("}"));
  }

  void statement() {
    if (pos_ >= in_.size()) return;
    const Token& t = in_[pos_];

    if (t.kind == TokenKind::Punct) {
      if (t.text == "{") {
        block();
        return;
      }
      if (t.text == "}") {
        // stray close: let the caller deal with it
        advance_emit();
        return;
      }
      if (t.text == ";") {
        advance_emit();
        return;
      }
    }

    if (t.kind == TokenKind::Identifier) {
      if (t.text == "if") {
        advance_emit();
        copy_group('(', ')');
        braced_body();
        if (at("else") ) {
          advance_emit();
          braced_body();
        }
        return;
      }
      if (t.text == "for" || t.text == "while") {
        advance_emit();
        copy_group('(', ')');
        braced_body();
        return;
      }
      if (t.text == "do") {
        advance_emit();
        braced_body();
        if (at("while")) {
          advance_emit();
          copy_group('(', ')');
          if (at(";")) advance_emit();
        }
        return;
      }
      if (t.text == "switch" || t.text == "synchronized") {
        advance_emit();
        copy_group('(', ')');
        if (at("{")) block();
        return;
      }
      if (t.text == "else") {  // orphan else (defensive; invalid input)
        advance_emit();
        braced_body();
        return;
      }
      if (t.text == "case") {
        while (pos_ < in_.size() && !at(":") && !at(";") && !at("{") && !at("}")) advance_emit();
        if (at(":")) {
          advance_emit();
          statement();  // the labelled statement belongs to this one
        }
        return;
      }
      if (t.text == "default" && pos_ + 1 < in_.size() && in_[pos_ + 1].is(":")) {
        advance_emit();
        advance_emit();
        statement();
        return;
      }
      // goto-style label: bind the labelled statement so brace insertion
      // around `if (x) lbl: stmt;` stays faithful
      if (pos_ + 1 < in_.size() && in_[pos_ + 1].is(":")) {
        advance_emit();
        advance_emit();
        statement();
        return;
      }
    }

    opaque_run();
  }

  // Copies a balanced {...} verbatim (used for braces nested inside
  // expressions, e.g. lambda bodies passed as call arguments).
  void copy_braces_verbatim() {
    int depth = 0;
    do {
      const Token& t = in_[pos_];
      if (t.kind == TokenKind::Punct && t.text.size() == 1) {
        if (t.text[0] == '{') ++depth;
        if (t.text[0] == '}') --depth;
      }
      out_.push_back(t);
      ++pos_;
    } while (pos_ < in_.size() && depth > 0);
  }

  // Consumes up to the next statement-level ';'. A '{' at depth zero opens a
  // nested block (method body, class body, initialiser); recurse into it so
  // statements inside are normalised too.
  void opaque_run() {
    int paren = 0, bracket = 0;
    while (pos_ < in_.size()) {
      const Token& u = in_[pos_];
      if (u.kind == TokenKind::Punct && u.text.size() == 1) {
        const char ch = u.text[0];
        if (ch == '(') {
          ++paren;
        } else if (ch == ')') {
          --paren;
        } else if (ch == '[') {
          ++bracket;
        } else if (ch == ']') {
          --bracket;
        } else if (ch == '{') {
          if (paren == 0 && bracket == 0) {
            block();
            return;
          }
          copy_braces_verbatim();
          continue;
        } else if (ch == '}') {
          if (paren == 0 && bracket == 0) return;  // end of enclosing block
        }
      }
      const bool terminator = u.is(";") && paren == 0 && bracket == 0;
      out_.push_back(u);
      ++pos_;
      if (terminator) return;
    }
  }
};

}  // namespace detail

inline std::vector<Token> normalise_tokens(const std::vector<Token>& tokens) {
  return detail::Normaliser(tokens).run();
}

inline SyntacticFingerprint fingerprint_file(std::string_view source_text) {
  SyntacticFingerprint fp;
  LexResult lexed = lex_c_family(source_text);
  if (!lexed.ok) return fp;  // NON_COMPARABLE
  std::vector<Token> norm = normalise_tokens(lexed.tokens);
  Fnv1a64 h;
  for (const Token& t : norm) {
    h.update_byte(static_cast<unsigned char>(t.kind));
    h.update(t.text);
    h.update_byte(0x1f);  // separator so spellings never run together
  }
  fp.token_hash = h.digest();
  fp.token_count = norm.size();
  fp.comparable = true;
  return fp;
}

enum class FileSide { Before, After };

// Reads a file's content at one side of a commit; nullopt when unreadable.
using FileReader =
    std::function<std::optional<std::string>(const std::string& commit, const std::string& file,
                                             FileSide side)>;

inline bool is_semantic_preserving(const std::string& commit,
                                   const std::set<std::string>& failure_relevant_files,
                                   const FileReader& read) {
  for (const auto& file : failure_relevant_files) {
    auto before = read(commit, file, FileSide::Before);
    auto after = read(commit, file, FileSide::After);
    if (!before || !after) return false;  // unreadable: keep the commit
    SyntacticFingerprint a = fingerprint_file(*before);
    SyntacticFingerprint b = fingerprint_file(*after);
    if (!(a == b)) return false;
  }
  return true;
}

struct FilterResult {
  std::set<std::string> c_bic;  // kept candidates
  std::set<std::string> c_sp;   // discarded as semantic-preserving
};

// Files containing at least one failing-covered element whose history
// includes the commit.
inline std::set<std::string> failure_relevant_files(const std::string& commit_hash,
                                                    const std::set<Element>& failure_elements,
                                                    const EvolveRelation& evolve) {
  std::set<std::string> files;
  for (const auto& e : failure_elements) {
    if (files.count(e.file)) continue;
    const auto* hist = evolve.find(e);
    if (!hist) continue;
    for (const auto& c : *hist) {
      if (c.hash == commit_hash) {
        files.insert(e.file);
        break;
      }
    }
  }
  return files;
}

inline FilterResult filter_commits(const std::set<std::string>& c_f,
                                   const std::set<Element>& failure_elements,
                                   const EvolveRelation& evolve, const FileReader& read) {
  FilterResult res;
  for (const auto& hash : c_f) {
    auto files = failure_relevant_files(hash, failure_elements, evolve);
    if (!files.empty() && is_semantic_preserving(hash, files, read))
      res.c_sp.insert(hash);
    else
      res.c_bic.insert(hash);
  }
  return res;
}

}  // namespace culprit
