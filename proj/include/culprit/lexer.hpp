#pragma once

// Lightweight C-family lexer (C, C++, Java). Produces a comment- and
// whitespace-free token stream with line information. Multi-character
// operators use maximal munch so that spacing changes can never merge or
// split tokens with different meaning.

#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace culprit {

enum class TokenKind : unsigned char { Identifier, Number, String, CharLit, Punct };

struct Token {
  TokenKind kind;
  std::string text;
  int line;

  bool is(std::string_view s) const { return text == s; }
};

struct LexResult {
  std::vector<Token> tokens;
  bool ok = true;
  std::string error;
  int error_line = 0;
  int line_count = 0;
};

namespace detail {

inline bool ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}
inline bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

// Longest-first operator table. Single characters fall through.
inline std::string_view match_operator(std::string_view rest) {
  static constexpr std::array<std::string_view, 28> ops = {
      ">>>=", "<<=", ">>=", ">>>", "...", "->*", "<=>", "::", "->", "++",
      "--",   "<<",  ">>",  "<=",  ">=",  "==",  "!=",  "&&", "||", "+=",
      "-=",   "*=",  "/=",  "%=",  "&=",  "|=",  "^=",  ".*"};
  for (auto op : ops) {
    if (rest.substr(0, op.size()) == op) return rest.substr(0, op.size());
  }
  return rest.substr(0, 1);
}

}  // namespace detail

inline LexResult lex_c_family(std::string_view src) {
  LexResult res;
  std::size_t i = 0;
  int line = 1;
  auto fail = [&](const std::string& msg) {
    res.ok = false;
    res.error = msg;
    res.error_line = line;
  };
  auto push = [&](TokenKind kind, std::string_view text) {
    res.tokens.push_back(Token{kind, std::string(text), line});
  };

  while (i < src.size()) {
    char c = src[i];
    if (c == '\n') {
      ++line;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    // line comment
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') ++i;
      continue;
    }
    // block comment
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '*') {
      std::size_t j = i + 2;
      bool closed = false;
      while (j < src.size()) {
        if (src[j] == '\n') ++line;
        if (src[j] == '*' && j + 1 < src.size() && src[j + 1] == '/') {
          closed = true;
          j += 2;
          break;
        }
        ++j;
      }
      if (!closed) {
        fail("unterminated block comment");
        break;
      }
      i = j;
      continue;
    }
    // C++ raw string: R"delim( ... )delim"
    if (c == 'R' && i + 1 < src.size() && src[i + 1] == '"') {
      std::size_t d = i + 2;
      while (d < src.size() && src[d] != '(' && src[d] != '"' && src[d] != '\n') ++d;
      if (d < src.size() && src[d] == '(') {
        std::string closer = ")" + std::string(src.substr(i + 2, d - (i + 2))) + "\"";
        std::size_t end = src.find(closer, d + 1);
        if (end == std::string_view::npos) {
          fail("unterminated raw string literal");
          break;
        }
        std::size_t stop = end + closer.size();
        std::string_view text = src.substr(i, stop - i);
        push(TokenKind::String, text);
        for (char ch : text)
          if (ch == '\n') ++line;
        i = stop;
        continue;
      }
      // not a raw string; lex 'R' as an identifier below
    }
    // Java text block: """ ... """
    if (c == '"' && i + 2 < src.size() && src[i + 1] == '"' && src[i + 2] == '"') {
      std::size_t end = src.find("\"\"\"", i + 3);
      if (end == std::string_view::npos) {
        fail("unterminated text block");
        break;
      }
      std::string_view text = src.substr(i, end + 3 - i);
      push(TokenKind::String, text);
      for (char ch : text)
        if (ch == '\n') ++line;
      i = end + 3;
      continue;
    }
    if (c == '"' || c == '\'') {
      const char quote = c;
      std::size_t j = i + 1;
      bool closed = false;
      while (j < src.size()) {
        if (src[j] == '\\' && j + 1 < src.size()) {
          j += 2;
          continue;
        }
        if (src[j] == '\n') break;  // strings don't span lines
        if (src[j] == quote) {
          closed = true;
          ++j;
          break;
        }
        ++j;
      }
      if (!closed) {
        fail(quote == '"' ? "unterminated string literal" : "unterminated character literal");
        break;
      }
      push(quote == '"' ? TokenKind::String : TokenKind::CharLit, src.substr(i, j - i));
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      std::size_t j = i;
      while (j < src.size()) {
        char d = src[j];
        if (std::isalnum(static_cast<unsigned char>(d)) || d == '.' || d == '_' || d == '\'') {
          ++j;
          continue;
        }
        // exponent sign
        if ((d == '+' || d == '-') && j > i) {
          char prev = src[j - 1];
          if (prev == 'e' || prev == 'E' || prev == 'p' || prev == 'P') {
            ++j;
            continue;
          }
        }
        break;
      }
      push(TokenKind::Number, src.substr(i, j - i));
      i = j;
      continue;
    }
    if (detail::ident_start(c)) {
      std::size_t j = i;
      while (j < src.size() && detail::ident_char(src[j])) ++j;
      push(TokenKind::Identifier, src.substr(i, j - i));
      i = j;
      continue;
    }
    std::string_view op = detail::match_operator(src.substr(i));
    push(TokenKind::Punct, op);
    i += op.size();
  }

  res.line_count = line;
  return res;
}

}  // namespace culprit
