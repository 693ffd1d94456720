/*
 * Copyright 2026 The dcache Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>

#include "dcache/errors.hpp"
#include "dcache/predicate.hpp"

namespace dcache {

namespace {

enum class Tok {
  kIdent,
  kKeyword,
  kInt,
  kFloat,
  kString,
  kDate,
  kTimestamp,
  kOp,
  kLParen,
  kRParen,
  kComma,
  kOther,
  kEnd
};

struct Token {
  Tok kind;
  std::string text;  // keywords upper-cased, strings unescaped
  std::string raw;   // as written
  size_t pos;
};

bool IsKeyword(const std::string& upper) {
  return upper == "AND" || upper == "OR" || upper == "NOT" || upper == "BETWEEN" ||
         upper == "IN" || upper == "TRUE" || upper == "FALSE";
}

bool IsDigit(char c) { return c >= '0' && c <= '9'; }

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> Run() {
    std::vector<Token> out;
    while (true) {
      while (i_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[i_]))) ++i_;
      if (i_ >= src_.size()) break;
      out.push_back(Next(out.empty() ? nullptr : &out.back()));
    }
    out.push_back(Token{Tok::kEnd, "", "", src_.size()});
    return out;
  }

 private:
  Token Next(const Token* prev) {
    size_t start = i_;
    char c = src_[i_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[i_])) || src_[i_] == '_')) {
        ++i_;
      }
      std::string word(src_.substr(start, i_ - start));
      std::string upper = word;
      for (auto& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      if (IsKeyword(upper)) return Token{Tok::kKeyword, upper, word, start};
      return Token{Tok::kIdent, word, word, start};
    }
    bool value_before = prev && (prev->kind == Tok::kIdent || prev->kind == Tok::kInt ||
                                 prev->kind == Tok::kFloat || prev->kind == Tok::kRParen);
    if (IsDigit(c) || (c == '-' && !value_before && i_ + 1 < src_.size() && IsDigit(src_[i_ + 1]))) {
      return Number(start);
    }
    if (c == '\'') return QuotedString(start);
    if (c == '(') return Single(Tok::kLParen);
    if (c == ')') return Single(Tok::kRParen);
    if (c == ',') return Single(Tok::kComma);
    if (c == '=' ) return Single(Tok::kOp);
    if (c == '<' || c == '>' || c == '!') {
      ++i_;
      if (i_ < src_.size() && (src_[i_] == '=' || (c == '<' && src_[i_] == '>'))) ++i_;
      std::string op(src_.substr(start, i_ - start));
      if (op == "!") return Token{Tok::kOther, op, op, start};
      if (op == "!=") op = "<>";
      return Token{Tok::kOp, op, std::string(src_.substr(start, i_ - start)), start};
    }
    ++i_;
    std::string raw(src_.substr(start, 1));
    return Token{Tok::kOther, raw, raw, start};
  }

  Token Single(Tok kind) {
    std::string raw(src_.substr(i_, 1));
    Token t{kind, raw, raw, i_};
    ++i_;
    return t;
  }

  Token QuotedString(size_t start) {
    ++i_;
    std::string value;
    while (true) {
      if (i_ >= src_.size()) throw ParseError("unterminated string literal", start);
      char ch = src_[i_++];
      if (ch == '\'') {
        if (i_ < src_.size() && src_[i_] == '\'') {
          value += '\'';
          ++i_;
          continue;
        }
        break;
      }
      value += ch;
    }
    return Token{Tok::kString, value, std::string(src_.substr(start, i_ - start)), start};
  }

  Token Number(size_t start) {
    // Dates and timestamps first: YYYY-MM-DD[THH:MM:SS[.ffffff]]
    std::string_view rest = src_.substr(start);
    if (rest.size() >= 10 && LooksLikeDate(rest.substr(0, 10))) {
      size_t len = 10;
      if (rest.size() >= 19 && rest[10] == 'T' && LooksLikeTimestamp(rest.substr(0, 19))) {
        len = 19;
        if (rest.size() > 20 && rest[19] == '.' && IsDigit(rest[20])) {
          len = 20;
          while (len < rest.size() && IsDigit(rest[len])) ++len;
        }
        i_ = start + len;
        std::string raw(rest.substr(0, len));
        if (!LooksLikeTimestamp(raw)) throw ParseError("invalid timestamp literal", start);
        return Token{Tok::kTimestamp, raw, raw, start};
      }
      i_ = start + len;
      std::string raw(rest.substr(0, len));
      return Token{Tok::kDate, raw, raw, start};
    }
    size_t j = start;
    if (src_[j] == '-') ++j;
    while (j < src_.size() && IsDigit(src_[j])) ++j;
    bool is_float = false;
    if (j + 1 < src_.size() && src_[j] == '.' && IsDigit(src_[j + 1])) {
      is_float = true;
      ++j;
      while (j < src_.size() && IsDigit(src_[j])) ++j;
    }
    if (j < src_.size() && (src_[j] == 'e' || src_[j] == 'E')) {
      size_t k = j + 1;
      if (k < src_.size() && (src_[k] == '+' || src_[k] == '-')) ++k;
      if (k < src_.size() && IsDigit(src_[k])) {
        is_float = true;
        j = k;
        while (j < src_.size() && IsDigit(src_[j])) ++j;
      }
    }
    i_ = j;
    std::string raw(src_.substr(start, j - start));
    return Token{is_float ? Tok::kFloat : Tok::kInt, raw, raw, start};
  }

  std::string_view src_;
  size_t i_ = 0;
};

bool IsLiteral(Tok k) {
  return k == Tok::kInt || k == Tok::kFloat || k == Tok::kString || k == Tok::kDate ||
         k == Tok::kTimestamp;
}

std::string NormalizedText(const std::vector<Token>& toks) {
  std::string out;
  for (size_t i = 0; i + 1 < toks.size(); ++i) {
    const Token& t = toks[i];
    bool call = t.kind == Tok::kLParen && i > 0 && toks[i - 1].kind == Tok::kIdent;
    bool no_space = out.empty() || out.back() == '(' || t.kind == Tok::kRParen ||
                    t.kind == Tok::kComma || call;
    if (!no_space) out += ' ';
    out += t.kind == Tok::kKeyword ? t.text : t.raw;
  }
  return out;
}

// Recursive descent over the token stream. Each production returns nullopt
// when its subtree contains an unsupported atom; the caller then keeps
// parsing (to report syntax errors) and yields an opaque predicate.
class Parser {
 public:
  Parser(std::vector<Token> toks, const Schema& schema) : toks_(std::move(toks)), schema_(schema) {}

  Predicate Run() {
    auto p = Or();
    if (Peek().kind != Tok::kEnd) throw ParseError("unexpected '" + Peek().raw + "'", Peek().pos);
    if (!p) return Predicate::Opaque(NormalizedText(toks_));
    return *p;
  }

 private:
  using Result = std::optional<Predicate>;

  const Token& Peek(size_t ahead = 0) const {
    size_t k = std::min(pos_ + ahead, toks_.size() - 1);
    return toks_[k];
  }
  const Token& Take() { return toks_[std::min(pos_++, toks_.size() - 1)]; }
  bool AtKeyword(const char* kw, size_t ahead = 0) const {
    return Peek(ahead).kind == Tok::kKeyword && Peek(ahead).text == kw;
  }

  Result Or() {
    Result acc = And();
    while (AtKeyword("OR")) {
      Take();
      Result rhs = And();
      acc = (acc && rhs) ? Result(Union(*acc, *rhs)) : std::nullopt;
    }
    return acc;
  }

  Result And() {
    Result acc = Not();
    while (AtKeyword("AND")) {
      Take();
      Result rhs = Not();
      acc = (acc && rhs) ? Result(Intersect(*acc, *rhs)) : std::nullopt;
    }
    return acc;
  }

  Result Not() {
    if (AtKeyword("NOT")) {
      Take();
      Result inner = Not();
      return inner ? Result(Complement(*inner)) : std::nullopt;
    }
    return Primary();
  }

  Result Primary() {
    const Token& t = Peek();
    if (t.kind == Tok::kLParen) {
      Take();
      Result inner = Or();
      if (Peek().kind != Tok::kRParen) throw ParseError("expected ')'", Peek().pos);
      Take();
      return inner;
    }
    if (t.kind == Tok::kEnd) throw ParseError("unexpected end of filter", t.pos);
    if (t.kind == Tok::kRParen || t.kind == Tok::kComma || t.kind == Tok::kOp) {
      throw ParseError("unexpected '" + t.raw + "'", t.pos);
    }
    if (t.kind == Tok::kKeyword) {
      if (t.text == "TRUE") {
        Take();
        return Predicate::True();
      }
      if (t.text == "FALSE") {
        Take();
        return Predicate::False();
      }
      throw ParseError("unexpected keyword " + t.text, t.pos);
    }
    if (t.kind == Tok::kIdent) return ColumnAtom();
    return OpaqueAtom();
  }

  Result ColumnAtom() {
    size_t start = pos_;
    const Token col = Take();
    const Token& next = Peek();
    if (next.kind == Tok::kOp && IsLiteral(Peek(1).kind) && AtBoundary(2)) {
      std::string op = Take().text;
      const Token lit = Take();
      Scalar v = Literal(col, lit);
      return Comparison(col.text, op, v);
    }
    if (AtKeyword("BETWEEN") && IsLiteral(Peek(1).kind) && AtKeyword("AND", 2) &&
        IsLiteral(Peek(3).kind) && AtBoundary(4)) {
      Take();
      Scalar lo = Literal(col, Take());
      Take();
      Scalar hi = Literal(col, Take());
      auto iv = Interval::Make(Bound{lo, true}, Bound{hi, true});
      if (!iv) return Predicate::False();
      return Single(col.text, IntervalSet{*iv});
    }
    if (AtKeyword("IN") && Peek(1).kind == Tok::kLParen) {
      size_t save = pos_;
      Take();
      Take();
      std::vector<Interval> points;
      bool ok = true;
      while (true) {
        if (!IsLiteral(Peek().kind)) {
          ok = false;
          break;
        }
        points.push_back(Interval::Point(Literal(col, Take())));
        if (Peek().kind == Tok::kComma) {
          Take();
          continue;
        }
        if (Peek().kind == Tok::kRParen) {
          Take();
          break;
        }
        ok = false;
        break;
      }
      if (ok && AtBoundary(0)) return Single(col.text, intervals::Normalize(std::move(points)));
      pos_ = save;
    }
    pos_ = start;
    return OpaqueAtom();
  }

  bool AtBoundary(size_t ahead) const {
    const Token& t = Peek(ahead);
    return t.kind == Tok::kEnd || t.kind == Tok::kRParen ||
           (t.kind == Tok::kKeyword && (t.text == "AND" || t.text == "OR"));
  }

  // Consumes an unsupported atom up to the next top-level AND/OR/')'.
  Result OpaqueAtom() {
    int depth = 0;
    bool between_pending = false;
    size_t consumed = 0;
    while (true) {
      const Token& t = Peek();
      if (t.kind == Tok::kEnd) break;
      if (depth == 0 && t.kind == Tok::kRParen) break;
      if (depth == 0 && t.kind == Tok::kKeyword && (t.text == "OR" || t.text == "AND")) {
        if (t.text == "AND" && between_pending) {
          between_pending = false;
        } else {
          break;
        }
      }
      if (t.kind == Tok::kKeyword && t.text == "BETWEEN" && depth == 0) between_pending = true;
      if (t.kind == Tok::kLParen) ++depth;
      if (t.kind == Tok::kRParen) --depth;
      Take();
      ++consumed;
    }
    if (depth != 0) throw ParseError("unbalanced parentheses", Peek().pos);
    if (consumed == 0) throw ParseError("expected a condition", Peek().pos);
    const Token& last = toks_[pos_ - 1];
    if (last.kind == Tok::kOp || last.kind == Tok::kComma ||
        (last.kind == Tok::kKeyword && last.text != "TRUE" && last.text != "FALSE")) {
      throw ParseError("incomplete condition", Peek().pos);
    }
    return std::nullopt;
  }

  const Field& Column(const Token& col) const {
    const Field* f = FindField(schema_, col.text);
    if (!f) {
      throw NotFoundError("unknown column '" + col.text + "' at offset " + std::to_string(col.pos));
    }
    return *f;
  }

  Scalar Literal(const Token& col, const Token& lit) const {
    const Field& field = Column(col);
    auto mismatch = [&]() {
      return TypeError("literal " + lit.raw + " does not match column '" + field.name + "' of type " +
                       std::string(TypeName(field.type)) + " at offset " +
                       std::to_string(lit.pos));
    };
    try {
      switch (field.type) {
        case ColumnType::kInt64:
          if (lit.kind != Tok::kInt) throw mismatch();
          return Scalar::Parse(lit.text, ColumnType::kInt64);
        case ColumnType::kFloat64:
          if (lit.kind != Tok::kInt && lit.kind != Tok::kFloat) throw mismatch();
          return Scalar::Parse(lit.text, ColumnType::kFloat64);
        case ColumnType::kString:
          if (lit.kind != Tok::kString) throw mismatch();
          return Scalar::String(lit.text);
        case ColumnType::kDate:
          if (lit.kind != Tok::kDate && !(lit.kind == Tok::kString && LooksLikeDate(lit.text))) {
            throw mismatch();
          }
          return Scalar::Date(ParseDate(lit.text));
        case ColumnType::kTimestamp:
          if (lit.kind != Tok::kDate && lit.kind != Tok::kTimestamp && lit.kind != Tok::kString) {
            throw mismatch();
          }
          return Scalar::Timestamp(ParseTimestamp(lit.text));
      }
    } catch (const TypeError&) {
      throw;
    } catch (const NotFoundError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(e.what(), lit.pos);
    }
    throw mismatch();
  }

  static Predicate Single(const std::string& col, IntervalSet set) {
    if (set.empty()) return Predicate::False();
    if (intervals::IsAll(set)) return Predicate::True();
    Box b;
    b.constraints.emplace(col, std::move(set));
    return Predicate::FromBoxes({std::move(b)});
  }

  static Predicate Comparison(const std::string& col, const std::string& op, const Scalar& v) {
    std::optional<Interval> iv;
    if (op == "=") {
      iv = Interval::Point(v);
    } else if (op == "<") {
      iv = Interval::Make(std::nullopt, Bound{v, false});
    } else if (op == "<=") {
      iv = Interval::Make(std::nullopt, Bound{v, true});
    } else if (op == ">") {
      iv = Interval::Make(Bound{v, false}, std::nullopt);
    } else if (op == ">=") {
      iv = Interval::Make(Bound{v, true}, std::nullopt);
    } else {  // <>
      return Single(col, intervals::Complement({Interval::Point(v)}));
    }
    if (!iv) return Predicate::False();
    return Single(col, IntervalSet{*iv});
  }

  std::vector<Token> toks_;
  const Schema& schema_;
  size_t pos_ = 0;
};

}  // namespace

Predicate ParsePredicate(std::string_view text, const Schema& schema) {
  Lexer lexer(text);
  Parser parser(lexer.Run(), schema);
  return parser.Run();
}

}  // namespace dcache
