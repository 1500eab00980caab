#pragma once

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <string_view>
#include <vector>

#include "traceneat/core.hpp"

namespace traceneat {

/// Parsed but unresolved s-expression: an atom or a list.
struct SExpr {
  std::string atom;
  std::vector<SExpr> items;
  bool is_list = false;

  bool is_number() const {
    if (is_list || atom.empty()) return false;
    char* end = nullptr;
    std::strtod(atom.c_str(), &end);
    return end && *end == '\0';
  }
  double number() const { return std::strtod(atom.c_str(), nullptr); }
  const std::string& head() const {
    static const std::string empty;
    return is_list && !items.empty() && !items[0].is_list ? items[0].atom : empty;
  }
};

namespace detail {

class SExprReader {
 public:
  explicit SExprReader(std::string_view text) : text_(text) {}

  SExpr read_all() {
    SExpr e = read();
    skip_ws();
    if (pos_ != text_.size()) fail("trailing characters");
    return e;
  }

 private:
  SExpr read() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    if (text_[pos_] == ')') fail("unexpected ')'");
    SExpr e;
    if (text_[pos_] == '(') {
      ++pos_;
      e.is_list = true;
      for (;;) {
        skip_ws();
        if (pos_ >= text_.size()) fail("missing ')'");
        if (text_[pos_] == ')') {
          ++pos_;
          break;
        }
        e.items.push_back(read());
      }
      if (e.items.empty()) fail("empty list");
      return e;
    }
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
           text_[pos_] != '(' && text_[pos_] != ')')
      ++pos_;
    e.atom = std::string(text_.substr(start, pos_ - start));
    return e;
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw ValidationError("expression '" + std::string(text_) + "': " + why);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline SExpr parse_sexpr(std::string_view text) { return detail::SExprReader(text).read_all(); }

/// Resolved expression node. Numeric nodes evaluate to a double, predicate
/// nodes to 0/1 and additionally support branch-distance evaluation.
enum class Op : std::uint8_t {
  Const,
  GlobalVar,
  SpriteVar,
  PosX,
  PosY,
  Heading,
  Costume,
  Size,
  MouseX,
  MouseY,
  Random,
  Distance,
  ColorDistance,
  Add,
  Sub,
  Mul,
  Div,
  Mod,
  Neg,
  Abs,
  Round,
  Sin,
  Cos,
  Min,
  Max,
  // predicates
  Lt,
  Le,
  Gt,
  Ge,
  Eq,
  Ne,
  And,
  Or,
  Not,
  KeyHeld,
  Touching,
  TouchingEdge,
  TouchingColor,
};

inline bool is_predicate(Op op) { return op >= Op::Lt; }
inline bool is_relational(Op op) { return op >= Op::Lt && op <= Op::Ne; }

struct Expr {
  Op op = Op::Const;
  double value = 0.0;
  int sprite = -1;  // sprite operand (owner or named), -1 when unused
  int index = -1;   // variable / key / color / other-sprite index
  std::vector<Expr> args;
};

/// Relational operator with the opposite outcome, used for "want false"
/// branch distances.
inline Op negate_relational(Op op) {
  switch (op) {
    case Op::Lt: return Op::Ge;
    case Op::Le: return Op::Gt;
    case Op::Gt: return Op::Le;
    case Op::Ge: return Op::Lt;
    case Op::Eq: return Op::Ne;
    case Op::Ne: return Op::Eq;
    default: return op;
  }
}

/// Raw predicate distance for `lhs op rhs`: 0 when it holds, otherwise
/// |lhs-rhs| for non-strict forms (==, <=, >=) and |lhs-rhs|+1 for strict
/// forms (<, >, !=).
inline double relational_distance(Op op, double lhs, double rhs) {
  const double gap = std::abs(lhs - rhs);
  switch (op) {
    case Op::Lt: return lhs < rhs ? 0.0 : gap + 1.0;
    case Op::Le: return lhs <= rhs ? 0.0 : gap;
    case Op::Gt: return lhs > rhs ? 0.0 : gap + 1.0;
    case Op::Ge: return lhs >= rhs ? 0.0 : gap;
    case Op::Eq: return lhs == rhs ? 0.0 : gap;
    case Op::Ne: return lhs != rhs ? 0.0 : 1.0;
    default: throw UsageError("relational_distance: not a relational operator");
  }
}

/// d / (d + 1); +inf maps to 1.
inline double normalize_distance(double d) { return std::isinf(d) ? 1.0 : d / (d + 1.0); }

}  // namespace traceneat
