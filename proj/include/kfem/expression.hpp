#pragma once

#include <cctype>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "kfem/errors.hpp"

namespace kfem::expr {

/// Variables of the little coefficient language: spatial x1, x2 and
/// parameters y1..ys.
enum class VarKind { X, Y };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

enum class Op { Const, Var, Neg, Add, Sub, Mul, Div, Pow, Call };

struct Node {
  Op op = Op::Const;
  double value = 0.0;           // Const
  VarKind var_kind = VarKind::X;
  int var_index = 0;            // 0-based
  std::string fn;               // Call
  NodePtr a, b;
};

inline NodePtr constant(double v) {
  auto n = std::make_shared<Node>();
  n->op = Op::Const;
  n->value = v;
  return n;
}

inline NodePtr variable(VarKind k, int idx) {
  auto n = std::make_shared<Node>();
  n->op = Op::Var;
  n->var_kind = k;
  n->var_index = idx;
  return n;
}

inline bool is_const(const NodePtr& n, double v) {
  return n->op == Op::Const && n->value == v;
}

inline NodePtr binary(Op op, NodePtr a, NodePtr b) {
  // constant folding and identity elimination keep derivative trees small
  if (a->op == Op::Const && b->op == Op::Const) {
    switch (op) {
      case Op::Add: return constant(a->value + b->value);
      case Op::Sub: return constant(a->value - b->value);
      case Op::Mul: return constant(a->value * b->value);
      case Op::Div: return constant(a->value / b->value);
      case Op::Pow: return constant(std::pow(a->value, b->value));
      default: break;
    }
  }
  if (op == Op::Add) {
    if (is_const(a, 0.0)) return b;
    if (is_const(b, 0.0)) return a;
  }
  if (op == Op::Sub && is_const(b, 0.0)) return a;
  if (op == Op::Mul) {
    if (is_const(a, 0.0) || is_const(b, 0.0)) return constant(0.0);
    if (is_const(a, 1.0)) return b;
    if (is_const(b, 1.0)) return a;
  }
  if (op == Op::Div && is_const(a, 0.0)) return constant(0.0);
  if (op == Op::Pow && is_const(b, 1.0)) return a;
  auto n = std::make_shared<Node>();
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

inline NodePtr negate(NodePtr a) {
  if (a->op == Op::Const) return constant(-a->value);
  auto n = std::make_shared<Node>();
  n->op = Op::Neg;
  n->a = std::move(a);
  return n;
}

inline NodePtr call(std::string fn, NodePtr a) {
  auto n = std::make_shared<Node>();
  n->op = Op::Call;
  n->fn = std::move(fn);
  n->a = std::move(a);
  return n;
}

inline double eval(const Node& n, double x1, double x2, std::span<const double> y) {
  switch (n.op) {
    case Op::Const: return n.value;
    case Op::Var:
      if (n.var_kind == VarKind::X) return n.var_index == 0 ? x1 : x2;
      if (n.var_index >= static_cast<int>(y.size()))
        throw ValidationError("parameter-index",
                              "expression references y" + std::to_string(n.var_index + 1) +
                                  " but only " + std::to_string(y.size()) + " parameters given");
      return y[n.var_index];
    case Op::Neg: return -eval(*n.a, x1, x2, y);
    case Op::Add: return eval(*n.a, x1, x2, y) + eval(*n.b, x1, x2, y);
    case Op::Sub: return eval(*n.a, x1, x2, y) - eval(*n.b, x1, x2, y);
    case Op::Mul: return eval(*n.a, x1, x2, y) * eval(*n.b, x1, x2, y);
    case Op::Div: return eval(*n.a, x1, x2, y) / eval(*n.b, x1, x2, y);
    case Op::Pow: return std::pow(eval(*n.a, x1, x2, y), eval(*n.b, x1, x2, y));
    case Op::Call: {
      const double v = eval(*n.a, x1, x2, y);
      if (n.fn == "sin") return std::sin(v);
      if (n.fn == "cos") return std::cos(v);
      if (n.fn == "tan") return std::tan(v);
      if (n.fn == "exp") return std::exp(v);
      if (n.fn == "log") return std::log(v);
      if (n.fn == "sqrt") return std::sqrt(v);
      if (n.fn == "abs") return std::abs(v);
      if (n.fn == "sinh") return std::sinh(v);
      if (n.fn == "cosh") return std::cosh(v);
      if (n.fn == "tanh") return std::tanh(v);
      if (n.fn == "atan") return std::atan(v);
      throw ValidationError("unknown-function", "unknown function '" + n.fn + "'");
    }
  }
  return 0.0;
}

/// Symbolic partial derivative with respect to (kind, index).
inline NodePtr diff(const NodePtr& n, VarKind k, int idx) {
  switch (n->op) {
    case Op::Const: return constant(0.0);
    case Op::Var:
      return constant(n->var_kind == k && n->var_index == idx ? 1.0 : 0.0);
    case Op::Neg: return negate(diff(n->a, k, idx));
    case Op::Add: return binary(Op::Add, diff(n->a, k, idx), diff(n->b, k, idx));
    case Op::Sub: return binary(Op::Sub, diff(n->a, k, idx), diff(n->b, k, idx));
    case Op::Mul:
      return binary(Op::Add, binary(Op::Mul, diff(n->a, k, idx), n->b),
                    binary(Op::Mul, n->a, diff(n->b, k, idx)));
    case Op::Div:
      return binary(Op::Div,
                    binary(Op::Sub, binary(Op::Mul, diff(n->a, k, idx), n->b),
                           binary(Op::Mul, n->a, diff(n->b, k, idx))),
                    binary(Op::Mul, n->b, n->b));
    case Op::Pow: {
      if (n->b->op == Op::Const) {
        const double e = n->b->value;
        return binary(Op::Mul, constant(e),
                      binary(Op::Mul, binary(Op::Pow, n->a, constant(e - 1.0)),
                             diff(n->a, k, idx)));
      }
      // general case via a^b = exp(b log a)
      NodePtr loga = call("log", n->a);
      NodePtr inner = binary(Op::Add, binary(Op::Mul, diff(n->b, k, idx), loga),
                             binary(Op::Div, binary(Op::Mul, n->b, diff(n->a, k, idx)), n->a));
      return binary(Op::Mul, n, inner);
    }
    case Op::Call: {
      NodePtr da = diff(n->a, k, idx);
      if (is_const(da, 0.0)) return constant(0.0);
      NodePtr outer;
      if (n->fn == "sin") outer = call("cos", n->a);
      else if (n->fn == "cos") outer = negate(call("sin", n->a));
      else if (n->fn == "tan") outer = binary(Op::Div, constant(1.0),
                                              binary(Op::Pow, call("cos", n->a), constant(2.0)));
      else if (n->fn == "exp") outer = n;
      else if (n->fn == "log") outer = binary(Op::Div, constant(1.0), n->a);
      else if (n->fn == "sqrt") outer = binary(Op::Div, constant(0.5), n);
      else if (n->fn == "abs") outer = binary(Op::Div, n->a, n);  // sign(x), undefined at 0
      else if (n->fn == "sinh") outer = call("cosh", n->a);
      else if (n->fn == "cosh") outer = call("sinh", n->a);
      else if (n->fn == "tanh") outer = binary(Op::Sub, constant(1.0),
                                               binary(Op::Pow, call("tanh", n->a), constant(2.0)));
      else if (n->fn == "atan") outer = binary(Op::Div, constant(1.0),
                                               binary(Op::Add, constant(1.0),
                                                      binary(Op::Mul, n->a, n->a)));
      else throw ValidationError("unknown-function", "unknown function '" + n->fn + "'");
      return binary(Op::Mul, outer, da);
    }
  }
  return constant(0.0);
}

/// True if the expression tree references any y variable.
inline bool depends_on_y(const Node& n) {
  switch (n.op) {
    case Op::Const: return false;
    case Op::Var: return n.var_kind == VarKind::Y;
    case Op::Neg: return depends_on_y(*n.a);
    case Op::Call: return depends_on_y(*n.a);
    default: return depends_on_y(*n.a) || depends_on_y(*n.b);
  }
}

inline int max_y_index(const Node& n) {  // -1 when no y appears
  switch (n.op) {
    case Op::Const: return -1;
    case Op::Var: return n.var_kind == VarKind::Y ? n.var_index : -1;
    case Op::Neg: return max_y_index(*n.a);
    case Op::Call: return max_y_index(*n.a);
    default: return std::max(max_y_index(*n.a), max_y_index(*n.b));
  }
}

namespace detail {

class Parser {
public:
  explicit Parser(std::string_view src) : src_(src) {}

  NodePtr parse() {
    NodePtr e = expression();
    skip_ws();
    if (pos_ != src_.size())
      throw ValidationError("parse-error", "unexpected trailing input at offset " +
                                               std::to_string(pos_) + " in '" + std::string(src_) + "'");
    return e;
  }

private:
  std::string_view src_;
  std::size_t pos_ = 0;

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool consume(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < src_.size() ? src_[pos_] : '\0';
  }

  NodePtr expression() {
    NodePtr e = term();
    for (;;) {
      if (consume('+')) e = binary(Op::Add, e, term());
      else if (consume('-')) e = binary(Op::Sub, e, term());
      else return e;
    }
  }

  NodePtr term() {
    NodePtr e = unary();
    for (;;) {
      if (consume('*')) e = binary(Op::Mul, e, unary());
      else if (consume('/')) e = binary(Op::Div, e, unary());
      else return e;
    }
  }

  NodePtr unary() {
    if (consume('-')) return negate(unary());
    consume('+');
    return power();
  }

  NodePtr power() {
    NodePtr base = atom();
    if (consume('^')) return binary(Op::Pow, base, unary());  // right associative
    return base;
  }

  NodePtr atom() {
    skip_ws();
    if (pos_ >= src_.size())
      throw ValidationError("parse-error", "unexpected end of expression '" + std::string(src_) + "'");
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    if (consume('(')) {
      NodePtr e = expression();
      if (!consume(')'))
        throw ValidationError("parse-error", "missing ')' in '" + std::string(src_) + "'");
      return e;
    }
    throw ValidationError("parse-error", std::string("unexpected character '") + c + "' at offset " +
                                             std::to_string(pos_));
  }

  NodePtr number() {
    std::size_t end = pos_;
    while (end < src_.size() &&
           (std::isdigit(static_cast<unsigned char>(src_[end])) || src_[end] == '.' ||
            src_[end] == 'e' || src_[end] == 'E' ||
            ((src_[end] == '+' || src_[end] == '-') && end > pos_ &&
             (src_[end - 1] == 'e' || src_[end - 1] == 'E'))))
      ++end;
    const std::string tok(src_.substr(pos_, end - pos_));
    pos_ = end;
    try {
      return constant(std::stod(tok));
    } catch (const std::exception&) {
      throw ValidationError("parse-error", "bad numeric literal '" + tok + "'");
    }
  }

  NodePtr identifier() {
    std::size_t end = pos_;
    while (end < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[end])) || src_[end] == '_'))
      ++end;
    std::string name(src_.substr(pos_, end - pos_));
    pos_ = end;
    if (name == "pi") return constant(3.14159265358979323846);
    if ((name[0] == 'x' || name[0] == 'y') && name.size() > 1) {
      bool digits = true;
      for (std::size_t i = 1; i < name.size(); ++i)
        digits = digits && std::isdigit(static_cast<unsigned char>(name[i]));
      if (digits) {
        const int idx = std::stoi(name.substr(1)) - 1;
        if (name[0] == 'x') {
          if (idx < 0 || idx > 1)
            throw ValidationError("parse-error", "only x1 and x2 are spatial variables: '" + name + "'");
          return variable(VarKind::X, idx);
        }
        if (idx < 0)
          throw ValidationError("parse-error", "parameter indices start at y1: '" + name + "'");
        return variable(VarKind::Y, idx);
      }
    }
    if (consume('(')) {
      NodePtr arg = expression();
      if (!consume(')'))
        throw ValidationError("parse-error", "missing ')' after arguments of '" + name + "'");
      return call(std::move(name), std::move(arg));
    }
    throw ValidationError("parse-error", "unknown identifier '" + name + "'");
  }
};

}  // namespace detail

/// Parses the coefficient grammar: x1, x2, y1..ys, pi, arithmetic with ^,
/// and the elementary functions sin/cos/tan/exp/log/sqrt/abs/…
inline NodePtr parse(std::string_view src) { return detail::Parser(src).parse(); }

/// Convenience wrapper pairing an AST with a cached y-arity and evaluation.
class Expr {
public:
  Expr() : root_(constant(0.0)) {}
  explicit Expr(std::string_view src) : root_(parse(src)) {}
  explicit Expr(NodePtr n) : root_(std::move(n)) {}

  double operator()(double x1, double x2, std::span<const double> y = {}) const {
    return eval(*root_, x1, x2, y);
  }
  Expr derivative(VarKind k, int idx) const { return Expr(diff(root_, k, idx)); }
  bool parametric() const { return depends_on_y(*root_); }
  int max_y() const { return max_y_index(*root_); }
  const NodePtr& root() const { return root_; }
  bool is_zero() const { return root_->op == Op::Const && root_->value == 0.0; }

private:
  NodePtr root_;
};

}  // namespace kfem::expr
