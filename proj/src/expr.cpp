#include "cmrx/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

namespace cmrx {

struct Expr::Node {
  enum class Op { Const, Var, Add, Sub, Mul, Div, Neg, Sqrt, Min, Max };
  Op op;
  double constant = 0;
  FieldId var{};
  std::shared_ptr<const Node> lhs, rhs;
};

namespace {

using Node = Expr::Node;
using NodePtr = std::shared_ptr<const Node>;

NodePtr make(Node::Op op, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  NodePtr parse_all() {
    auto n = expr();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return n;
  }

  std::vector<FieldId> vars;

 private:
  std::string_view s_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw ExprError(what + " at offset " + std::to_string(pos_) + " in '" + std::string(s_) + "'");
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(std::string_view tok) {
    skip_ws();
    if (s_.substr(pos_, tok.size()) == tok) {
      pos_ += tok.size();
      return true;
    }
    return false;
  }

  void expect(std::string_view tok) {
    if (!accept(tok)) fail("expected '" + std::string(tok) + "'");
  }

  NodePtr expr() {
    auto n = term();
    for (;;) {
      if (accept("+")) n = make(Node::Op::Add, n, term());
      else if (accept("-")) n = make(Node::Op::Sub, n, term());
      else return n;
    }
  }

  NodePtr term() {
    auto n = unary();
    for (;;) {
      if (accept("*") || accept("×")) n = make(Node::Op::Mul, n, unary());
      else if (accept("/") || accept("÷")) n = make(Node::Op::Div, n, unary());
      else return n;
    }
  }

  NodePtr unary() {
    if (accept("-")) return make(Node::Op::Neg, unary());
    return primary();
  }

  NodePtr call2(Node::Op op) {
    expect("(");
    auto a = expr();
    expect(",");
    auto b = expr();
    expect(")");
    return make(op, a, b);
  }

  NodePtr primary() {
    skip_ws();
    if (accept("(")) {
      auto n = expr();
      expect(")");
      return n;
    }
    if (accept("√")) {
      expect("(");
      auto n = expr();
      expect(")");
      return make(Node::Op::Sqrt, n);
    }
    if (pos_ >= s_.size()) fail("unexpected end of expression");
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      double v = 0;
      auto [ptr, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
      if (ec != std::errc{}) fail("bad number");
      pos_ = static_cast<std::size_t>(ptr - s_.data());
      auto n = std::make_shared<Node>();
      n->op = Node::Op::Const;
      n->constant = v;
      return n;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const auto begin = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      const auto ident = s_.substr(begin, pos_ - begin);
      if (ident == "sqrt") {
        expect("(");
        auto n = expr();
        expect(")");
        return make(Node::Op::Sqrt, n);
      }
      if (ident == "min") return call2(Node::Op::Min);
      if (ident == "max") return call2(Node::Op::Max);
      auto field = field_from_key(ident);
      if (!field) fail("unknown identifier '" + std::string(ident) + "'");
      if (std::find(vars.begin(), vars.end(), *field) == vars.end()) vars.push_back(*field);
      auto n = std::make_shared<Node>();
      n->op = Node::Op::Var;
      n->var = *field;
      return n;
    }
    fail("unexpected character");
  }
};

std::optional<double> eval_node(const Node& n, const Expr::Lookup& lookup) {
  using Op = Node::Op;
  switch (n.op) {
    case Op::Const: return n.constant;
    case Op::Var: return lookup(n.var);
    default: break;
  }
  auto a = eval_node(*n.lhs, lookup);
  if (!a) return std::nullopt;
  if (n.op == Op::Neg) return -*a;
  if (n.op == Op::Sqrt) {
    if (*a < 0) return std::nullopt;
    return std::sqrt(*a);
  }
  auto b = eval_node(*n.rhs, lookup);
  if (!b) return std::nullopt;
  double r = 0;
  switch (n.op) {
    case Op::Add: r = *a + *b; break;
    case Op::Sub: r = *a - *b; break;
    case Op::Mul: r = *a * *b; break;
    case Op::Div:
      if (*b == 0) return std::nullopt;
      r = *a / *b;
      break;
    case Op::Min: r = std::min(*a, *b); break;
    case Op::Max: r = std::max(*a, *b); break;
    default: return std::nullopt;
  }
  if (!std::isfinite(r)) return std::nullopt;
  return r;
}

}  // namespace

Expr Expr::parse(std::string_view text) {
  Parser p(text);
  Expr e;
  e.root_ = p.parse_all();
  e.vars_ = std::move(p.vars);
  e.source_ = std::string(text);
  return e;
}

std::optional<double> Expr::eval(const Lookup& lookup) const {
  if (!root_) return std::nullopt;
  return eval_node(*root_, lookup);
}

}  // namespace cmrx
