#include "kinetic/expression.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>

#include "kinetic/errors.hpp"

namespace kinetic {

struct Expression::Node {
  Op op;
  double value = 0.0;  // kConstant
  int index = 0;       // kVariable
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Op = Expression::Op;

NodePtr make_constant(double v) {
  auto n = std::make_shared<Expression::Node>();
  n->op = Op::kConstant;
  n->value = v;
  return n;
}

NodePtr make_variable(int i) {
  auto n = std::make_shared<Expression::Node>();
  n->op = Op::kVariable;
  n->index = i;
  return n;
}

NodePtr make_node(Op op, NodePtr lhs, NodePtr rhs = nullptr) {
  auto n = std::make_shared<Expression::Node>();
  n->op = op;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

bool is_const(const NodePtr& n, double v) { return n->op == Op::kConstant && n->value == v; }
bool is_const(const NodePtr& n) { return n->op == Op::kConstant; }

// Simplifying constructors used by the symbolic derivative. They only apply
// identities that are exact in floating point.
NodePtr s_neg(const NodePtr& a) {
  if (is_const(a)) return make_constant(-a->value);
  if (a->op == Op::kNeg) return a->lhs;
  return make_node(Op::kNeg, a);
}

NodePtr s_add(const NodePtr& a, const NodePtr& b) {
  if (is_const(a, 0.0)) return b;
  if (is_const(b, 0.0)) return a;
  if (is_const(a) && is_const(b)) return make_constant(a->value + b->value);
  return make_node(Op::kAdd, a, b);
}

NodePtr s_sub(const NodePtr& a, const NodePtr& b) {
  if (is_const(b, 0.0)) return a;
  if (is_const(a, 0.0)) return s_neg(b);
  if (is_const(a) && is_const(b)) return make_constant(a->value - b->value);
  return make_node(Op::kSub, a, b);
}

NodePtr s_mul(const NodePtr& a, const NodePtr& b) {
  if (is_const(a, 0.0) || is_const(b, 0.0)) return make_constant(0.0);
  if (is_const(a, 1.0)) return b;
  if (is_const(b, 1.0)) return a;
  if (is_const(a, -1.0)) return s_neg(b);
  if (is_const(b, -1.0)) return s_neg(a);
  if (is_const(a) && is_const(b)) return make_constant(a->value * b->value);
  return make_node(Op::kMul, a, b);
}

NodePtr s_div(const NodePtr& a, const NodePtr& b) {
  if (is_const(a, 0.0)) return make_constant(0.0);
  if (is_const(b, 1.0)) return a;
  return make_node(Op::kDiv, a, b);
}

NodePtr s_pow(const NodePtr& a, const NodePtr& b) {
  if (is_const(b, 1.0)) return a;
  if (is_const(b, 0.0)) return make_constant(1.0);
  return make_node(Op::kPow, a, b);
}

double eval(const Expression::Node& n, const double* x) {
  switch (n.op) {
    case Op::kConstant: return n.value;
    case Op::kVariable: return x[n.index];
    case Op::kNeg: return -eval(*n.lhs, x);
    case Op::kAdd: return eval(*n.lhs, x) + eval(*n.rhs, x);
    case Op::kSub: return eval(*n.lhs, x) - eval(*n.rhs, x);
    case Op::kMul: return eval(*n.lhs, x) * eval(*n.rhs, x);
    case Op::kDiv: return eval(*n.lhs, x) / eval(*n.rhs, x);
    case Op::kPow: {
      const double base = eval(*n.lhs, x);
      if (n.rhs->op == Op::kConstant && n.rhs->value == 2.0) return base * base;
      return std::pow(base, eval(*n.rhs, x));
    }
    case Op::kExp: return std::exp(eval(*n.lhs, x));
    case Op::kLn: return std::log(eval(*n.lhs, x));
  }
  return 0.0;
}

NodePtr differentiate(const NodePtr& n, int k) {
  switch (n->op) {
    case Op::kConstant: return make_constant(0.0);
    case Op::kVariable: return make_constant(n->index == k ? 1.0 : 0.0);
    case Op::kNeg: return s_neg(differentiate(n->lhs, k));
    case Op::kAdd: return s_add(differentiate(n->lhs, k), differentiate(n->rhs, k));
    case Op::kSub: return s_sub(differentiate(n->lhs, k), differentiate(n->rhs, k));
    case Op::kMul:
      return s_add(s_mul(differentiate(n->lhs, k), n->rhs), s_mul(n->lhs, differentiate(n->rhs, k)));
    case Op::kDiv: {
      // u'/v - u v'/v^2
      const NodePtr du = differentiate(n->lhs, k);
      const NodePtr dv = differentiate(n->rhs, k);
      return s_sub(s_div(du, n->rhs), s_div(s_mul(n->lhs, dv), s_pow(n->rhs, make_constant(2.0))));
    }
    case Op::kPow: {
      const NodePtr du = differentiate(n->lhs, k);
      if (is_const(n->rhs)) {
        const double c = n->rhs->value;
        return s_mul(s_mul(make_constant(c), s_pow(n->lhs, make_constant(c - 1.0))), du);
      }
      // u^v (v' ln u + v u'/u)
      const NodePtr dv = differentiate(n->rhs, k);
      const NodePtr inner =
          s_add(s_mul(dv, make_node(Op::kLn, n->lhs)), s_div(s_mul(n->rhs, du), n->lhs));
      return s_mul(n, inner);
    }
    case Op::kExp: return s_mul(n, differentiate(n->lhs, k));
    case Op::kLn: return s_div(differentiate(n->lhs, k), n->lhs);
  }
  return make_constant(0.0);
}

int precedence(const Expression::Node& n) {
  switch (n.op) {
    case Op::kAdd:
    case Op::kSub: return 1;
    case Op::kMul:
    case Op::kDiv: return 2;
    case Op::kNeg: return 3;
    case Op::kPow: return 4;
    case Op::kConstant: return n.value < 0.0 || std::signbit(n.value) ? 3 : 5;
    default: return 5;
  }
}

std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  std::string s(buf.data(), end);
  if (s == "inf" || s == "-inf" || s == "nan" || s == "-nan") {
    throw PreconditionViolated("non-finite constant cannot be printed in the expression grammar");
  }
  return s;
}

void print(const Expression::Node& n, std::string& out);

void print_child(const Expression::Node& child, int min_prec, std::string& out) {
  if (precedence(child) < min_prec) {
    out += '(';
    print(child, out);
    out += ')';
  } else {
    print(child, out);
  }
}

void print(const Expression::Node& n, std::string& out) {
  switch (n.op) {
    case Op::kConstant: out += format_number(n.value); return;
    case Op::kVariable: out += 'x' + std::to_string(n.index + 1); return;
    case Op::kNeg:
      out += '-';
      print_child(*n.lhs, 3, out);
      return;
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul:
    case Op::kDiv: {
      const int p = precedence(n);
      print_child(*n.lhs, p, out);
      out += n.op == Op::kAdd ? '+' : n.op == Op::kSub ? '-' : n.op == Op::kMul ? '*' : '/';
      print_child(*n.rhs, p + 1, out);
      return;
    }
    case Op::kPow:
      print_child(*n.lhs, 5, out);
      out += '^';
      print_child(*n.rhs, 3, out);
      return;
    case Op::kExp:
    case Op::kLn:
      out += n.op == Op::kExp ? "exp(" : "ln(";
      print(*n.lhs, out);
      out += ')';
      return;
  }
}

int max_index(const Expression::Node& n) {
  if (n.op == Op::kVariable) return n.index + 1;
  int m = 0;
  if (n.lhs) m = std::max(m, max_index(*n.lhs));
  if (n.rhs) m = std::max(m, max_index(*n.rhs));
  return m;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  NodePtr run() {
    NodePtr e = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg + " at offset " + std::to_string(pos_) + " in '" + std::string(text_) + "'");
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = make_node(Op::kAdd, lhs, term());
      } else if (accept('-')) {
        lhs = make_node(Op::kSub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = make_node(Op::kMul, lhs, unary());
      } else if (accept('/')) {
        lhs = make_node(Op::kDiv, lhs, unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    if (accept('-')) {
      NodePtr operand = unary();
      // A negated literal is a negative constant; this keeps printing and
      // parsing mutually inverse.
      if (operand->op == Op::kConstant) return make_constant(-operand->value);
      return make_node(Op::kNeg, operand);
    }
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (accept('^')) return make_node(Op::kPow, base, unary());
    return base;
  }

  NodePtr primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr inner = expr();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    fail(std::string("unexpected character '") + c + "'");
  }

  NodePtr number() {
    const char* begin = text_.data() + pos_;
    const char* end = text_.data() + text_.size();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr == begin) fail("malformed number");
    pos_ += static_cast<std::size_t>(ptr - begin);
    return make_constant(v);
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::string_view name = text_.substr(start, pos_ - start);
    if (name == "exp" || name == "ln") {
      if (!accept('(')) fail("expected '(' after function name");
      NodePtr arg = expr();
      if (!accept(')')) fail("expected ')'");
      return make_node(name == "exp" ? Op::kExp : Op::kLn, arg);
    }
    if (name == "x") return make_variable(0);
    if (name.size() >= 2 && name[0] == 'x') {
      int idx = 0;
      auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), idx);
      if (ec == std::errc() && ptr == name.data() + name.size() && idx >= 1 && idx <= kMaxDimension) {
        return make_variable(idx - 1);
      }
    }
    pos_ = start;
    fail("unknown identifier '" + std::string(name) + "'");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression::Expression() : node_(make_constant(0.0)) {}

Expression Expression::parse(std::string_view text) { return Expression(Parser(text).run()); }

Expression Expression::constant(double value) { return Expression(make_constant(value)); }

Expression Expression::variable(int index) {
  if (index < 0 || index >= kMaxDimension) throw PreconditionViolated("variable index out of range");
  return Expression(make_variable(index));
}

double Expression::operator()(const Vec& x) const { return eval(*node_, x.data()); }

double Expression::evaluate(const double* x) const { return eval(*node_, x); }

Expression Expression::derivative(int variable_index) const {
  return Expression(differentiate(node_, variable_index));
}

std::string Expression::to_string() const {
  std::string out;
  print(*node_, out);
  return out;
}

int Expression::arity() const { return max_index(*node_); }

bool Expression::is_constant() const { return arity() == 0; }

double Expression::constant_value() const {
  if (!is_constant()) throw PreconditionViolated("expression is not a constant");
  return node_->op == Op::kConstant ? node_->value : evaluate(nullptr);
}

Expression::Op Expression::op() const { return node_->op; }

Expression operator+(const Expression& a, const Expression& b) { return Expression(s_add(a.node_, b.node_)); }
Expression operator-(const Expression& a, const Expression& b) { return Expression(s_sub(a.node_, b.node_)); }
Expression operator*(const Expression& a, const Expression& b) { return Expression(s_mul(a.node_, b.node_)); }
Expression operator/(const Expression& a, const Expression& b) { return Expression(s_div(a.node_, b.node_)); }
Expression operator-(const Expression& a) { return Expression(s_neg(a.node_)); }
Expression pow(const Expression& base, const Expression& exponent) {
  return Expression(s_pow(base.node_, exponent.node_));
}
Expression exp(const Expression& a) { return Expression(make_node(Op::kExp, a.node_)); }
Expression ln(const Expression& a) { return Expression(make_node(Op::kLn, a.node_)); }

}  // namespace kinetic
