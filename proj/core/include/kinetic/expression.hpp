#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "kinetic/types.hpp"

namespace kinetic {

/// Coefficient expression in a deliberately small arithmetic grammar.
///
///     expr    := term (('+' | '-') term)*
///     term    := unary (('*' | '/') unary)*
///     unary   := '-' unary | power
///     power   := primary ('^' unary)?          right associative
///     primary := number | variable | ('exp' | 'ln') '(' expr ')' | '(' expr ')'
///     variable:= 'x1' | 'x2' | 'x3' | 'x'       ('x' is an alias of 'x1')
///
/// Numbers use the usual decimal/exponent notation. Whitespace is ignored.
/// `-x^2` parses as `-(x^2)`. Expressions are immutable and cheap to copy;
/// `derivative()` differentiates symbolically and stays inside the grammar, so
/// coefficient fields parsed from documents come with exact derivatives.
///
/// `to_string()` prints a canonical form: parsing it back yields a tree that
/// prints identically and evaluates bit-for-bit the same.
class Expression {
 public:
  enum class Op { kConstant, kVariable, kNeg, kAdd, kSub, kMul, kDiv, kPow, kExp, kLn };

  Expression();  // the constant 0

  static Expression parse(std::string_view text);
  static Expression constant(double value);
  static Expression variable(int index);  // zero based: 0 is x1

  double operator()(const Vec& x) const;
  double evaluate(const double* x) const;

  Expression derivative(int variable_index) const;

  std::string to_string() const;

  /// Largest variable index referenced plus one (0 for constants).
  int arity() const;
  bool is_constant() const;
  /// Value of a constant expression; throws PreconditionViolated otherwise.
  double constant_value() const;

  Op op() const;

  friend Expression operator+(const Expression& a, const Expression& b);
  friend Expression operator-(const Expression& a, const Expression& b);
  friend Expression operator*(const Expression& a, const Expression& b);
  friend Expression operator/(const Expression& a, const Expression& b);
  friend Expression operator-(const Expression& a);
  friend Expression pow(const Expression& base, const Expression& exponent);
  friend Expression exp(const Expression& a);
  friend Expression ln(const Expression& a);

  struct Node;

 private:
  explicit Expression(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

}  // namespace kinetic
