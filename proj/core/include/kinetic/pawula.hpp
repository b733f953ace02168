#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kinetic/discretize.hpp"
#include "kinetic/generator.hpp"
#include "kinetic/jet.hpp"

namespace kinetic {

/// Multi-index (alpha_1, ..., alpha_n) of a partial derivative.
using MultiIndex = std::vector<int>;

int total_order(const MultiIndex& alpha);
/// alpha_1! ... alpha_n!
double multi_factorial(const MultiIndex& alpha);

/// Polynomial in the shifted variables y = x - center, stored as a map from
/// exponent multi-index to coefficient.
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(Vec center) : center_(std::move(center)) {}

  const Vec& center() const { return center_; }
  int dimension() const { return static_cast<int>(center_.size()); }
  const std::map<MultiIndex, double>& terms() const { return terms_; }
  void add(const MultiIndex& exponent, double coefficient);

  double operator()(const Vec& x) const;
  /// d^alpha p evaluated at x.
  double derivative_at(const MultiIndex& alpha, const Vec& x) const;
  int degree() const;
  /// Human readable form, e.g. "-0.1*y1^2 + 0.1*y1^3 (y = x - x0)".
  std::string to_string() const;

 private:
  Vec center_;
  std::map<MultiIndex, double> terms_;
};

/// Z = sum over alpha of c_alpha(x) d^alpha, 1 <= |alpha| <= order, with no
/// zeroth order term. In 1-D the multi-index is {m} for d^m/dx^m.
struct TruncatedOperator {
  int dimension = 1;
  std::map<MultiIndex, ScalarFn> terms;

  /// c_1, ..., c_k of a 1-D operator (entry m - 1 multiplies d^m); empty
  /// entries are skipped.
  static TruncatedOperator from_coefficients(std::vector<ScalarFn> c);
  static TruncatedOperator from_expressions(const std::vector<Expression>& c);
  /// The second order operator a_ij d_i d_j + b_i d_i of a generator.
  static TruncatedOperator from_generator(const GeneratorSpec& spec);

  /// Highest |alpha| present. Throws SchemaError for an empty operator.
  int order() const;
  double coefficient_at(const MultiIndex& alpha, const Vec& x) const;
  /// Throws SchemaError when the operator is empty, has a zeroth order term
  /// or an index of the wrong length.
  void validate() const;
};

double apply_operator(const TruncatedOperator& op, const Polynomial& g, const Vec& x);
/// 1-D operator on a function written against Jet.
double apply_operator(const TruncatedOperator& op, const JetFunction& f, double x);

/// Local witness that a generator violates the maximum principle: g has a
/// strict local maximum g(x0) = 0 and Zg(x0) = value > 0.
struct PawulaCertificate {
  enum class Kind { kHigherOrder, kIndefiniteDiffusion };
  Kind kind = Kind::kHigherOrder;
  Vec x0;
  double epsilon = 0.1;
  double amplitude = 0.0;
  MultiIndex index;  // derivative exploited by the witness
  int order = 0;
  Polynomial g;
  double value = 0.0;
  /// Largest r with g <= 0 on the ball of radius r (infinite for the
  /// quadratic witness).
  double validity_radius = 0.0;
};

/// g = -eps |y|^2 + a y^alpha for the order-k coefficient c_alpha(x0) != 0
/// (first in index order), with a = sign(c) (2 eps |C2| + 1) / (alpha! |c|)
/// unless given, C2 = sum_i c_{2 e_i}(x0). value = -2 eps C2 + alpha! a c.
/// The radius is (eps/|a|)^(1/(k-2)) found from the real roots of
/// a y^(k-2) - eps in 1-D and from 10^4 quasi-random directions in n-D.
///
/// Throws OrderTooLow for k <= 2, NoViolationAtPoint when every order-k
/// coefficient vanishes at x0, PreconditionViolated for an amplitude that
/// does not give value > 0.
PawulaCertificate pawula_counterexample(const TruncatedOperator& op, const Vec& x0, double epsilon = 0.1,
                                        std::optional<double> amplitude = {});

/// Any witness at x0: the polynomial witness for the highest nonzero order
/// >= 3, otherwise g = -(v.y)^2 - delta |y|^2 along an eigenvector v of a
/// negative eigenvalue of the second order part. Throws NoViolationAtPoint
/// when neither exists.
PawulaCertificate find_certificate(const TruncatedOperator& op, const Vec& x0, double epsilon = 0.1);

/// First point (lowest index) with a certificate.
std::optional<PawulaCertificate> scan_for_certificate(const TruncatedOperator& op, const std::vector<Vec>& points,
                                                      double epsilon = 0.1);

/// g(x0) = 0, vanishing gradient, negative definite quadratic part and
/// negative second differences and samples inside the validity radius.
bool verify_local_maximum(const PawulaCertificate& c);

struct SignCheck {
  bool passed = true;
  std::size_t worst_point = 0;
  double worst_value = 0.0;  // smallest eigenvalue of the second order part
};

/// Second order part non-negative (eigenvalue floor -1e-12) at every point.
/// Throws PreconditionViolated for operators of order above 2.
SignCheck second_order_sign_check(const TruncatedOperator& op, const std::vector<Vec>& points);

struct MaximumPrincipleReport {
  bool passed = true;
  double min_off_diagonal = 0.0;
  int row = -1;  // location of min_off_diagonal
  int col = -1;
  double max_row_sum = 0.0;
};

/// Off-diagonals >= -1e-12 and |row sums| <= 1e-10. Throws ShapeError for a
/// non-square matrix.
MaximumPrincipleReport maximum_principle_check(const SparseMatrix& q);
MaximumPrincipleReport maximum_principle_check(const DiscreteGenerator& q);

/// Z(A^3)(x0) for a second order generator. Throws PreconditionViolated
/// unless |A(x0)| <= 1e-12.
double cube_test(const GeneratorSpec& spec, const SmoothFunction& a, const Vec& x0);
/// Same for a 1-D truncated operator of any order.
double cube_test(const TruncatedOperator& op, const JetFunction& a, double x0);

}  // namespace kinetic
