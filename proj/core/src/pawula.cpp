#include "kinetic/pawula.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <boost/random/sobol.hpp>
#include <unsupported/Eigen/Polynomials>

#include "kinetic/errors.hpp"

namespace kinetic {

namespace {

std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

MultiIndex unit(int n, int i, int times) {
  MultiIndex m(static_cast<std::size_t>(n), 0);
  m[static_cast<std::size_t>(i)] += times;
  return m;
}

}  // namespace

int total_order(const MultiIndex& alpha) {
  int s = 0;
  for (int a : alpha) s += a;
  return s;
}

double multi_factorial(const MultiIndex& alpha) {
  double f = 1.0;
  for (int a : alpha) f *= factorial(a);
  return f;
}

// ------------------------------------------------------------ polynomial ---

void Polynomial::add(const MultiIndex& exponent, double coefficient) {
  if (static_cast<int>(exponent.size()) != dimension()) throw ShapeError("exponent length does not match");
  terms_[exponent] += coefficient;
}

double Polynomial::operator()(const Vec& x) const { return derivative_at(MultiIndex(center_.size(), 0), x); }

double Polynomial::derivative_at(const MultiIndex& alpha, const Vec& x) const {
  const Vec y = x - center_;
  double s = 0.0;
  for (const auto& [e, c] : terms_) {
    double term = c;
    for (std::size_t d = 0; d < e.size() && term != 0.0; ++d) {
      if (e[d] < alpha[d]) {
        term = 0.0;
        break;
      }
      for (int k = 0; k < alpha[d]; ++k) term *= e[d] - k;
      term *= std::pow(y(static_cast<Eigen::Index>(d)), e[d] - alpha[d]);
    }
    s += term;
  }
  return s;
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& [e, c] : terms_) {
    if (c != 0.0) d = std::max(d, total_order(e));
  }
  return d;
}

std::string Polynomial::to_string() const {
  std::vector<std::pair<MultiIndex, double>> ordered(terms_.begin(), terms_.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& l, const auto& r) { return total_order(l.first) < total_order(r.first); });
  std::string out;
  for (const auto& [e, c] : ordered) {
    if (c == 0.0) continue;
    std::string mono;
    for (std::size_t d = 0; d < e.size(); ++d) {
      if (e[d] == 0) continue;
      mono += "*y" + std::to_string(d + 1);
      if (e[d] > 1) mono += "^" + std::to_string(e[d]);
    }
    if (out.empty()) {
      out = shortest(c) + mono;
    } else {
      out += (c < 0 ? " - " : " + ") + shortest(std::abs(c)) + mono;
    }
  }
  if (out.empty()) out = "0";
  std::string x0;
  for (int d = 0; d < dimension(); ++d) x0 += (d ? ", " : "") + shortest(center_(d));
  return out + " (y = x - [" + x0 + "])";
}

// -------------------------------------------------------------- operator ---

TruncatedOperator TruncatedOperator::from_coefficients(std::vector<ScalarFn> c) {
  TruncatedOperator op;
  for (std::size_t m = 0; m < c.size(); ++m) {
    if (c[m]) op.terms[{static_cast<int>(m) + 1}] = std::move(c[m]);
  }
  return op;
}

TruncatedOperator TruncatedOperator::from_expressions(const std::vector<Expression>& c) {
  std::vector<ScalarFn> fns;
  for (const Expression& e : c) fns.push_back([e](const Vec& x) { return e(x); });
  return from_coefficients(std::move(fns));
}

TruncatedOperator TruncatedOperator::from_generator(const GeneratorSpec& spec) {
  TruncatedOperator op;
  const int n = spec.dimension;
  op.dimension = n;
  for (int i = 0; i < n; ++i) {
    op.terms[unit(n, i, 1)] = [b = spec.b, i](const Vec& x) { return b(x)(i); };
    op.terms[unit(n, i, 2)] = [a = spec.a, i](const Vec& x) { return a(x)(i, i); };
    for (int j = i + 1; j < n; ++j) {
      MultiIndex m(static_cast<std::size_t>(n), 0);
      m[static_cast<std::size_t>(i)] = 1;
      m[static_cast<std::size_t>(j)] = 1;
      op.terms[m] = [a = spec.a, i, j](const Vec& x) {
        const Mat v = a(x);
        return v(i, j) + v(j, i);
      };
    }
  }
  return op;
}

void TruncatedOperator::validate() const {
  if (terms.empty()) throw SchemaError("operator has no coefficients");
  for (const auto& [alpha, fn] : terms) {
    if (static_cast<int>(alpha.size()) != dimension) throw SchemaError("multi-index length does not match dimension");
    if (total_order(alpha) < 1) throw SchemaError("operator must not have a zeroth order term");
    if (std::any_of(alpha.begin(), alpha.end(), [](int a) { return a < 0; })) {
      throw SchemaError("multi-index entries must be non-negative");
    }
    if (!fn) throw SchemaError("empty coefficient callback");
  }
}

int TruncatedOperator::order() const {
  validate();
  int k = 0;
  for (const auto& [alpha, fn] : terms) k = std::max(k, total_order(alpha));
  return k;
}

double TruncatedOperator::coefficient_at(const MultiIndex& alpha, const Vec& x) const {
  const auto it = terms.find(alpha);
  return it == terms.end() ? 0.0 : it->second(x);
}

double apply_operator(const TruncatedOperator& op, const Polynomial& g, const Vec& x) {
  op.validate();
  double s = 0.0;
  for (const auto& [alpha, c] : op.terms) s += c(x) * g.derivative_at(alpha, x);
  return s;
}

double apply_operator(const TruncatedOperator& op, const JetFunction& f, double x) {
  if (op.dimension != 1) throw ShapeError("jet application is one dimensional");
  const int k = op.order();
  if (k >= Jet::kCapacity) throw PreconditionViolated("operator order exceeds the jet capacity");
  const Jet j = f(Jet::variable(x, k));
  double s = 0.0;
  for (const auto& [alpha, c] : op.terms) s += c(point(x)) * j.derivative(alpha[0]);
  return s;
}

// ----------------------------------------------------------- certificates ---

namespace {

// Second order part as a symmetric matrix: A_ii = c_{2e_i}, A_ij = c_{e_i+e_j}/2.
Mat second_order_matrix(const TruncatedOperator& op, const Vec& x) {
  const int n = op.dimension;
  Mat a = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    a(i, i) = op.coefficient_at(unit(n, i, 2), x);
    for (int j = i + 1; j < n; ++j) {
      MultiIndex m(static_cast<std::size_t>(n), 0);
      m[static_cast<std::size_t>(i)] = 1;
      m[static_cast<std::size_t>(j)] = 1;
      a(i, j) = a(j, i) = 0.5 * op.coefficient_at(m, x);
    }
  }
  return a;
}

double smallest_positive_real_root(double amplitude, double epsilon, int power) {
  // a y^power - eps = 0.
  if (power == 1) return std::abs(epsilon / amplitude);
  Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(power + 1);
  coeffs(0) = -epsilon;
  coeffs(power) = amplitude;
  Eigen::PolynomialSolver<double, Eigen::Dynamic> solver(coeffs);
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < solver.roots().size(); ++i) {
    const std::complex<double> r = solver.roots()(i);
    if (std::abs(r.imag()) <= 1e-9 * std::max(1.0, std::abs(r))) best = std::min(best, std::abs(r.real()));
  }
  return best;
}

std::vector<Vec> sphere_directions(int n, int count) {
  std::vector<Vec> dirs;
  if (n == 1) return {point(1.0), point(-1.0)};
  boost::random::sobol engine(static_cast<std::size_t>(n - 1));
  const double scale = 1.0 / (static_cast<double>(engine.max()) + 1.0);
  for (int k = 0; k < count; ++k) {
    Vec u(n);
    if (n == 2) {
      const double t = 2.0 * std::numbers::pi * (static_cast<double>(engine()) + 0.5) * scale;
      u << std::cos(t), std::sin(t);
    } else {
      const double z = 2.0 * (static_cast<double>(engine()) + 0.5) * scale - 1.0;
      const double t = 2.0 * std::numbers::pi * (static_cast<double>(engine()) + 0.5) * scale;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      u << r * std::cos(t), r * std::sin(t), z;
    }
    dirs.push_back(u);
  }
  return dirs;
}

double sampled_radius(double amplitude, double epsilon, const MultiIndex& alpha) {
  const int k = total_order(alpha);
  const int n = static_cast<int>(alpha.size());
  double best = std::numeric_limits<double>::infinity();
  for (const Vec& u : sphere_directions(n, 10000)) {
    double mono = amplitude;
    for (int d = 0; d < n; ++d) mono *= std::pow(u(d), alpha[static_cast<std::size_t>(d)]);
    if (mono > 0.0) best = std::min(best, std::pow(epsilon / mono, 1.0 / (k - 2)));
  }
  return best;
}

PawulaCertificate higher_order_witness(const TruncatedOperator& op, const Vec& x0, const MultiIndex& alpha, double c_alpha,
                                double epsilon, std::optional<double> amplitude) {
  const int n = op.dimension;
  const int k = total_order(alpha);
  double c2 = 0.0;
  for (int i = 0; i < n; ++i) c2 += op.coefficient_at(unit(n, i, 2), x0);
  const double fact = multi_factorial(alpha);
  const double a = amplitude ? *amplitude : std::copysign((2.0 * epsilon * std::abs(c2) + 1.0) / (fact * std::abs(c_alpha)), c_alpha);
  PawulaCertificate cert;
  cert.kind = PawulaCertificate::Kind::kHigherOrder;
  cert.x0 = x0;
  cert.epsilon = epsilon;
  cert.amplitude = a;
  cert.index = alpha;
  cert.order = k;
  cert.g = Polynomial(x0);
  for (int i = 0; i < n; ++i) cert.g.add(unit(n, i, 2), -epsilon);
  cert.g.add(alpha, a);
  cert.value = -2.0 * epsilon * c2 + fact * a * c_alpha;
  if (!(cert.value > 0.0)) {
    throw PreconditionViolated("amplitude " + shortest(a) + " does not give a positive witness value");
  }
  cert.validity_radius = n == 1 ? smallest_positive_real_root(a, epsilon, k - 2) : sampled_radius(a, epsilon, alpha);
  return cert;
}

}  // namespace

PawulaCertificate pawula_counterexample(const TruncatedOperator& op, const Vec& x0, double epsilon,
                                        std::optional<double> amplitude) {
  const int k = op.order();
  if (k <= 2) throw OrderTooLow("operator of order " + std::to_string(k) + " cannot violate the maximum principle");
  if (!(epsilon > 0.0)) throw PreconditionViolated("epsilon must be positive");
  if (x0.size() != op.dimension) throw ShapeError("point dimension does not match the operator");
  for (const auto& [alpha, fn] : op.terms) {
    if (total_order(alpha) != k) continue;
    const double c = fn(x0);
    if (c != 0.0) return higher_order_witness(op, x0, alpha, c, epsilon, amplitude);
  }
  throw NoViolationAtPoint("every order-" + std::to_string(k) + " coefficient vanishes here; scan other points");
}

PawulaCertificate find_certificate(const TruncatedOperator& op, const Vec& x0, double epsilon) {
  const int k = op.order();
  const int n = op.dimension;
  for (int m = k; m >= 3; --m) {
    for (const auto& [alpha, fn] : op.terms) {
      if (total_order(alpha) != m) continue;
      const double c = fn(x0);
      if (c != 0.0) return higher_order_witness(op, x0, alpha, c, epsilon, {});
    }
  }
  const Mat a = second_order_matrix(op, x0);
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  const double mu = es.eigenvalues()(0);
  if (mu >= -1e-12) throw NoViolationAtPoint("second order part is non-negative here");
  const Vec v = es.eigenvectors().col(0);
  const double trace = a.trace();
  const double delta = trace > 0.0 ? std::min(epsilon, -mu / (2.0 * trace)) : epsilon;
  PawulaCertificate cert;
  cert.kind = PawulaCertificate::Kind::kIndefiniteDiffusion;
  cert.x0 = x0;
  cert.epsilon = delta;
  cert.amplitude = 1.0;
  cert.order = 2;
  cert.index = MultiIndex(static_cast<std::size_t>(n), 0);
  cert.g = Polynomial(x0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      MultiIndex e(static_cast<std::size_t>(n), 0);
      e[static_cast<std::size_t>(i)] += 1;
      e[static_cast<std::size_t>(j)] += 1;
      cert.g.add(e, -v(i) * v(j) - (i == j ? delta : 0.0));
    }
  }
  cert.value = -2.0 * mu - 2.0 * delta * trace;
  cert.validity_radius = std::numeric_limits<double>::infinity();
  return cert;
}

std::optional<PawulaCertificate> scan_for_certificate(const TruncatedOperator& op, const std::vector<Vec>& points,
                                                      double epsilon) {
  for (const Vec& x : points) {
    try {
      return find_certificate(op, x, epsilon);
    } catch (const NoViolationAtPoint&) {
    }
  }
  return std::nullopt;
}

bool verify_local_maximum(const PawulaCertificate& c) {
  const Polynomial& g = c.g;
  const int n = g.dimension();
  const MultiIndex zero(static_cast<std::size_t>(n), 0);
  if (std::abs(g(c.x0)) > 1e-15) return false;
  for (int i = 0; i < n; ++i) {
    if (std::abs(g.derivative_at(unit(n, i, 1), c.x0)) > 1e-15) return false;
  }
  Mat hess(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      MultiIndex e(static_cast<std::size_t>(n), 0);
      e[static_cast<std::size_t>(i)] += 1;
      e[static_cast<std::size_t>(j)] += 1;
      hess(i, j) = g.derivative_at(e, c.x0);
    }
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(hess);
  if (!(es.eigenvalues().maxCoeff() < 0.0)) return false;
  const double r = std::min(c.validity_radius, 1.0);
  const double h = r / 10.0;
  for (int i = 0; i < n; ++i) {
    Vec e = Vec::Zero(n);
    e(i) = h;
    const double d2 = (g(c.x0 + e) - 2.0 * g(c.x0) + g(c.x0 - e)) / (h * h);
    if (!(d2 < 0.0)) return false;
  }
  for (const Vec& u : sphere_directions(n, 256)) {
    if (!(g(c.x0 + 0.5 * r * u) < 0.0)) return false;
  }
  return true;
}

SignCheck second_order_sign_check(const TruncatedOperator& op, const std::vector<Vec>& points) {
  if (op.order() > 2) throw PreconditionViolated("sign check applies to operators of order at most 2");
  SignCheck r;
  r.worst_value = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < points.size(); ++k) {
    const Mat a = second_order_matrix(op, points[k]);
    const double floor = op.dimension == 1 ? a(0, 0) : Eigen::SelfAdjointEigenSolver<Mat>(a).eigenvalues()(0);
    if (floor < r.worst_value) {
      r.worst_value = floor;
      r.worst_point = k;
    }
  }
  r.passed = points.empty() || r.worst_value >= -1e-12;
  return r;
}

MaximumPrincipleReport maximum_principle_check(const SparseMatrix& q) {
  if (q.rows() != q.cols()) throw ShapeError("Q-matrix must be square");
  MaximumPrincipleReport r;
  r.min_off_diagonal = std::numeric_limits<double>::infinity();
  for (int i = 0; i < q.outerSize(); ++i) {
    double sum = 0.0;
    for (SparseMatrix::InnerIterator it(q, i); it; ++it) {
      sum += it.value();
      if (it.col() != i && it.value() < r.min_off_diagonal) {
        r.min_off_diagonal = it.value();
        r.row = i;
        r.col = static_cast<int>(it.col());
      }
    }
    r.max_row_sum = std::max(r.max_row_sum, std::abs(sum));
  }
  if (r.row < 0) r.min_off_diagonal = 0.0;
  r.passed = r.min_off_diagonal >= -1e-12 && r.max_row_sum <= 1e-10;
  return r;
}

MaximumPrincipleReport maximum_principle_check(const DiscreteGenerator& q) { return maximum_principle_check(q.q); }

double cube_test(const GeneratorSpec& spec, const SmoothFunction& a, const Vec& x0) {
  const LocalDerivatives d = derivatives_at(a, x0, spec.domain);
  if (std::abs(d.value) > 1e-12) throw PreconditionViolated("cube test needs A(x0) = 0");
  SmoothFunction cube;
  cube.value = [v = d.value](const Vec&) { return v * v * v; };
  cube.gradient = [d](const Vec&) { return Vec(3.0 * d.value * d.value * d.gradient); };
  cube.hessian = [d](const Vec&) {
    return Mat(6.0 * d.value * d.gradient * d.gradient.transpose() + 3.0 * d.value * d.value * d.hessian);
  };
  return apply_generator(spec, cube, x0);
}

double cube_test(const TruncatedOperator& op, const JetFunction& a, double x0) {
  const double v = a(Jet(x0, 0)).value();
  if (std::abs(v) > 1e-12) throw PreconditionViolated("cube test needs A(x0) = 0");
  return apply_operator(op, [&a](const Jet& x) {
    const Jet y = a(x);
    return y * y * y;
  }, x0);
}

}  // namespace kinetic
