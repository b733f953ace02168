#include "kinetic/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "kinetic/errors.hpp"

namespace kinetic {

// ---------------------------------------------------------------- domain ---

DomainSpec DomainSpec::full_line(double lo, double hi, BoundaryCondition bc) {
  DomainSpec d{DomainKind::kFullLine, {{lo, hi}}, bc};
  d.validate();
  return d;
}

DomainSpec DomainSpec::half_line(double lo, double hi, BoundaryCondition bc) {
  DomainSpec d{DomainKind::kHalfLine, {{lo, hi}}, bc};
  d.validate();
  return d;
}

DomainSpec DomainSpec::box(std::vector<std::pair<double, double>> bounds, BoundaryCondition bc) {
  DomainSpec d{DomainKind::kBox, std::move(bounds), bc};
  d.validate();
  return d;
}

void DomainSpec::validate() const {
  if (bounds.empty() || dimension() > kMaxDimension) throw DomainError("domain needs 1 to 3 axes");
  for (const auto& [lo, hi] : bounds) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) throw DomainError("domain axis needs lo < hi");
  }
  if (kind == DomainKind::kHalfLine && !(bounds[0].first > 0.0)) {
    throw DomainError("half-line truncation needs lo > 0");
  }
  if (kind != DomainKind::kBox && dimension() != 1) throw DomainError("line domains are one dimensional");
}

bool DomainSpec::contains(const Vec& x) const {
  if (x.size() != dimension()) return false;
  for (int d = 0; d < dimension(); ++d) {
    if (x(d) < bounds[d].first || x(d) > bounds[d].second) return false;
  }
  return true;
}

bool DomainSpec::contains_interior(const Vec& x) const {
  if (x.size() != dimension()) return false;
  for (int d = 0; d < dimension(); ++d) {
    if (!(x(d) > bounds[d].first && x(d) < bounds[d].second)) return false;
  }
  return true;
}

Grid DomainSpec::make_grid(int nodes) const {
  std::vector<Axis> axes;
  for (const auto& [lo, hi] : bounds) axes.push_back(Axis{lo, hi, nodes});
  return Grid(std::move(axes), boundary_condition);
}

double CoefficientTable::operator()(double x) const {
  if (nodes.empty()) return 0.0;
  if (x <= nodes.front()) return values.front();
  if (x >= nodes.back()) return values.back();
  const auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
  const std::size_t k = static_cast<std::size_t>(it - nodes.begin());
  const double t = (x - nodes[k - 1]) / (nodes[k] - nodes[k - 1]);
  return (1.0 - t) * values[k - 1] + t * values[k];
}

// -------------------------------------------------------------- generator ---

namespace {

double eval_entry(const CoefficientEntry& e, const Vec& x) {
  if (const auto* expr = std::get_if<Expression>(&e)) return (*expr)(x);
  return std::get<CoefficientTable>(e)(x(0));
}

}  // namespace

GeneratorSpec GeneratorSpec::from_source(CoefficientSource source, DomainSpec domain, std::string label) {
  domain.validate();
  const int n = domain.dimension();
  if (static_cast<int>(source.a.size()) != n || static_cast<int>(source.b.size()) != n) {
    throw ShapeError("coefficient shapes do not match the domain dimension");
  }
  for (const auto& row : source.a) {
    if (static_cast<int>(row.size()) != n) throw ShapeError("diffusion matrix must be square");
  }
  bool all_expressions = true;
  for (const auto& row : source.a) {
    for (const auto& e : row) all_expressions = all_expressions && std::holds_alternative<Expression>(e);
  }
  for (const auto& e : source.b) all_expressions = all_expressions && std::holds_alternative<Expression>(e);
  for (const auto& row : source.a) {
    for (const auto& e : row) {
      if (const auto* expr = std::get_if<Expression>(&e); expr && expr->arity() > n) {
        throw SchemaError("coefficient references a variable beyond the domain dimension");
      }
      if (const auto* t = std::get_if<CoefficientTable>(&e); t && (n != 1 || t->nodes.size() != t->values.size() ||
                                                                    t->nodes.size() < 2)) {
        throw SchemaError("coefficient tables must be 1-D with matching nodes/values (>= 2 entries)");
      }
    }
  }

  GeneratorSpec spec;
  spec.dimension = n;
  spec.domain = std::move(domain);
  spec.label = std::move(label);
  spec.a = [src = source.a, n](const Vec& x) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) m(i, j) = eval_entry(src[i][j], x);
    }
    return m;
  };
  spec.b = [src = source.b, n](const Vec& x) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = eval_entry(src[i], x);
    return v;
  };

  if (all_expressions) {
    std::vector<Expression> div_a(static_cast<std::size_t>(n));
    Expression second_div = Expression::constant(0.0);
    Expression div_b = Expression::constant(0.0);
    for (int i = 0; i < n; ++i) {
      Expression acc = Expression::constant(0.0);
      for (int j = 0; j < n; ++j) {
        const Expression& aij = std::get<Expression>(source.a[i][j]);
        acc = acc + aij.derivative(j);
        second_div = second_div + aij.derivative(j).derivative(i);
      }
      div_a[static_cast<std::size_t>(i)] = acc;
      div_b = div_b + std::get<Expression>(source.b[i]).derivative(i);
    }
    CoefficientDerivatives d;
    d.diffusion_divergence = [div_a, n](const Vec& x) {
      Vec v(n);
      for (int i = 0; i < n; ++i) v(i) = div_a[static_cast<std::size_t>(i)](x);
      return v;
    };
    d.diffusion_second_divergence = [second_div](const Vec& x) { return second_div(x); };
    d.drift_divergence = [div_b](const Vec& x) { return div_b(x); };
    spec.derivatives = std::move(d);
  }
  spec.source = std::move(source);
  return spec;
}

GeneratorSpec GeneratorSpec::from_expressions(const Expression& a, const Expression& b, DomainSpec domain,
                                              std::string label) {
  CoefficientSource src;
  src.a = {{CoefficientEntry{a}}};
  src.b = {CoefficientEntry{b}};
  return from_source(std::move(src), std::move(domain), std::move(label));
}

double diffusion_floor(const GeneratorSpec& spec, const Vec& x) {
  const Mat a = spec.a(x);
  if (a.rows() == 1) return a(0, 0);
  const Mat sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

void check_admissible(const GeneratorSpec& spec, const Grid& grid) {
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Vec x = grid.coordinate(k);
    const Mat a = spec.a(x);
    const Vec b = spec.b(x);
    if (!a.allFinite() || !b.allFinite()) {
      throw NonEllipticCoefficient("non-finite coefficient at node " + std::to_string(k));
    }
    const double floor = diffusion_floor(spec, x);
    if (floor < -1e-12) {
      throw NonEllipticCoefficient("diffusion matrix has eigenvalue " + std::to_string(floor) + " at node " +
                                   std::to_string(k));
    }
  }
}

// --------------------------------------------------------- test functions ---

SmoothFunction SmoothFunction::from_expression(const Expression& e, int dimension) {
  std::vector<Expression> grad;
  std::vector<std::vector<Expression>> hess;
  for (int i = 0; i < dimension; ++i) {
    grad.push_back(e.derivative(i));
    hess.emplace_back();
    for (int j = 0; j < dimension; ++j) hess.back().push_back(grad.back().derivative(j));
  }
  SmoothFunction f;
  f.value = [e](const Vec& x) { return e(x); };
  f.gradient = [grad, dimension](const Vec& x) {
    Vec g(dimension);
    for (int i = 0; i < dimension; ++i) g(i) = grad[static_cast<std::size_t>(i)](x);
    return g;
  };
  f.hessian = [hess, dimension](const Vec& x) {
    Mat h(dimension, dimension);
    for (int i = 0; i < dimension; ++i) {
      for (int j = 0; j < dimension; ++j) h(i, j) = hess[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)](x);
    }
    return h;
  };
  return f;
}

SmoothFunction SmoothFunction::from_jet(JetFunction fn) {
  SmoothFunction f;
  f.value = [fn](const Vec& x) { return fn(Jet(x(0), 0)).value(); };
  f.gradient = [fn](const Vec& x) { return point(fn(Jet::variable(x(0), 1)).derivative(1)); };
  f.hessian = [fn](const Vec& x) {
    Mat h(1, 1);
    h(0, 0) = fn(Jet::variable(x(0), 2)).derivative(2);
    return h;
  };
  return f;
}

LocalDerivatives derivatives_at(const SmoothFunction& f, const Vec& x, const DomainSpec& domain) {
  if (!f.value) throw InsufficientSmoothness("test function has no value callback");
  const int n = static_cast<int>(x.size());
  LocalDerivatives out;
  out.value = f.value(x);
  if (f.gradient && f.hessian) {
    out.gradient = f.gradient(x);
    out.hessian = f.hessian(x);
    return out;
  }
  const double h = kDerivativeStep;
  auto at = [&](int d1, double s1, int d2, double s2) {
    Vec y = x;
    if (d1 >= 0) y(d1) += s1;
    if (d2 >= 0) y(d2) += s2;
    if (!domain.contains(y)) {
      throw InsufficientSmoothness("finite-difference stencil leaves the domain near the evaluation point");
    }
    return f.value(y);
  };
  out.gradient = Vec::Zero(n);
  out.hessian = Mat::Zero(n, n);
  for (int d = 0; d < n; ++d) {
    const double p1 = at(d, h, -1, 0.0);
    const double m1 = at(d, -h, -1, 0.0);
    const double p2 = at(d, 2 * h, -1, 0.0);
    const double m2 = at(d, -2 * h, -1, 0.0);
    out.gradient(d) = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
    out.hessian(d, d) = (-p2 + 16.0 * p1 - 30.0 * out.value + 16.0 * m1 - m2) / (12.0 * h * h);
  }
  for (int d = 0; d < n; ++d) {
    for (int e = d + 1; e < n; ++e) {
      auto cross = [&](double s) {
        return (at(d, s, e, s) - at(d, s, e, -s) - at(d, -s, e, s) + at(d, -s, e, -s)) / (4.0 * s * s);
      };
      const double v = (4.0 * cross(h) - cross(2 * h)) / 3.0;
      out.hessian(d, e) = v;
      out.hessian(e, d) = v;
    }
  }
  if (f.gradient) out.gradient = f.gradient(x);
  if (f.hessian) out.hessian = f.hessian(x);
  return out;
}

namespace {

void require_interior(const GeneratorSpec& spec, const Vec& x) {
  if (x.size() != spec.dimension) throw DomainError("point dimension does not match the generator");
  if (!spec.domain.contains_interior(x)) throw DomainError("point lies outside the domain interior");
}

}  // namespace

double apply_generator(const GeneratorSpec& spec, const SmoothFunction& f, const Vec& x) {
  require_interior(spec, x);
  const LocalDerivatives d = derivatives_at(f, x, spec.domain);
  const Mat a = spec.a(x);
  const Vec b = spec.b(x);
  return (a.cwiseProduct(d.hessian)).sum() + b.dot(d.gradient);
}

double apply_formal_adjoint(const GeneratorSpec& spec, const SmoothFunction& rho, const Vec& x) {
  require_interior(spec, x);
  const int n = spec.dimension;
  if (spec.derivatives) {
    const LocalDerivatives r = derivatives_at(rho, x, spec.domain);
    const Mat a = spec.a(x);
    const Vec b = spec.b(x);
    const Vec div_a = spec.derivatives->diffusion_divergence(x);
    const double dda = spec.derivatives->diffusion_second_divergence(x);
    const double div_b = spec.derivatives->drift_divergence(x);
    return dda * r.value + 2.0 * div_a.dot(r.gradient) + (a.cwiseProduct(r.hessian)).sum() - div_b * r.value -
           b.dot(r.gradient);
  }
  // d_i d_j (a_ij rho) - d_i (b_i rho) by differences of the products.
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      SmoothFunction prod = SmoothFunction::sampled([&, i, j](const Vec& y) { return spec.a(y)(i, j) * rho.value(y); });
      total += derivatives_at(prod, x, spec.domain).hessian(i, j);
    }
    SmoothFunction flux = SmoothFunction::sampled([&, i](const Vec& y) { return spec.b(y)(i) * rho.value(y); });
    total -= derivatives_at(flux, x, spec.domain).gradient(i);
  }
  return total;
}

// ------------------------------------------------------------ equilibrium ---

void EquilibriumDensity::validate() const {
  const auto& v = field.values;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0)) throw PreconditionViolated("equilibrium density is negative at node " + std::to_string(i));
  }
  if (!gibbs) return;
  const std::size_t k = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
  auto model = [&](std::size_t i) { return std::exp(-gibbs->beta * gibbs->energy(field.grid.coordinate(i))); };
  const double c = v[k] / model(k);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double m = c * model(i);
    if (std::abs(v[i] - m) > 1e-10 * std::abs(m)) {
      throw PreconditionViolated("equilibrium values disagree with the Gibbs form at node " + std::to_string(i));
    }
  }
}

EquilibriumDensity sample_equilibrium(const Equilibrium& eq, const Grid& grid) {
  EquilibriumDensity out;
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = eq.density.value(grid.coordinate(i));
  out.field = ScalarField(grid, std::move(v));
  out.gibbs = eq.gibbs;
  if (eq.gibbs) {
    std::vector<double> e(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) e[i] = eq.gibbs->beta * eq.gibbs->energy(grid.coordinate(i));
    out.energy = std::move(e);
  }
  out.analytic = eq.density;
  out.total_mass = eq.total_mass;
  return out;
}

EquilibriumDensity normalize_on_grid(EquilibriumDensity rho) {
  const double m = rho.field.integral();
  if (!(m > 0.0) || !std::isfinite(m)) throw PreconditionViolated("equilibrium has no positive finite mass on the grid");
  for (double& v : rho.field.values) v /= m;
  rho.normalized = true;
  return rho;
}

EquilibriumDensity equilibrium_from_values(ScalarField values) {
  EquilibriumDensity out;
  const double peak = values.sup_norm();
  std::vector<double> e(values.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] > 0.0) e[i] = -std::log(values[i] / peak);
  }
  out.energy = std::move(e);
  out.total_mass = values.integral();
  out.field = std::move(values);
  return out;
}

ScalarField formal_adjoint_on_grid(const GeneratorSpec& spec, const ScalarField& rho) {
  const Grid& g = rho.grid;
  const int n = g.dimension();
  if (n != spec.dimension) throw ShapeError("grid dimension does not match the generator");
  std::vector<Mat> a(g.size());
  std::vector<Vec> b(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Vec x = g.coordinate(k);
    a[k] = spec.a(x);
    b[k] = spec.b(x);
  }
  ScalarField out(g, 0.0);
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!g.is_interior(k, 1)) continue;
    double s = 0.0;
    for (int d = 0; d < n; ++d) {
      const std::size_t sd = g.stride(d);
      const double hd = g.axis(d).spacing();
      s += (a[k + sd](d, d) * rho[k + sd] - 2.0 * a[k](d, d) * rho[k] + a[k - sd](d, d) * rho[k - sd]) / (hd * hd);
      s -= (b[k + sd](d) * rho[k + sd] - b[k - sd](d) * rho[k - sd]) / (2.0 * hd);
      for (int e = 0; e < n; ++e) {
        if (e == d) continue;
        const std::size_t se = g.stride(e);
        const double he = g.axis(e).spacing();
        auto p = [&](std::size_t m) { return a[m](d, e) * rho[m]; };
        s += (p(k + sd + se) - p(k + sd - se) - p(k - sd + se) + p(k - sd - se)) / (4.0 * hd * he);
      }
    }
    out[k] = s;
  }
  return out;
}

double residual_invariant(const GeneratorSpec& spec, const EquilibriumDensity& rho0, ResidualMethod method) {
  const Grid& g = rho0.grid();
  double worst = 0.0;
  if (method == ResidualMethod::kAutomatic && rho0.analytic) {
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (!g.is_interior(k, 1)) continue;
      worst = std::max(worst, std::abs(apply_formal_adjoint(spec, *rho0.analytic, g.coordinate(k))));
    }
    return worst;
  }
  const ScalarField r = formal_adjoint_on_grid(spec, rho0.field);
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (g.is_interior(k, 1)) worst = std::max(worst, std::abs(r[k]));
  }
  return worst;
}

Vec compute_Hi_at(const GeneratorSpec& spec, const GibbsForm& gibbs, const Vec& x) {
  const int n = spec.dimension;
  const Mat a = spec.a(x);
  const Vec b = spec.b(x);
  Vec grad_h(n);
  for (int j = 0; j < n; ++j) grad_h(j) = gibbs.energy.derivative(j)(x);
  Vec div_a(n);
  if (spec.derivatives) {
    div_a = spec.derivatives->diffusion_divergence(x);
  } else {
    div_a.setZero();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        SmoothFunction aij = SmoothFunction::sampled([&, i, j](const Vec& y) { return spec.a(y)(i, j); });
        div_a(i) += derivatives_at(aij, x, spec.domain).gradient(j);
      }
    }
  }
  return 2.0 * (gibbs.beta * (a * grad_h) - div_a + b);
}

std::vector<ScalarField> compute_Hi(const GeneratorSpec& spec, const EquilibriumDensity& rho0) {
  const Grid& g = rho0.grid();
  const int n = spec.dimension;
  std::vector<ScalarField> out(static_cast<std::size_t>(n), ScalarField(g, 0.0));
  if (rho0.gibbs && spec.derivatives) {
    for (std::size_t k = 0; k < g.size(); ++k) {
      const Vec h = compute_Hi_at(spec, *rho0.gibbs, g.coordinate(k));
      for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)][k] = h(i);
    }
    return out;
  }
  if (!rho0.energy) throw MissingGibbsForm("H_i needs Gibbs data (beta, H) or a sampled energy");
  const std::vector<double>& energy = *rho0.energy;
  std::vector<std::vector<double>> a_entries(static_cast<std::size_t>(n * n), std::vector<double>(g.size()));
  std::vector<Mat> a(g.size());
  std::vector<Vec> b(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Vec x = g.coordinate(k);
    a[k] = spec.a(x);
    b[k] = spec.b(x);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) a_entries[static_cast<std::size_t>(i * n + j)][k] = a[k](i, j);
    }
  }
  for (std::size_t k = 0; k < g.size(); ++k) {
    for (int i = 0; i < n; ++i) {
      double s = b[k](i);
      for (int j = 0; j < n; ++j) {
        s += a[k](i, j) * axis_derivative(g, energy, k, j);
        s -= spec.derivatives ? 0.0 : axis_derivative(g, a_entries[static_cast<std::size_t>(i * n + j)], k, j);
      }
      if (spec.derivatives) s -= spec.derivatives->diffusion_divergence(g.coordinate(k))(i);
      out[static_cast<std::size_t>(i)][k] = 2.0 * s;
    }
  }
  return out;
}

// ---------------------------------------------------------------- catalog ---

std::vector<std::string> catalog_names() {
  return {"appendix2a", "appendix2b", "ornstein-uhlenbeck", "pure-diffusion"};
}

CatalogExample catalog_example(const std::string& name, double alpha) {
  const Expression x = Expression::variable(0);
  const Expression one = Expression::constant(1.0);
  auto c = [](double v) { return Expression::constant(v); };
  auto finish = [](GeneratorSpec spec, Expression rho, std::optional<GibbsForm> gibbs, bool normalizable,
                   double mass) {
    Equilibrium eq;
    eq.density = SmoothFunction::from_expression(rho, 1);
    eq.expression = rho;
    eq.gibbs = std::move(gibbs);
    eq.normalizable = normalizable;
    eq.total_mass = normalizable ? mass : std::numeric_limits<double>::infinity();
    return CatalogExample{std::move(spec), std::move(eq)};
  };

  if (name == "appendix2a" || name == "appendix2b") {
    if (!(alpha >= -0.5)) throw ParameterOutOfRange("alpha must be >= -1/2, got " + std::to_string(alpha));
    const bool normalizable = alpha > 0.0;
    if (name == "appendix2a") {
      // a = 1 + x^2, b = -(2 alpha - 1) x, rho0 = (1 + x^2)^-(alpha + 1/2).
      GeneratorSpec spec = GeneratorSpec::from_expressions(one + pow(x, c(2.0)), c(-(2.0 * alpha - 1.0)) * x,
                                                           DomainSpec::full_line(-10.0, 10.0), "appendix2a");
      const double s = alpha + 0.5;
      Expression rho = pow(one + pow(x, c(2.0)), c(-s));
      GibbsForm gibbs{1.0, c(s) * ln(one + pow(x, c(2.0)))};
      const double mass = normalizable ? std::sqrt(std::numbers::pi) * std::tgamma(alpha) / std::tgamma(s) : 0.0;
      return finish(std::move(spec), rho, gibbs, normalizable, mass);
    }
    // a = x^2, b = 1 - (2 alpha - 1) x on x > 0, rho0 = x^-(2 alpha + 1) exp(-1/x).
    GeneratorSpec spec = GeneratorSpec::from_expressions(pow(x, c(2.0)), one - c(2.0 * alpha - 1.0) * x,
                                                         DomainSpec::half_line(0.05, 20.0), "appendix2b");
    const double p = 2.0 * alpha + 1.0;
    Expression rho = pow(x, c(-p)) * exp(-(one / x));
    GibbsForm gibbs{1.0, c(p) * ln(x) + one / x};
    const double mass = normalizable ? std::tgamma(2.0 * alpha) : 0.0;
    return finish(std::move(spec), rho, gibbs, normalizable, mass);
  }
  if (name == "ornstein-uhlenbeck") {
    GeneratorSpec spec = GeneratorSpec::from_expressions(one, -x, DomainSpec::full_line(-8.0, 8.0),
                                                         "ornstein-uhlenbeck");
    Expression rho = exp(-(pow(x, c(2.0)) / c(2.0)));
    GibbsForm gibbs{1.0, pow(x, c(2.0)) / c(2.0)};
    return finish(std::move(spec), rho, gibbs, true, std::sqrt(2.0 * std::numbers::pi));
  }
  if (name == "pure-diffusion") {
    GeneratorSpec spec = GeneratorSpec::from_expressions(one, c(0.0), DomainSpec::full_line(-10.0, 10.0),
                                                         "pure-diffusion");
    GibbsForm gibbs{1.0, c(0.0)};
    return finish(std::move(spec), one, gibbs, false, 0.0);
  }
  throw UnknownExample("no catalogued example named '" + name + "'");
}

}  // namespace kinetic
