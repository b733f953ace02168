#include "kinetic/semigroup.hpp"

#include <algorithm>
#include <cmath>

#include "kinetic/errors.hpp"
#include "kinetic/markov_elimination.hpp"

namespace kinetic {

namespace {

void check_tol(double tol) {
  if (!(tol > 0.0 && tol <= 1e-6)) throw PreconditionViolated("tolerance must lie in (0, 1e-6]");
}

void check_time(double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw TimeError("time must be finite and non-negative");
}

// Number of terms needed for mean m: the upper Chernoff bound
// P(N >= m + k) <= exp(-k^2 / (2 (m + k))) set equal to tol / 2.
long series_length(double m, double tol) {
  const double l = std::log(2.0 / tol);
  const double k = l + std::sqrt(l * l + 2.0 * m * l);
  return static_cast<long>(std::ceil(m + k)) + 1;
}

// P = I + A / lambda, entrywise non-negative.
SparseMatrix stochastic_matrix(const SparseMatrix& a, double lambda) {
  SparseMatrix id(a.rows(), a.cols());
  id.setIdentity();
  SparseMatrix p = id + a * (1.0 / lambda);
  p.prune(0.0);
  p.makeCompressed();
  return p;
}

struct Uniformizer {
  SparseMatrix p;
  double lambda = 0.0;

  Uniformizer(const SparseMatrix& a, double rate) : lambda(rate) {
    if (rate > 0.0) p = stochastic_matrix(a, rate);
  }

  Eigen::VectorXd advance(const Eigen::VectorXd& v0, double t, const UniformizationOptions& opt) const {
    if (t == 0.0 || lambda == 0.0) return v0;
    int pieces = 1;
    double tol = opt.tol;
    while (series_length(lambda * t / pieces, tol) > opt.max_terms) {
      if (!opt.split_long_horizons) {
        throw TruncationBudgetExceeded("uniformization needs more than " + std::to_string(opt.max_terms) +
                                       " terms; split the horizon");
      }
      pieces *= 2;
      tol = opt.tol / pieces;
    }
    const std::vector<double> w = poisson_weights(lambda * t / pieces, tol);
    Eigen::VectorXd v = v0;
    Eigen::VectorXd term(v0.size());
    Eigen::VectorXd acc(v0.size());
    for (int piece = 0; piece < pieces; ++piece) {
      term = v;
      acc = w[0] * term;
      for (std::size_t n = 1; n < w.size(); ++n) {
        term = p * term;
        if (w[n] != 0.0) acc += w[n] * term;
      }
      v = acc;
    }
    return v;
  }
};

Eigen::VectorXd to_vector(const ScalarField& f) { return Eigen::Map<const Eigen::VectorXd>(f.values.data(), f.size()); }

ScalarField to_field(const Grid& g, const Eigen::VectorXd& v) {
  return ScalarField(g, std::vector<double>(v.data(), v.data() + v.size()));
}

void check_field(const DiscreteGenerator& q, const ScalarField& f) {
  if (f.size() != q.size()) throw ShapeError("field length does not match the Q-matrix");
}

// Mass still in the domain. With absorbing walls the wall nodes are traps and
// hold what has left.
double live_mass(const ScalarField& f) {
  const Grid& g = f.grid;
  if (g.boundary_condition() != BoundaryCondition::kAbsorbing) return f.integral();
  double m = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!g.on_boundary(i)) m += f[i];
  }
  return m * g.weight();
}

EvolutionResult evolve(const DiscreteGenerator& q, const SparseMatrix& a, const ScalarField& f0,
                       const std::vector<double>& times, const UniformizationOptions& opt) {
  check_tol(opt.tol);
  check_field(q, f0);
  const Uniformizer u(a, uniformization_rate(q));
  EvolutionResult r;
  Eigen::VectorXd v = to_vector(f0);
  double now = 0.0;
  for (double t : times) {
    check_time(t);
    if (t < now) throw TimeError("snapshot times must be non-decreasing");
    v = u.advance(v, t - now, opt);
    now = t;
    ScalarField f = to_field(f0.grid, v);
    r.times.push_back(t);
    r.mass.push_back(live_mass(f));
    r.min_value.push_back(f.min());
    r.sup_norm.push_back(f.sup_norm());
    r.fields.push_back(std::move(f));
  }
  const double scale = std::max(std::abs(live_mass(f0)), 1e-300);
  double previous = live_mass(f0);
  for (double m : r.mass) {
    if (m < previous - opt.tol * scale) r.mass_decreasing = true;
    previous = m;
  }
  return r;
}

}  // namespace

std::vector<double> poisson_weights(double m, double tol) {
  check_tol(tol);
  if (!(m >= 0.0) || !std::isfinite(m)) throw PreconditionViolated("Poisson mean must be finite and non-negative");
  if (m == 0.0) return {1.0};
  const long n_max = series_length(m, tol);
  // Lower Chernoff bound P(N <= m - k) <= exp(-k^2 / (2 m)).
  const double k_low = std::sqrt(2.0 * m * std::log(2.0 / tol));
  const long n_min = std::max(0L, static_cast<long>(std::floor(m - k_low)));
  std::vector<double> w(static_cast<std::size_t>(n_max + 1), 0.0);
  const double log_m = std::log(m);
  double total = 0.0;
  for (long n = n_min; n <= n_max; ++n) {
    const double v = std::exp(-m + n * log_m - std::lgamma(static_cast<double>(n) + 1.0));
    w[static_cast<std::size_t>(n)] = v;
    total += v;
  }
  for (double& v : w) v /= total;
  return w;
}

double uniformization_rate(const DiscreteGenerator& q) { return 1.05 * q.lambda_max; }

ScalarField evolve_observable(const DiscreteGenerator& q, const ScalarField& f0, double t,
                              const UniformizationOptions& opt) {
  return evolve(q, q.q, f0, {t}, opt).fields.front();
}

ScalarField evolve_density(const DiscreteGenerator& q, const ScalarField& nu0, double t,
                           const UniformizationOptions& opt) {
  return evolve(q, adjoint_qmatrix(q), nu0, {t}, opt).fields.front();
}

EvolutionResult evolve_density(const DiscreteGenerator& q, const ScalarField& nu0, const std::vector<double>& times,
                               const UniformizationOptions& opt) {
  return evolve(q, adjoint_qmatrix(q), nu0, times, opt);
}

EvolutionResult evolve_observable(const DiscreteGenerator& q, const ScalarField& f0,
                                  const std::vector<double>& times, const UniformizationOptions& opt) {
  return evolve(q, q.q, f0, times, opt);
}

TransitionKernel transition_kernel(const DiscreteGenerator& q, double t, double tol) {
  check_time(t);
  check_tol(tol);
  const Eigen::Index n = static_cast<Eigen::Index>(q.size());
  TransitionKernel k;
  k.t = t;
  k.tol = tol;
  const double lambda = uniformization_rate(q);
  if (t == 0.0 || lambda == 0.0) {
    k.p = Eigen::MatrixXd::Identity(n, n);
    return k;
  }
  // Keep the series short and recover the horizon by squaring.
  int squarings = 0;
  while (lambda * t / std::ldexp(1.0, squarings) > 8.0) ++squarings;
  const double piece_tol = tol / std::ldexp(1.0, squarings);
  const std::vector<double> w = poisson_weights(lambda * t / std::ldexp(1.0, squarings), std::max(piece_tol, 1e-300));
  const SparseMatrix p = stochastic_matrix(q.q, lambda);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd acc = w[0] * term;
  for (std::size_t i = 1; i < w.size(); ++i) {
    term = p * term;
    acc += w[i] * term;
  }
  for (int s = 0; s < squarings; ++s) acc = (acc * acc).eval();
  k.p = std::move(acc);
  k.squarings = squarings;
  k.row_sum_defect = (k.p.rowwise().sum().array() - 1.0).abs().maxCoeff();
  return k;
}

double chapman_kolmogorov_defect(const DiscreteGenerator& q, double t, double s, double tol) {
  const TransitionKernel pt = transition_kernel(q, t, tol);
  const TransitionKernel ps = transition_kernel(q, s, tol);
  const TransitionKernel pts = transition_kernel(q, t + s, tol);
  return (pts.p - pt.p * ps.p).cwiseAbs().rowwise().sum().maxCoeff();
}

ScalarField resolvent(const DiscreteGenerator& q, double lambda, const ScalarField& g) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw SpectrumError("resolvent needs lambda > 0");
  check_field(q, g);
  // Positive and negative parts are solved separately so every solve has a
  // non-negative right-hand side.
  std::vector<double> plus(g.size());
  std::vector<double> minus(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    plus[i] = std::max(g[i], 0.0);
    minus[i] = std::max(-g[i], 0.0);
  }
  const std::vector<double> fp = solve_killed_chain(q.q, lambda, plus);
  const std::vector<double> fm = solve_killed_chain(q.q, lambda, minus);
  std::vector<double> f(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) f[i] = fp[i] - fm[i];
  return ScalarField(g.grid, std::move(f));
}

MomentRecovery recover_coefficients(const TransitionKernel& p, const Grid& grid) {
  if (grid.dimension() != 1) throw ShapeError("moment recovery is one dimensional");
  if (static_cast<std::size_t>(p.p.rows()) != grid.size()) throw ShapeError("kernel size does not match the grid");
  if (!(p.t > 0.0)) throw TimeError("moment recovery needs t > 0");
  MomentRecovery m;
  m.t = p.t;
  m.drift = ScalarField(grid, 0.0);
  m.diffusion = ScalarField(grid, 0.0);
  m.third_moment = ScalarField(grid, 0.0);
  const std::size_t n = grid.size();
  for (std::size_t i = 0; i < n; ++i) {
    double m1 = 0.0;
    double m2 = 0.0;
    double m3 = 0.0;
    const double xi = grid.x(i);
    for (std::size_t j = 0; j < n; ++j) {
      const double pij = p.p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      const double d = grid.x(j) - xi;
      m1 += pij * d;
      m2 += pij * d * d;
      m3 += pij * std::abs(d) * d * d;
    }
    m.drift[i] = m1 / p.t;
    m.diffusion[i] = m2 / (2.0 * p.t);
    m.third_moment[i] = m3 / p.t;
  }
  return m;
}

MomentRecovery recover_coefficients(const DiscreteGenerator& q, double t_small, double tol) {
  MomentRecovery m = recover_coefficients(transition_kernel(q, t_small, tol), q.grid);
  m.lambda_t = q.lambda_max * t_small;
  m.bias_warning = m.lambda_t > 0.1;
  const std::size_t n = q.size();
  Eigen::VectorXd x(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) x(static_cast<Eigen::Index>(i)) = q.grid.x(i);
  const Eigen::VectorXd x2 = x.cwiseProduct(x);
  const Eigen::VectorXd q2x = q.q * (q.q * x);
  const Eigen::VectorXd q2x2 = q.q * (q.q * x2);
  m.drift_bias = ScalarField(q.grid, 0.0);
  m.diffusion_bias = ScalarField(q.grid, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    m.drift_bias[i] = 0.5 * t_small * q2x(k);
    m.diffusion_bias[i] = 0.25 * t_small * (q2x2(k) - 2.0 * x(k) * q2x(k));
  }
  return m;
}

namespace {

double ball_defect(const Eigen::MatrixXd& p, const Grid& grid, std::size_t node, double radius) {
  double inside = 0.0;
  const Vec xi = grid.coordinate(node);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if ((grid.coordinate(j) - xi).norm() <= radius) {
      inside += p(static_cast<Eigen::Index>(node), static_cast<Eigen::Index>(j));
    }
  }
  return std::max(0.0, 1.0 - inside);
}

bool ball_inside(const Grid& grid, std::size_t node, double radius) {
  const Vec x = grid.coordinate(node);
  for (int d = 0; d < grid.dimension(); ++d) {
    if (x(d) - radius < grid.axis(d).lo || x(d) + radius > grid.axis(d).hi) return false;
  }
  return true;
}

}  // namespace

std::vector<double> stochastic_continuity_defect(const DiscreteGenerator& q, std::size_t node, double radius,
                                                 const std::vector<double>& times, double tol) {
  if (node >= q.size()) throw ShapeError("node index out of range");
  std::vector<double> out;
  for (double t : times) {
    if (t == 0.0) {
      out.push_back(0.0);
      continue;
    }
    out.push_back(ball_defect(transition_kernel(q, t, tol).p, q.grid, node, radius));
  }
  return out;
}

std::vector<double> uniform_continuity_defect(const DiscreteGenerator& q, double radius,
                                              const std::vector<double>& times, double tol) {
  std::vector<double> out;
  for (double t : times) {
    if (t == 0.0) {
      out.push_back(0.0);
      continue;
    }
    const TransitionKernel k = transition_kernel(q, t, tol);
    double worst = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      if (ball_inside(q.grid, i, radius)) worst = std::max(worst, ball_defect(k.p, q.grid, i, radius));
    }
    out.push_back(worst);
  }
  return out;
}

}  // namespace kinetic
