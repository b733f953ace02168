#include <cmath>
#include <random>

#include <Eigen/LU>
#include <gtest/gtest.h>

#include "kinetic/errors.hpp"
#include "kinetic/semigroup.hpp"

using namespace kinetic;

namespace {

DiscreteGenerator two_state() {
  Eigen::MatrixXd m(2, 2);
  m << -1, 1, 1, -1;
  return DiscreteGenerator::from_dense(m);
}

ScalarField field(const DiscreteGenerator& q, std::vector<double> v) { return ScalarField(q.grid, std::move(v)); }

// Q-matrices used by the property batteries: every catalog entry plus a few
// hand-written chains.
std::vector<DiscreteGenerator> battery(int nodes) {
  std::vector<DiscreteGenerator> out;
  for (const auto& name : catalog_names()) {
    const auto ex = catalog_example(name, 1.0);
    out.push_back(build_qmatrix(ex.spec, ex.spec.domain.make_grid(nodes)));
  }
  const auto a0 = catalog_example("appendix2a", 0.0);
  out.push_back(build_qmatrix(a0.spec, a0.spec.domain.make_grid(nodes)));
  out.push_back(two_state());
  Eigen::MatrixXd m(3, 3);
  m << -3, 2, 1, 0.5, -0.5, 0, 0, 4, -4;
  out.push_back(DiscreteGenerator::from_dense(m));
  return out;
}

}  // namespace

TEST(Uniformization, PoissonWeights) {
  for (double m : {0.0, 0.3, 4.0, 250.0, 5000.0}) {
    const auto w = poisson_weights(m, 1e-12);
    double s = 0, mean = 0;
    for (std::size_t n = 0; n < w.size(); ++n) {
      EXPECT_GE(w[n], 0.0);
      s += w[n];
      mean += static_cast<double>(n) * w[n];
    }
    EXPECT_NEAR(s, 1.0, 1e-14);
    EXPECT_NEAR(mean, m, 1e-9 * (1 + m));
  }
  EXPECT_EQ(poisson_weights(0.0, 1e-12).size(), 1u);
  EXPECT_THROW(poisson_weights(-1.0, 1e-12), PreconditionViolated);
  EXPECT_DOUBLE_EQ(uniformization_rate(two_state()), 1.05);
}

TEST(Semigroup, TwoStateObservable) {
  const auto q = two_state();
  const auto f = evolve_observable(q, field(q, {1, 0}), 1.0);
  EXPECT_NEAR(f[0], (1 + std::exp(-2.0)) / 2, 1e-12);
  EXPECT_NEAR(f[1], (1 - std::exp(-2.0)) / 2, 1e-12);
  EXPECT_NEAR(f[0], 0.5677, 1e-4);
  EXPECT_NEAR(f[1], 0.4323, 1e-4);
  const auto zero = evolve_observable(q, field(q, {0.3, 0.9}), 0.0);
  EXPECT_EQ(zero[0], 0.3);
  EXPECT_EQ(zero[1], 0.9);
}

TEST(Semigroup, ConstantsArePreserved) {
  for (const auto& q : battery(101)) {
    const auto f = evolve_observable(q, ScalarField(q.grid, 1.0), 0.7);
    for (double v : f.values) EXPECT_NEAR(v, 1.0, 1e-12);
  }
}

TEST(Semigroup, TwoStateDensityRelaxes) {
  const auto q = two_state();
  const auto nu = evolve_density(q, field(q, {1, 0}), 40.0);
  EXPECT_NEAR(nu[0], 0.5, 1e-12);
  EXPECT_NEAR(nu[1], 0.5, 1e-12);
}

TEST(Semigroup, TransitionKernelClosedForms) {
  const auto zero = DiscreteGenerator::from_dense(Eigen::MatrixXd::Zero(3, 3));
  for (double t : {0.0, 1.0, 100.0}) EXPECT_EQ(transition_kernel(zero, t).p, Eigen::MatrixXd::Identity(3, 3));
  const auto p = transition_kernel(two_state(), std::log(2.0) / 2);
  Eigen::MatrixXd expected(2, 2);
  expected << 0.75, 0.25, 0.25, 0.75;
  EXPECT_LT((p.p - expected).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(p.row_sum_defect, 1e-10);
  EXPECT_EQ(transition_kernel(two_state(), 0.0).p, Eigen::MatrixXd::Identity(2, 2));
}

TEST(Semigroup, ChapmanKolmogorov) {
  EXPECT_LE(chapman_kolmogorov_defect(two_state(), 0.5, 0.5), 1e-10);
  EXPECT_EQ(chapman_kolmogorov_defect(two_state(), 0.0, 0.4), 0.0);
  for (const auto& q : battery(61)) {
    for (auto [t, s] : {std::pair{0.1, 0.2}, std::pair{0.3, 0.7}, std::pair{1.0, 0.05}}) {
      EXPECT_LE(chapman_kolmogorov_defect(q, t, s), 3e-12) << q.size();
    }
  }
}

TEST(Semigroup, KernelIsStochastic) {
  for (const auto& q : battery(61)) {
    const auto p = transition_kernel(q, 0.8);
    EXPECT_GE(p.p.minCoeff(), 0.0);
    EXPECT_LE(p.row_sum_defect, 1e-10);
  }
}

TEST(Semigroup, Resolvent) {
  const auto q = two_state();
  const auto f = resolvent(q, 1.0, field(q, {1, 0}));
  EXPECT_NEAR(f[0], 2.0 / 3.0, 1e-14);
  EXPECT_NEAR(f[1], 1.0 / 3.0, 1e-14);
  const auto zero = DiscreteGenerator::from_dense(Eigen::MatrixXd::Zero(2, 2));
  const auto g = resolvent(zero, 4.0, field(zero, {2, -1}));
  EXPECT_DOUBLE_EQ(g[0], 0.5);
  EXPECT_DOUBLE_EQ(g[1], -0.25);
  for (const auto& p : battery(101)) {
    for (double lambda : {0.1, 1.0, 10.0}) {
      for (double v : resolvent(p, lambda, ScalarField(p.grid, 1.0)).values) EXPECT_NEAR(v * lambda, 1.0, 1e-12);
    }
  }
  EXPECT_THROW(resolvent(q, 0.0, field(q, {1, 0})), SpectrumError);
  EXPECT_THROW(resolvent(q, -1.0, field(q, {1, 0})), SpectrumError);
}

TEST(Semigroup, ResolventMatchesADenseSolve) {
  const auto ex = catalog_example("appendix2a", 1.0);
  const auto q = build_qmatrix(ex.spec, ex.spec.domain.make_grid(81));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  ScalarField g(q.grid, 0.0);
  for (auto& v : g.values) v = n(rng);
  const Eigen::MatrixXd dense = Eigen::MatrixXd(q.q);
  for (double lambda : {0.1, 1.0, 10.0}) {
    const Eigen::VectorXd gv = Eigen::Map<const Eigen::VectorXd>(g.values.data(), 81);
    const Eigen::VectorXd ref = (lambda * Eigen::MatrixXd::Identity(81, 81) - dense).partialPivLu().solve(gv);
    const auto f = resolvent(q, lambda, g);
    for (int i = 0; i < 81; ++i) EXPECT_NEAR(f[static_cast<std::size_t>(i)], ref(i), 1e-9 * (1 + std::abs(ref(i))));
  }
}

TEST(Semigroup, ResolventBoundProperty) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1, 1);
  for (const auto& q : battery(101)) {
    for (int trial = 0; trial < 20; ++trial) {
      ScalarField g(q.grid, 0.0);
      for (auto& v : g.values) v = u(rng);
      for (double lambda : {0.1, 1.0, 10.0}) {
        EXPECT_LE(lambda * resolvent(q, lambda, g).sup_norm(), g.sup_norm() * (1 + 1e-13));
      }
    }
  }
}

TEST(Semigroup, PositivityContractionAndMass) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_real_distribution<double> t(0.0, 3.0);
  for (const auto& q : battery(81)) {
    for (int trial = 0; trial < 10; ++trial) {
      ScalarField nu(q.grid, 0.0), f(q.grid, 0.0);
      for (std::size_t i = 0; i < nu.size(); ++i) {
        nu[i] = u(rng) < 0.3 ? 0.0 : u(rng);
        f[i] = 2 * u(rng) - 1;
      }
      const double time = t(rng);
      const auto nt = evolve_density(q, nu, time);
      EXPECT_GE(nt.min(), -1e-12 * nu.sup_norm());
      EXPECT_NEAR(nt.integral(), nu.integral(), 1e-11 * nu.integral());
      const auto ft = evolve_observable(q, f, time);
      EXPECT_LE(ft.sup_norm(), f.sup_norm() + 1e-12);
    }
  }
}

TEST(Semigroup, DissipativeAtTheMaximum) {
  std::mt19937_64 rng(1234);
  std::normal_distribution<double> n;
  for (const auto& q : battery(81)) {
    for (int trial = 0; trial < 50; ++trial) {
      Eigen::VectorXd f(static_cast<Eigen::Index>(q.size()));
      for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = n(rng);
      if (trial % 5 == 0) f.setConstant(0.25);  // ties: the lowest index is the argmax
      Eigen::Index arg = 0;
      f.maxCoeff(&arg);
      const Eigen::VectorXd qf = q.q * f;
      EXPECT_LE(qf(arg), 1e-12);
    }
  }
}

TEST(Semigroup, EvolutionSnapshots) {
  const auto ex = catalog_example("ornstein-uhlenbeck");
  const auto q = build_qmatrix(ex.spec, ex.spec.domain.make_grid(101));
  ScalarField nu(q.grid, 0.0);
  nu[60] = 1.0 / q.grid.weight();
  const auto r = evolve_density(q, nu, {0.0, 0.5, 1.0, 1.0, 2.0});
  ASSERT_EQ(r.fields.size(), 5u);
  EXPECT_EQ(r.fields[0].values, nu.values);
  EXPECT_EQ(r.fields[2].values, r.fields[3].values);
  const auto direct = evolve_density(q, nu, 2.0);
  for (std::size_t i = 0; i < nu.size(); ++i) EXPECT_NEAR(r.fields[4][i], direct[i], 1e-11);
  for (double m : r.mass) EXPECT_NEAR(m, 1.0, 1e-11);
  EXPECT_FALSE(r.mass_decreasing);
  EXPECT_THROW(evolve_density(q, nu, {1.0, 0.5}), TimeError);
  EXPECT_THROW(evolve_density(q, nu, -0.1), TimeError);
  UniformizationOptions bad;
  bad.tol = 1e-3;
  EXPECT_THROW(evolve_density(q, nu, 1.0, bad), PreconditionViolated);
}

TEST(Semigroup, AbsorbingWallsLoseMass) {
  auto spec = catalog_example("ornstein-uhlenbeck").spec;
  spec.domain.boundary_condition = BoundaryCondition::kAbsorbing;
  const auto q = build_qmatrix(spec, spec.domain.make_grid(41));
  ScalarField nu(q.grid, 0.0);
  nu[2] = 1.0 / q.grid.weight();
  const auto r = evolve_density(q, nu, {0.0, 0.2, 0.4});
  EXPECT_TRUE(r.mass_decreasing);
  EXPECT_LT(r.mass.back(), 1.0);
}

TEST(Semigroup, LongHorizonsSplit) {
  const auto ex = catalog_example("appendix2a", 1.0);
  const auto q = build_qmatrix(ex.spec, ex.spec.domain.make_grid(101));
  ScalarField nu(q.grid, 0.0);
  nu[70] = 1.0 / q.grid.weight();
  UniformizationOptions capped;
  capped.max_terms = 2000;
  const double t = 5.0;  // lambda t is several thousand
  const auto split = evolve_density(q, nu, t, capped);
  const auto full = evolve_density(q, nu, t);
  for (std::size_t i = 0; i < nu.size(); ++i) EXPECT_NEAR(split[i], full[i], 1e-10);
  capped.split_long_horizons = false;
  EXPECT_THROW(evolve_density(q, nu, t, capped), TruncationBudgetExceeded);
}

TEST(Semigroup, RecoversOrnsteinUhlenbeckCoefficients) {
  const auto ex = catalog_example("ornstein-uhlenbeck");
  const auto q = build_qmatrix(ex.spec, ex.spec.domain.make_grid(400));
  const auto m = recover_coefficients(q, 1e-3);
  const double dx = q.grid.axis(0).spacing();
  EXPECT_TRUE(m.bias_warning);
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double x = q.grid.x(i);
    if (std::abs(x) > 4.0) continue;
    EXPECT_NEAR(m.diffusion[i], 1.0, 0.02) << x;
    EXPECT_NEAR(m.drift[i], -x, 0.02 * std::max(std::abs(x), 1.0)) << x;
    EXPECT_LE(m.third_moment[i], 10 * dx * m.diffusion[i]);
  }
  // The reported O(t) bias accounts for most of the departure.
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double x = q.grid.x(i);
    if (std::abs(x) > 4.0) continue;
    const double raw = std::abs(m.diffusion[i] - 1.0);
    const double corrected = std::abs(m.diffusion[i] - m.diffusion_bias[i] - 1.0);
    EXPECT_LT(corrected, std::max(raw, 2e-3)) << x;
  }
}

TEST(Semigroup, RecoversPureDiffusion) {
  const auto ex = catalog_example("pure-diffusion");
  const auto q = build_qmatrix(ex.spec, ex.spec.domain.make_grid(201));
  const auto m = recover_coefficients(q, 1e-3);
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (std::abs(q.grid.x(i)) > 5.0) continue;
    EXPECT_NEAR(m.drift[i], 0.0, 1e-9);
    EXPECT_NEAR(m.diffusion[i], 1.0, 1e-9);
  }
}

TEST(Semigroup, ThirdMomentVanishesWithTime) {
  const auto ex = catalog_example("ornstein-uhlenbeck");
  const auto q = build_qmatrix(ex.spec, ex.spec.domain.make_grid(400));
  double previous = INFINITY;
  for (double t : {1e-2, 5e-3, 2.5e-3}) {
    const auto m = recover_coefficients(q, t);
    double worst = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      if (std::abs(q.grid.x(i)) <= 4.0) worst = std::max(worst, m.third_moment[i]);
    }
    EXPECT_LT(worst, previous);
    previous = worst;
  }
  EXPECT_THROW(recover_coefficients(q, 0.0), TimeError);
}

TEST(Semigroup, StochasticContinuity) {
  const auto q = two_state();
  const std::vector<double> times{0.0, 0.1, 0.01, 0.001};
  const auto d = stochastic_continuity_defect(q, 0, 0.5, times);
  for (std::size_t k = 0; k < times.size(); ++k) EXPECT_NEAR(d[k], (1 - std::exp(-2 * times[k])) / 2, 1e-12);
  EXPECT_EQ(d[0], 0.0);

  const auto ex = catalog_example("appendix2a", 1.0);
  const auto qa = build_qmatrix(ex.spec, ex.spec.domain.make_grid(201));
  const double r = 5 * qa.grid.axis(0).spacing();
  const std::vector<double> ts{1e-3, 1e-4, 1e-5, 1e-6};
  const auto u = uniform_continuity_defect(qa, r, ts);
  for (std::size_t k = 0; k < ts.size(); ++k) {
    EXPECT_LE(u[k], qa.lambda_max * ts[k] * 1.01);
    if (k > 0) EXPECT_LT(u[k], u[k - 1]);
  }
  EXPECT_THROW(stochastic_continuity_defect(q, 5, 0.5, times), ShapeError);
}
