#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "kinetic/errors.hpp"
#include "kinetic/generator.hpp"

using namespace kinetic;

namespace {

Expression E(const char* s) { return Expression::parse(s); }

GeneratorSpec ou() { return catalog_example("ornstein-uhlenbeck").spec; }

}  // namespace

TEST(Generator, AppliesToTestFunctions) {
  const auto a2a = catalog_example("appendix2a", 1.0);
  EXPECT_NEAR(apply_generator(a2a.spec, SmoothFunction::from_expression(E("x"), 1), point(1.0)), -1.0, 1e-14);
  EXPECT_NEAR(apply_generator(ou(), SmoothFunction::from_expression(E("x^2"), 1), point(0.0)), 2.0, 1e-14);
  for (const auto& name : catalog_names()) {
    const auto ex = catalog_example(name, 1.0);
    EXPECT_EQ(apply_generator(ex.spec, SmoothFunction::from_expression(E("1"), 1), point(0.7)), 0.0) << name;
  }
}

TEST(Generator, JetAndSampledFunctionsAgree) {
  const auto spec = catalog_example("appendix2a", 1.0).spec;
  const auto jet = SmoothFunction::from_jet([](const Jet& x) { return sin(x) * exp(x * 0.3); });
  const auto sampled = SmoothFunction::sampled([](const Vec& x) { return std::sin(x(0)) * std::exp(0.3 * x(0)); });
  for (double x : {-2.0, 0.0, 1.3}) {
    EXPECT_NEAR(apply_generator(spec, jet, point(x)), apply_generator(spec, sampled, point(x)), 1e-8);
  }
}

TEST(Generator, IsLinearInTheTestFunction) {
  const auto spec = catalog_example("appendix2a", 1.0).spec;
  const auto f = SmoothFunction::from_expression(E("exp(-x^2)"), 1);
  const auto g = SmoothFunction::from_expression(E("x^3 - x"), 1);
  const double alpha = 2.5;
  const auto h = SmoothFunction::from_expression(E("2.5*exp(-x^2) + (x^3 - x)"), 1);
  for (double x : {-1.5, 0.2, 3.0}) {
    const double lhs = apply_generator(spec, h, point(x));
    const double rhs = alpha * apply_generator(spec, f, point(x)) + apply_generator(spec, g, point(x));
    EXPECT_NEAR(lhs, rhs, 1e-12 * (1.0 + std::abs(rhs)));
  }
}

TEST(Generator, RejectsPointsOutsideTheDomain) {
  const auto f = SmoothFunction::from_expression(E("x"), 1);
  EXPECT_THROW(apply_generator(ou(), f, point(9.0)), DomainError);
  EXPECT_THROW(apply_generator(ou(), f, point(-8.0)), DomainError);
  const auto sampled = SmoothFunction::sampled([](const Vec& x) { return x(0); });
  EXPECT_THROW(apply_generator(ou(), sampled, point(-8.0 + 1e-4)), InsufficientSmoothness);
}

TEST(Generator, FormalAdjointExamples) {
  const auto a2a = catalog_example("appendix2a", 1.0);
  for (double x : {-9.0, -1.0, 0.0, 0.5, 7.0}) {
    EXPECT_NEAR(apply_formal_adjoint(a2a.spec, a2a.equilibrium.density, point(x)), 0.0, 1e-10);
    EXPECT_NEAR(apply_formal_adjoint(ou(), SmoothFunction::from_expression(E("exp(-x^2/2)"), 1), point(x * 0.8)),
                0.0, 1e-14);
  }
  const auto pure = catalog_example("pure-diffusion").spec;
  EXPECT_NEAR(apply_formal_adjoint(pure, SmoothFunction::from_expression(E("x^2"), 1), point(3.0)), 2.0, 1e-13);
}

TEST(Generator, FormalAdjointWithoutCoefficientDerivatives) {
  // Same generator through callbacks only, so the adjoint falls back to
  // differences of a rho and b rho.
  GeneratorSpec spec;
  spec.dimension = 1;
  spec.a = [](const Vec& x) { Mat m(1, 1); m(0, 0) = 1.0 + x(0) * x(0); return m; };
  spec.b = [](const Vec& x) { Vec v(1); v(0) = -x(0); return v; };
  spec.domain = DomainSpec::full_line(-10.0, 10.0);
  const auto rho = catalog_example("appendix2a", 1.0).equilibrium.density;
  for (double x : {-3.0, 0.0, 2.0}) EXPECT_NEAR(apply_formal_adjoint(spec, rho, point(x)), 0.0, 1e-7);
}

TEST(Generator, ResidualExamples) {
  const auto a2b = catalog_example("appendix2b", 1.0);
  const Grid g2b = Grid::uniform(0.05, 20.0, 400);
  EXPECT_LE(residual_invariant(a2b.spec, sample_equilibrium(a2b.equilibrium, g2b)), 1e-6);

  const auto o = catalog_example("ornstein-uhlenbeck");
  const Grid g = o.spec.domain.make_grid(401);
  EXPECT_LE(residual_invariant(o.spec, sample_equilibrium(o.equilibrium, g)), 1e-8);

  // rho0 = 1 is not invariant: Z^dagger 1 = d(x * 1) = 1.
  const auto wrong = equilibrium_from_values(ScalarField(g, 1.0));
  EXPECT_NEAR(residual_invariant(o.spec, wrong), 1.0, 1e-9);
}

TEST(Generator, FiniteDifferenceResidualIsSecondOrder) {
  for (const auto& name : catalog_names()) {
    const auto ex = catalog_example(name, 1.0);
    std::vector<double> r, h;
    // The half-line density is steep at its wall; coarser grids are not yet
    // in the asymptotic range there.
    for (int n : {801, 1601, 3201}) {
      const Grid g = ex.spec.domain.make_grid(n);
      r.push_back(residual_invariant(ex.spec, sample_equilibrium(ex.equilibrium, g), ResidualMethod::kFiniteDifference));
      h.push_back(g.axis(0).spacing());
    }
    if (r.back() < 1e-12) continue;  // exact on the grid (constant density)
    // Fit log r = log C + p log h over the three resolutions.
    double mx = 0, my = 0;
    for (int i = 0; i < 3; ++i) { mx += std::log(h[i]) / 3; my += std::log(r[i]) / 3; }
    double sxy = 0, sxx = 0;
    for (int i = 0; i < 3; ++i) {
      sxy += (std::log(h[i]) - mx) * (std::log(r[i]) - my);
      sxx += (std::log(h[i]) - mx) * (std::log(h[i]) - mx);
    }
    EXPECT_GT(sxy / sxx, 1.8) << name;
    const double c = std::exp(my - 2.0 * mx);
    for (int i = 0; i < 3; ++i) EXPECT_LE(r[i], 1.5 * c * h[i] * h[i]) << name;
  }
}

TEST(Generator, HiVanishesForTheCatalog) {
  const auto a2a = catalog_example("appendix2a", 1.0);
  const auto a2b = catalog_example("appendix2b", 1.0);
  const auto pure = catalog_example("pure-diffusion");
  for (double x : {-5.0, -0.3, 0.0, 2.0}) {
    EXPECT_NEAR(compute_Hi_at(a2a.spec, *a2a.equilibrium.gibbs, point(x))(0), 0.0, 1e-13);
    EXPECT_NEAR(compute_Hi_at(pure.spec, *pure.equilibrium.gibbs, point(x))(0), 0.0, 0.0);
  }
  for (double x : {0.1, 1.0, 7.5}) {
    EXPECT_NEAR(compute_Hi_at(a2b.spec, *a2b.equilibrium.gibbs, point(x))(0), 0.0, 1e-12);
  }
  // Grid version: analytic path and the sampled-energy path.
  const Grid g = a2a.spec.domain.make_grid(201);
  const auto rho = sample_equilibrium(a2a.equilibrium, g);
  for (double v : compute_Hi(a2a.spec, rho)[0].values) EXPECT_NEAR(v, 0.0, 1e-12);
  const auto inferred = equilibrium_from_values(rho.field);
  const auto hi = compute_Hi(a2a.spec, inferred)[0];
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(hi[k], 0.0, 2e-2) << k;
}

TEST(Generator, HiNeedsGibbsData) {
  const auto spec = ou();
  EquilibriumDensity bare;
  bare.field = ScalarField(spec.domain.make_grid(11), 1.0);
  EXPECT_THROW(compute_Hi(spec, bare), MissingGibbsForm);
}

TEST(Generator, AdjointIdentityWithHi) {
  // Z^dagger(phi rho0) = rho0 (Z phi - H_i d_i phi) + phi Z^dagger rho0 for a
  // generator whose H_i does not vanish. Checked with exact derivatives and
  // the closed form H = 2 (beta a H' - a' + b).
  const auto spec = GeneratorSpec::from_expressions(E("1 + x^2"), E("0.5 - x"), DomainSpec::full_line(-5, 5));
  const GibbsForm gibbs{1.0, E("x^2/2")};
  const Expression rho = E("exp(-x^2/2)");
  for (const char* phi_text : {"1 + 0.1*x", "exp(-(x - 1)^2)", "x^3 - 2*x"}) {
    const Expression phi = E(phi_text);
    const auto prod = SmoothFunction::from_expression(phi * rho, 1);
    const auto phi_f = SmoothFunction::from_expression(phi, 1);
    const auto rho_f = SmoothFunction::from_expression(rho, 1);
    for (double x : {-2.0, -0.5, 0.0, 1.0, 3.0}) {
      const Vec p = point(x);
      const double hi = compute_Hi_at(spec, gibbs, p)(0);
      const double expected_hi = 2.0 * ((1 + x * x) * x - 2 * x + 0.5 - x);
      EXPECT_NEAR(hi, expected_hi, 1e-12);
      const double lhs = apply_formal_adjoint(spec, prod, p);
      const double rhs = rho(p) * (apply_generator(spec, phi_f, p) - hi * phi.derivative(0)(p)) +
                         phi(p) * apply_formal_adjoint(spec, rho_f, p);
      EXPECT_NEAR(lhs, rhs, 1e-11 * (1 + std::abs(rhs))) << phi_text << " x=" << x;
    }
  }
}

TEST(Generator, DiscreteDualityIsSecondOrder) {
  // sum phi (Z f) dx - sum (Z^dagger phi) f dx for bumps supported inside.
  const auto spec = catalog_example("appendix2a", 1.0).spec;
  auto bump = [](double c) {
    return [c](const Jet& x) {
      const Jet u = (x - c) * 0.5;
      const Jet v = 1.0 - u * u;
      return v * v * v * v * v;
    };
  };
  auto inside = [](double x, double c) { return std::abs(x - c) < 2.0; };
  std::vector<double> err;
  for (int n : {201, 401, 801}) {
    const Grid g = Grid::uniform(-10, 10, n);
    const auto f = SmoothFunction::from_jet(bump(0.5));
    ScalarField phi(g, 0.0);
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (inside(g.x(k), -0.5)) phi[k] = bump(-0.5)(Jet(g.x(k), 0)).value();
    }
    const ScalarField zphi = formal_adjoint_on_grid(spec, phi);
    double lhs = 0, rhs = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double x = g.x(k);
      const double fx = inside(x, 0.5) ? f.value(point(x)) : 0.0;
      const double zf = inside(x, 0.5) ? apply_generator(spec, f, point(x)) : 0.0;
      lhs += phi[k] * zf * g.weight();
      rhs += zphi[k] * fx * g.weight();
    }
    err.push_back(std::abs(lhs - rhs));
  }
  EXPECT_LT(err[0], 1e-2);
  EXPECT_NEAR(err[0] / err[1], 4.0, 1.0);
  EXPECT_NEAR(err[1] / err[2], 4.0, 1.0);
}

TEST(Generator, CatalogEntries) {
  const auto a1 = catalog_example("appendix2a", 1.0);
  EXPECT_DOUBLE_EQ(a1.spec.a(point(2.0))(0, 0), 5.0);
  EXPECT_DOUBLE_EQ(a1.spec.b(point(2.0))(0), -2.0);
  EXPECT_TRUE(a1.equilibrium.normalizable);
  EXPECT_NEAR(a1.equilibrium.total_mass, 2.0, 1e-12);  // int (1 + x^2)^-3/2 dx
  EXPECT_NEAR(a1.equilibrium.density.value(point(1.0)), std::pow(2.0, -1.5), 1e-15);

  const auto a0 = catalog_example("appendix2a", 0.0);
  EXPECT_FALSE(a0.equilibrium.normalizable);
  EXPECT_TRUE(std::isinf(a0.equilibrium.total_mass));
  EXPECT_NEAR(a0.equilibrium.density.value(point(1.0)), std::pow(2.0, -0.5), 1e-15);

  const auto o = catalog_example("ornstein-uhlenbeck");
  EXPECT_DOUBLE_EQ(o.spec.a(point(3.0))(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(o.spec.b(point(3.0))(0), -3.0);
  EXPECT_NEAR(o.equilibrium.total_mass, std::sqrt(2 * std::numbers::pi), 1e-14);

  EXPECT_THROW(catalog_example("ou"), UnknownExample);
  EXPECT_THROW(catalog_example("appendix2a", -0.6), ParameterOutOfRange);
  EXPECT_NO_THROW(catalog_example("appendix2b", -0.5));
  EXPECT_EQ(catalog_names().size(), 4u);
}

TEST(Generator, OrnsteinUhlenbeckBoxHoldsTheMass) {
  const auto o = catalog_example("ornstein-uhlenbeck");
  const auto rho = sample_equilibrium(o.equilibrium, o.spec.domain.make_grid(1601));
  EXPECT_NEAR(rho.field.integral() / o.equilibrium.total_mass, 1.0, 1e-6);
}

TEST(Generator, Admissibility) {
  const Grid g = Grid::uniform(-1, 1, 11);
  const auto bad = GeneratorSpec::from_expressions(E("-1"), E("0"), DomainSpec::full_line(-1, 1));
  EXPECT_THROW(check_admissible(bad, g), NonEllipticCoefficient);
  const auto edge = GeneratorSpec::from_expressions(E("x^2"), E("0"), DomainSpec::full_line(-1, 1));
  EXPECT_NO_THROW(check_admissible(edge, g));
  EXPECT_DOUBLE_EQ(diffusion_floor(edge, point(0.0)), 0.0);

  EXPECT_THROW(DomainSpec::half_line(0.0, 1.0).validate(), DomainError);
  EXPECT_THROW(DomainSpec::full_line(1.0, 1.0).validate(), DomainError);
  EXPECT_NO_THROW(DomainSpec::half_line(0.05, 20.0).validate());
}

TEST(Generator, EquilibriumDensityValidation) {
  const auto a1 = catalog_example("appendix2a", 1.0);
  const Grid g = a1.spec.domain.make_grid(101);
  auto rho = sample_equilibrium(a1.equilibrium, g);
  EXPECT_NO_THROW(rho.validate());
  const auto n = normalize_on_grid(rho);
  EXPECT_TRUE(n.normalized);
  EXPECT_NEAR(n.field.integral(), 1.0, 1e-14);
  rho.field[50] *= 1.001;
  EXPECT_THROW(rho.validate(), PreconditionViolated);
  EXPECT_THROW(normalize_on_grid(equilibrium_from_values(ScalarField(g, 0.0))), PreconditionViolated);
}
