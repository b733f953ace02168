#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "kinetic/discretize.hpp"
#include "kinetic/errors.hpp"
#include "kinetic/pawula.hpp"

using namespace kinetic;

namespace {

Expression E(const std::string& s) { return Expression::parse(s); }

double entry(const SparseMatrix& q, int i, int j) { return q.coeff(i, j); }

}  // namespace

TEST(Bernoulli, ValuesAndLimits) {
  EXPECT_EQ(bernoulli(0.0), 1.0);
  EXPECT_NEAR(bernoulli(1e-9), 1.0 - 0.5e-9, 1e-15);
  EXPECT_NEAR(bernoulli(1.0), 1.0 / (std::exp(1.0) - 1.0), 1e-15);
  EXPECT_NEAR(bernoulli(-2.0), -2.0 / (std::exp(-2.0) - 1.0), 1e-15);
  EXPECT_NEAR(bernoulli(-1e14), 1e14, 1e-2);
  EXPECT_GE(bernoulli(800.0), 0.0);
  EXPECT_LT(bernoulli(800.0), 1e-300);
  // B(-z) - B(z) = z.
  for (double z : {-30.0, -1.0, 0.3, 5.0}) EXPECT_NEAR(bernoulli(-z) - bernoulli(z), z, 1e-13 * (1 + std::abs(z)));
}

TEST(BuildQMatrix, PureDiffusionGivesTheLaplacian) {
  const auto spec = GeneratorSpec::from_expressions(E("1"), E("0"), DomainSpec::full_line(0, 4));
  const auto q = build_qmatrix(spec, Grid::uniform(0, 4, 5));
  EXPECT_EQ(entry(q.q, 2, 1), 1.0);
  EXPECT_EQ(entry(q.q, 2, 2), -2.0);
  EXPECT_EQ(entry(q.q, 2, 3), 1.0);
  // No-flux end rows keep only the inward jump.
  EXPECT_EQ(entry(q.q, 0, 1), 1.0);
  EXPECT_EQ(entry(q.q, 0, 0), -1.0);
  EXPECT_EQ(q.lambda_max, 2.0);
  // Symmetric, so the adjoint equals Q.
  EXPECT_EQ((SparseMatrix(adjoint_qmatrix(q)) - q.q).norm(), 0.0);
}

TEST(BuildQMatrix, PureDriftIsUpwind) {
  const auto spec = GeneratorSpec::from_expressions(E("0"), E("1"), DomainSpec::full_line(0, 4));
  for (Scheme s : {Scheme::kExponentialFitting, Scheme::kUpwind}) {
    const auto q = build_qmatrix(spec, Grid::uniform(0, 4, 5), s);
    EXPECT_EQ(entry(q.q, 2, 1), 0.0);
    EXPECT_EQ(entry(q.q, 2, 2), -1.0);
    EXPECT_EQ(entry(q.q, 2, 3), 1.0);
  }
  // The fitted formula at a = 1e-13 (just above the threshold) approaches the
  // same row.
  const auto near = GeneratorSpec::from_expressions(E("1e-13"), E("1"), DomainSpec::full_line(0, 4));
  const auto q = build_qmatrix(near, Grid::uniform(0, 4, 5));
  EXPECT_NEAR(entry(q.q, 2, 3), 1.0, 1e-12);
  EXPECT_NEAR(entry(q.q, 2, 1), 0.0, 1e-12);
}

TEST(BuildQMatrix, ChainMomentsMatchTheCoefficients) {
  // Drift exactly b, half second moment a (z/2) coth(z/2), z = b dx / a.
  const auto spec = catalog_example("appendix2a", 1.0).spec;
  const Grid g = Grid::uniform(-10, 10, 201);
  const auto q = build_qmatrix(spec, g);
  for (int i = 1; i < 200; i += 7) {
    const double x = g.x(static_cast<std::size_t>(i)), h = g.axis(0).spacing();
    const double a = 1 + x * x, b = -x;
    double m1 = 0, m2 = 0;
    for (SparseMatrix::InnerIterator it(q.q, i); it; ++it) {
      const double dx = (it.col() - i) * h;
      m1 += it.value() * dx;
      m2 += it.value() * dx * dx;
    }
    const double z = b * h / a;
    const double expected = z == 0.0 ? a : a * (z / 2) / std::tanh(z / 2);
    EXPECT_NEAR(m1, b, 1e-12 * (1 + std::abs(b)));
    EXPECT_NEAR(m2 / 2, expected, 1e-12 * expected);
  }
}

TEST(BuildQMatrix, CatalogPassesTheMaximumPrinciple) {
  const auto spec = catalog_example("appendix2a", 1.0).spec;
  const auto q = build_qmatrix(spec, spec.domain.make_grid(201));
  const auto r = maximum_principle_check(q);
  EXPECT_TRUE(r.passed);
  EXPECT_GE(r.min_off_diagonal, 0.0);
  EXPECT_LE(max_row_sum(q.q), 1e-12);
  for (const auto& name : catalog_names()) {
    for (Scheme s : {Scheme::kExponentialFitting, Scheme::kUpwind}) {
      const auto ex = catalog_example(name, 0.5);
      EXPECT_EQ(max_row_sum(build_qmatrix(ex.spec, ex.spec.domain.make_grid(101), s).q), 0.0) << name;
    }
  }
}

TEST(BuildQMatrix, CentralDifferencesViolateTheMaximumPrinciple) {
  const auto spec = GeneratorSpec::from_expressions(E("0"), E("1"), DomainSpec::full_line(0, 2));
  const SparseMatrix c = assemble_central(spec, Grid::uniform(0, 2, 3));
  EXPECT_DOUBLE_EQ(entry(c, 1, 0), -0.5);
  const auto r = maximum_principle_check(c);
  EXPECT_FALSE(r.passed);
  EXPECT_DOUBLE_EQ(r.min_off_diagonal, -0.5);
}

TEST(BuildQMatrix, RandomAdmissibleSpecsPassTheMaximumPrinciple) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_int_distribution<int> nodes(3, 80);
  for (int trial = 0; trial < 200; ++trial) {
    const double c0 = std::abs(u(rng)), c1 = u(rng), c2 = std::abs(u(rng)), s = 3 * u(rng), t = u(rng);
    // a is non-negative, with zeros when c0 = 0 or at the square root.
    const std::string a = std::to_string(c0) + "*(x - " + std::to_string(t) + ")^2 + " +
                          std::to_string(trial % 3 == 0 ? 0.0 : c2) + "*exp(-x^2)";
    const std::string b = std::to_string(s) + "*x^2 - " + std::to_string(c1) + "*exp(x/3)";
    const double lo = -3 + u(rng) * 0.5, hi = 3 + u(rng) * 0.5;
    const auto bc = trial % 5 == 0 ? BoundaryCondition::kAbsorbing : BoundaryCondition::kNoFlux;
    const auto spec = GeneratorSpec::from_expressions(E(a), E(b), DomainSpec::full_line(lo, hi, bc));
    for (Scheme sch : {Scheme::kExponentialFitting, Scheme::kUpwind}) {
      const auto q = build_qmatrix(spec, spec.domain.make_grid(nodes(rng)), sch);
      const auto r = maximum_principle_check(q);
      EXPECT_TRUE(r.passed) << a << " | " << b;
      EXPECT_GE(r.min_off_diagonal, 0.0);
      EXPECT_EQ(r.max_row_sum, 0.0);
    }
  }
}

TEST(BuildQMatrix, ConsistencyOrder) {
  const auto spec = catalog_example("appendix2a", 1.0).spec;
  const auto f = SmoothFunction::from_expression(E("exp(-x^2)*(1 + x)"), 1);
  auto error = [&](int n, Scheme s) {
    const Grid g = Grid::uniform(-10, 10, n);
    const auto q = build_qmatrix(spec, g, s);
    Eigen::VectorXd fv(static_cast<Eigen::Index>(g.size()));
    for (std::size_t k = 0; k < g.size(); ++k) fv(static_cast<Eigen::Index>(k)) = f.value(point(g.x(k)));
    const Eigen::VectorXd qf = q.q * fv;
    double worst = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (std::abs(g.x(k)) > 4) continue;
      worst = std::max(worst, std::abs(qf(static_cast<Eigen::Index>(k)) - apply_generator(spec, f, point(g.x(k)))));
    }
    return worst;
  };
  const double e1 = error(201, Scheme::kExponentialFitting), e2 = error(401, Scheme::kExponentialFitting),
               e3 = error(801, Scheme::kExponentialFitting);
  EXPECT_NEAR(std::log2(e1 / e2), 2.0, 0.2);
  EXPECT_NEAR(std::log2(e2 / e3), 2.0, 0.2);
  const double u1 = error(201, Scheme::kUpwind), u2 = error(401, Scheme::kUpwind), u3 = error(801, Scheme::kUpwind);
  EXPECT_NEAR(std::log2(u1 / u2), 1.0, 0.2);
  EXPECT_NEAR(std::log2(u2 / u3), 1.0, 0.2);
}

TEST(BuildQMatrix, TransposeDuality) {
  const auto spec = catalog_example("appendix2a", 1.0).spec;
  const Grid g = Grid::uniform(-10, 10, 101);
  const auto q = build_qmatrix(spec, g);
  const SparseMatrix qt = adjoint_qmatrix(q);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd f(101), phi(101);
    for (int i = 0; i < 101; ++i) { f(i) = n(rng); phi(i) = n(rng); }
    const double lhs = phi.dot(q.q * f), rhs = (qt * phi).dot(f);
    EXPECT_NEAR(lhs, rhs, 1e-12 * (phi.cwiseAbs().dot((q.q.cwiseAbs() * f.cwiseAbs()))));
  }
  // Columns of the adjoint sum to zero: mass is conserved.
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(101);
  EXPECT_EQ((qt.transpose() * ones).cwiseAbs().maxCoeff(), 0.0);
}

TEST(BuildQMatrix, AdjointOfHandBuiltMatrix) {
  Eigen::MatrixXd m(2, 2);
  m << -1, 1, 0, 0;
  const auto q = DiscreteGenerator::from_dense(m);
  const Eigen::MatrixXd t = Eigen::MatrixXd(adjoint_qmatrix(q));
  Eigen::MatrixXd expected(2, 2);
  expected << -1, 0, 1, 0;
  EXPECT_EQ(t, expected);
}

TEST(BuildQMatrix, EquilibriumResidualOfTheAdjoint) {
  // Q^T applied to the sampled analytic density shrinks with the grid.
  const auto ex = catalog_example("appendix2a", 1.0);
  std::vector<double> r;
  for (int n : {201, 401, 801}) {
    const Grid g = ex.spec.domain.make_grid(n);
    const auto q = build_qmatrix(ex.spec, g);
    Eigen::VectorXd rho(static_cast<Eigen::Index>(n));
    for (int i = 0; i < n; ++i) rho(i) = ex.equilibrium.density.value(point(g.x(static_cast<std::size_t>(i))));
    const Eigen::VectorXd res = adjoint_qmatrix(q) * rho;
    r.push_back(res.segment(1, n - 2).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(r[0], 1e-2);
  EXPECT_NEAR(r[0] / r[1], 4.0, 1.0);
  EXPECT_NEAR(r[1] / r[2], 4.0, 1.0);
}

TEST(BuildQMatrix, AbsorbingRowsAreZero) {
  const auto spec = GeneratorSpec::from_expressions(E("1"), E("0"),
                                                    DomainSpec::full_line(0, 1, BoundaryCondition::kAbsorbing));
  const auto q = build_qmatrix(spec, spec.domain.make_grid(11));
  EXPECT_EQ(q.q.row(0).norm(), 0.0);
  EXPECT_EQ(q.q.row(10).norm(), 0.0);
  EXPECT_GT(entry(q.q, 1, 0), 0.0);
}

TEST(BuildQMatrix, TwoDimensionalDiagonalTensor) {
  auto spec = GeneratorSpec::from_source(
      CoefficientSource{{{E("1 + x1^2"), E("0")}, {E("0"), E("2")}}, {E("-x1"), E("-x2")}},
      DomainSpec::box({{-2, 2}, {-3, 3}}));
  const auto q = build_qmatrix(spec, spec.domain.make_grid(9));
  EXPECT_EQ(q.size(), 81u);
  EXPECT_TRUE(maximum_principle_check(q).passed);
  // An interior node couples to four neighbours.
  const std::size_t k = 4 * 9 + 4;
  EXPECT_EQ(q.q.row(static_cast<int>(k)).nonZeros(), 5);
}

TEST(BuildQMatrix, Errors) {
  const auto negative = GeneratorSpec::from_expressions(E("-1"), E("0"), DomainSpec::full_line(0, 1));
  EXPECT_THROW(build_qmatrix(negative, negative.domain.make_grid(5)), NonEllipticCoefficient);
  const auto mixed = GeneratorSpec::from_source(CoefficientSource{{{E("1"), E("0.5")}, {E("0.5"), E("1")}},
                                                                  {E("0"), E("0")}},
                                                DomainSpec::box({{0, 1}, {0, 1}}));
  EXPECT_THROW(build_qmatrix(mixed, mixed.domain.make_grid(5)), UnsupportedTensor);
  EXPECT_THROW(DiscreteGenerator::from_dense(Eigen::MatrixXd::Zero(2, 3)), ShapeError);
  Eigen::MatrixXd bad(2, 2);
  bad << -1, 1, -0.5, 0.5;
  EXPECT_THROW(DiscreteGenerator::from_dense(bad), PreconditionViolated);
  bad << -1, 1, 1, -0.5;
  EXPECT_THROW(DiscreteGenerator::from_dense(bad), PreconditionViolated);
  EXPECT_THROW(maximum_principle_check(SparseMatrix(2, 3)), ShapeError);
  EXPECT_THROW(scheme_from_string("central"), SchemaError);
  EXPECT_EQ(scheme_from_string(to_string(Scheme::kUpwind)), Scheme::kUpwind);
}

TEST(MaximumPrinciple, HandBuiltExamples) {
  Eigen::MatrixXd a(2, 2), b(2, 2);
  a << -1, 1, 1, -1;
  b << -1, 1, 2, -2;
  EXPECT_TRUE(maximum_principle_check(DiscreteGenerator::from_dense(a)).passed);
  EXPECT_TRUE(maximum_principle_check(DiscreteGenerator::from_dense(b)).passed);
}
