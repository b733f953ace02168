#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kinetic/expression.hpp"
#include "kinetic/grid.hpp"
#include "kinetic/jet.hpp"
#include "kinetic/types.hpp"

namespace kinetic {

using ScalarFn = std::function<double(const Vec&)>;
using VectorField = std::function<Vec(const Vec&)>;
using MatrixField = std::function<Mat(const Vec&)>;

enum class DomainKind { kFullLine, kHalfLine, kBox };

/// Where the generator lives. Infinite domains are represented by their
/// truncation box; `kind` records what the box stands for.
struct DomainSpec {
  DomainKind kind = DomainKind::kFullLine;
  std::vector<std::pair<double, double>> bounds;  // per axis [lo, hi]
  BoundaryCondition boundary_condition = BoundaryCondition::kNoFlux;

  static DomainSpec full_line(double lo, double hi, BoundaryCondition bc = BoundaryCondition::kNoFlux);
  static DomainSpec half_line(double lo, double hi, BoundaryCondition bc = BoundaryCondition::kNoFlux);
  static DomainSpec box(std::vector<std::pair<double, double>> bounds,
                        BoundaryCondition bc = BoundaryCondition::kNoFlux);

  int dimension() const { return static_cast<int>(bounds.size()); }
  /// Throws DomainError when the invariants (lo < hi, half line has lo > 0) fail.
  void validate() const;
  bool contains(const Vec& x) const;        // closed box
  bool contains_interior(const Vec& x) const;  // open box
  /// Uniform grid with `nodes` points per axis spanning the box.
  Grid make_grid(int nodes) const;
};

/// 1-D tabulated coefficient, piecewise linear between nodes and constant
/// beyond the ends.
struct CoefficientTable {
  std::vector<double> nodes;
  std::vector<double> values;
  double operator()(double x) const;
};

/// One scalar coefficient entry: an expression or a table.
using CoefficientEntry = std::variant<Expression, CoefficientTable>;

/// The document-level description of the coefficients, kept so a spec can be
/// written back out.
struct CoefficientSource {
  std::vector<std::vector<CoefficientEntry>> a;  // n x n, symmetric
  std::vector<CoefficientEntry> b;               // n
};

/// Exact derivative data of the coefficients, needed by the formal adjoint.
struct CoefficientDerivatives {
  VectorField diffusion_divergence;  // (d_j a_ij)_i
  ScalarFn diffusion_second_divergence;  // d_i d_j a_ij
  ScalarFn drift_divergence;         // d_i b_i
};

/// Diffusion generator Z f = a_ij d_i d_j f + b_i d_i f on a domain.
struct GeneratorSpec {
  int dimension = 1;
  MatrixField a;
  VectorField b;
  DomainSpec domain;
  std::optional<CoefficientDerivatives> derivatives;
  std::string label;
  std::optional<CoefficientSource> source;

  /// Builds a spec from coefficient entries. Exact derivatives are attached
  /// when every entry is an expression.
  static GeneratorSpec from_source(CoefficientSource source, DomainSpec domain, std::string label = {});
  /// 1-D shorthand.
  static GeneratorSpec from_expressions(const Expression& a, const Expression& b, DomainSpec domain,
                                        std::string label = {});
};

/// Smallest eigenvalue of the symmetrised diffusion matrix at x.
double diffusion_floor(const GeneratorSpec& spec, const Vec& x);

/// Checks a(x) symmetric non-negative definite (eigenvalue floor -1e-12 after
/// symmetrisation) and a, b finite at every node. Throws
/// NonEllipticCoefficient naming the first offending node.
void check_admissible(const GeneratorSpec& spec, const Grid& grid);

/// A twice differentiable test function. Missing derivative callbacks are
/// replaced by fourth order central differences of `value`.
struct SmoothFunction {
  ScalarFn value;
  VectorField gradient;
  MatrixField hessian;

  static SmoothFunction from_expression(const Expression& e, int dimension);
  /// 1-D function written against Jet; derivatives are exact.
  static SmoothFunction from_jet(JetFunction f);
  static SmoothFunction sampled(ScalarFn f) { return SmoothFunction{std::move(f), {}, {}}; }
};

/// Value, gradient and Hessian of f at x.
struct LocalDerivatives {
  double value = 0.0;
  Vec gradient;
  Mat hessian;
};

/// Step used by the finite-difference fallback.
inline constexpr double kDerivativeStep = 1e-3;

/// Resolves the derivatives of f at x, falling back to finite differences when
/// callbacks are missing. The difference stencil must stay inside `domain`;
/// otherwise InsufficientSmoothness is thrown.
LocalDerivatives derivatives_at(const SmoothFunction& f, const Vec& x, const DomainSpec& domain);

/// Z f(x) = a_ij(x) d_i d_j f(x) + b_i(x) d_i f(x).
double apply_generator(const GeneratorSpec& spec, const SmoothFunction& f, const Vec& x);

/// Z^dagger rho(x) = d_i d_j (a_ij rho) - d_i (b_i rho). Uses exact
/// coefficient derivatives when the spec carries them, differences of the
/// products a rho and b rho otherwise.
double apply_formal_adjoint(const GeneratorSpec& spec, const SmoothFunction& rho, const Vec& x);

/// rho0 = c exp(-beta H).
struct GibbsForm {
  double beta = 1.0;
  Expression energy;  // H
};

/// Analytic equilibrium of a generator's formal adjoint.
struct Equilibrium {
  SmoothFunction density;
  Expression expression;
  std::optional<GibbsForm> gibbs;
  bool normalizable = true;
  double total_mass = std::numeric_limits<double>::infinity();  // over the untruncated domain
};

/// Equilibrium density sampled on a grid.
struct EquilibriumDensity {
  ScalarField field;
  std::optional<GibbsForm> gibbs;
  /// beta*H at the nodes, either sampled from `gibbs` or inferred as
  /// -ln(rho/max rho).
  std::optional<std::vector<double>> energy;
  std::optional<SmoothFunction> analytic;
  bool normalized = false;
  double total_mass = std::numeric_limits<double>::infinity();

  const Grid& grid() const { return field.grid; }
  /// values >= 0, and when gibbs is present |values - c exp(-beta H)| <= 1e-10
  /// relative at every node (c fixed at the largest node). Throws
  /// PreconditionViolated otherwise.
  void validate() const;
};

EquilibriumDensity sample_equilibrium(const Equilibrium& eq, const Grid& grid);

/// Rescales the field to unit mass over the grid (the truncated box), which is
/// how non-normalizable equilibria are made usable. The analytic density and
/// the Gibbs data are left alone; only the constant c changes.
EquilibriumDensity normalize_on_grid(EquilibriumDensity rho);

/// Equilibrium from bare values; `energy` is inferred where the density is
/// positive.
EquilibriumDensity equilibrium_from_values(ScalarField values);

enum class ResidualMethod { kAutomatic, kFiniteDifference };

/// max over interior nodes of |Z^dagger rho0|. The automatic method uses the
/// analytic density when the EquilibriumDensity carries one.
double residual_invariant(const GeneratorSpec& spec, const EquilibriumDensity& rho0,
                          ResidualMethod method = ResidualMethod::kAutomatic);

/// Nodal values of Z^dagger rho from centred differences of a rho and b rho.
ScalarField formal_adjoint_on_grid(const GeneratorSpec& spec, const ScalarField& rho);

/// H_i = 2 (beta a_ij d_j H - d_j a_ij + b_i) at a point, from analytic Gibbs data.
Vec compute_Hi_at(const GeneratorSpec& spec, const GibbsForm& gibbs, const Vec& x);

/// H_i at every node of rho0's grid, one field per component. Interior nodes
/// only carry meaningful values when the energy is sampled (differences);
/// boundary entries then use one-sided differences.
std::vector<ScalarField> compute_Hi(const GeneratorSpec& spec, const EquilibriumDensity& rho0);

struct CatalogExample {
  GeneratorSpec spec;
  Equilibrium equilibrium;
};

/// Names: appendix2a, appendix2b, ornstein-uhlenbeck, pure-diffusion. The
/// first two need alpha >= -1/2 and are non-integrable for alpha <= 0.
CatalogExample catalog_example(const std::string& name, double alpha = 1.0);
std::vector<std::string> catalog_names();

}  // namespace kinetic
