#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kinetic/discretize.hpp"
#include "kinetic/generator.hpp"
#include "kinetic/semigroup.hpp"

namespace kinetic {

enum class HKind { kXLogX, kSquare, kAbsDev, kSquareDev, kCustomTable };

std::string to_string(HKind k);
HKind h_kind_from_string(const std::string& s);

/// Convex h on [0, inf), evaluated as scale * base(u) + offset where base is
///   xlogx       u ln u (0 at u = 0)
///   square      u^2
///   abs-dev     |u - center|
///   square-dev  (u - center)^2
///   custom      piecewise linear through (nodes, values), extended linearly.
struct HFunctional {
  HKind kind = HKind::kSquare;
  double scale = 1.0;
  double offset = 0.0;
  double center = 1.0;
  std::vector<double> nodes;   // custom-table only
  std::vector<double> values;  // custom-table only

  static HFunctional xlogx() { return of(HKind::kXLogX); }
  static HFunctional square() { return of(HKind::kSquare); }
  static HFunctional abs_dev(double c = 1.0) { return of(HKind::kAbsDev, c); }
  static HFunctional square_dev(double c = 1.0) { return of(HKind::kSquareDev, c); }
  static HFunctional table(std::vector<double> nodes, std::vector<double> values);

  /// alpha h + c.
  HFunctional affine(double alpha, double c) const;

  double operator()(double u) const;
  /// h(0) under the limit convention.
  double at_zero() const { return (*this)(0.0); }
  bool has_second_derivative() const { return kind == HKind::kXLogX || kind == HKind::kSquare || kind == HKind::kSquareDev; }
  /// Throws NonSmoothH for abs-dev and tables.
  double first_derivative(double u) const;
  double second_derivative(double u) const;

  /// Smallest second difference over 10^3 probe points on [0, probe_max].
  double convexity_floor(double probe_max = 10.0) const;
  /// Throws PreconditionViolated when convexity_floor() < -1e-12.
  void validate() const;
  std::string describe() const;

 private:
  static HFunctional of(HKind k, double c = 1.0) {
    HFunctional h;
    h.kind = k;
    h.center = c;
    return h;
  }
};

/// Invariant law of a Q-matrix.
struct InvariantSolution {
  ScalarField pi;                  // density per unit cell, integral 1
  bool unique = true;
  std::vector<ScalarField> basis;  // one density per closed class when not unique
};

/// Solves Q^T pi = 0, pi >= 0, normalised to sum pi_i w_i = 1, one closed
/// communicating class at a time. Throws NoInvariantDensity when every closed
/// class is a trap state (absorbing walls).
InvariantSolution solve_invariant(const DiscreteGenerator& q);

/// sum_i h(nu_i / rho_i) rho_i w_i. Nodes with rho_i = nu_i = 0 contribute
/// nothing; nu_i > 0 = rho_i throws SupportViolation.
double h_function(const ScalarField& rho, const ScalarField& nu, const HFunctional& h);
double h_function(const EquilibriumDensity& rho, const ScalarField& nu, const HFunctional& h);

struct HCurve {
  std::vector<double> times;
  std::vector<double> h;
  std::vector<double> dissipation;    // empty unless requested and h is C2
  std::vector<double> boundary;       // same
  std::vector<double> max_increase_so_far;
  double max_increase = 0.0;
  double tolerance = 0.0;

  bool monotone() const { return max_increase <= tolerance; }
};

/// Reference density and generator data for the optional dissipation and
/// boundary columns of an H-curve.
struct HCurveDiagnostics {
  const GeneratorSpec* spec = nullptr;
  const EquilibriumDensity* rho0 = nullptr;
};

/// Evolves nu0 with Q^T and evaluates H against `reference` (the discrete
/// invariant pi when omitted) at each time.
HCurve h_curve(const DiscreteGenerator& q, const ScalarField& nu0, const HFunctional& h,
               const std::vector<double>& times, double tol, const std::optional<ScalarField>& reference = {},
               const HCurveDiagnostics& diagnostics = {});

/// Same on precomputed snapshots.
HCurve h_curve(const EvolutionResult& evolution, const ScalarField& reference, const HFunctional& h, double tol,
               const HCurveDiagnostics& diagnostics = {});

/// nu / rho nodewise (0 where both vanish).
ScalarField relative_density(const ScalarField& nu, const ScalarField& rho);

/// -sum_i rho_i h''(phi_i) (a grad phi . grad phi)_i w_i with second order
/// differences for grad phi (one sided at the ends).
double dissipation_rate(const GeneratorSpec& spec, const ScalarField& rho0, const ScalarField& phi,
                        const HFunctional& h);

/// max over wall faces of the normal component of rho0 a_ij d_j h(phi) +
/// h(phi) H_i. Every node owns a full cell, so the walls sit half a spacing
/// outside the end nodes; values there come from a quadratic through the
/// three nearest nodes along the normal axis.
double boundary_term(const GeneratorSpec& spec, const EquilibriumDensity& rho0, const ScalarField& phi,
                     const HFunctional& h);

struct DissipationCheck {
  double slope = 0.0;         // (H(t + dt) - H(t - dt)) / (2 dt)
  double rate = 0.0;          // dissipation_rate at t
  double relative_gap = 0.0;  // |slope - rate| / |rate|, 0 when both are below 1e-14
  double boundary = 0.0;      // boundary_term at t
  ScalarField density;        // nu at t
};

DissipationCheck dH_dt_consistency(const DiscreteGenerator& q, const GeneratorSpec& spec,
                                   const EquilibriumDensity& rho0, const ScalarField& nu0, const HFunctional& h,
                                   double t, double dt, const UniformizationOptions& opt = {});

}  // namespace kinetic
