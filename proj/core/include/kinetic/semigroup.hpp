#pragma once

#include <vector>

#include <Eigen/Core>

#include "kinetic/discretize.hpp"
#include "kinetic/grid.hpp"

namespace kinetic {

/// Controls of the uniformization series e^{At} v = sum_n Pois(n; lambda t) P^n v.
struct UniformizationOptions {
  double tol = 1e-12;          // Poisson tail mass dropped, in (0, 1e-6]
  long max_terms = 1'000'000;  // per series
  /// Split horizons whose series would exceed max_terms into 2^k equal
  /// pieces. When false such requests throw TruncationBudgetExceeded.
  bool split_long_horizons = true;
};

/// Poisson weights for mean m with both tails below tol (Chernoff bounds),
/// renormalised to sum to one. Entry n is the weight of P^n; leading
/// negligible terms are zero.
std::vector<double> poisson_weights(double m, double tol);

/// Uniformization rate 1.05 * lambda_max used for every series.
double uniformization_rate(const DiscreteGenerator& q);

/// e^{Qt} f0. Non-negative f0 gives a non-negative result; constants are
/// preserved up to tol.
ScalarField evolve_observable(const DiscreteGenerator& q, const ScalarField& f0, double t,
                              const UniformizationOptions& opt = {});

/// e^{Q^T t} nu0 for a density nu0 >= 0 (values per unit cell).
ScalarField evolve_density(const DiscreteGenerator& q, const ScalarField& nu0, double t,
                           const UniformizationOptions& opt = {});

/// Snapshots of a density or observable evolution.
struct EvolutionResult {
  std::vector<double> times;
  std::vector<ScalarField> fields;
  std::vector<double> mass;       // integral of each field, wall traps excluded
  std::vector<double> min_value;
  std::vector<double> sup_norm;
  /// Set when mass went down by more than the tolerance between snapshots
  /// (absorbing walls). Reported, not an error.
  bool mass_decreasing = false;
};

/// Evolves nu0 through the increasing, non-negative `times`, each step
/// starting from the previous snapshot.
EvolutionResult evolve_density(const DiscreteGenerator& q, const ScalarField& nu0, const std::vector<double>& times,
                               const UniformizationOptions& opt = {});
EvolutionResult evolve_observable(const DiscreteGenerator& q, const ScalarField& f0,
                                  const std::vector<double>& times, const UniformizationOptions& opt = {});

/// P(t) with p_ij = probability of being at j at time t after starting at i.
struct TransitionKernel {
  Eigen::MatrixXd p;
  double t = 0.0;
  double tol = 0.0;
  int squarings = 0;            // P(t) = P(t / 2^k)^(2^k)
  double row_sum_defect = 0.0;  // max_i |sum_j p_ij - 1|
};

TransitionKernel transition_kernel(const DiscreteGenerator& q, double t, double tol = 1e-12);

/// ||P(t+s) - P(t) P(s)||_inf (max absolute row sum).
double chapman_kolmogorov_defect(const DiscreteGenerator& q, double t, double s, double tol = 1e-12);

/// Solves (lambda I - Q) f = g. Throws SpectrumError for lambda <= 0.
ScalarField resolvent(const DiscreteGenerator& q, double lambda, const ScalarField& g);

/// Kernel moments per node: drift (1/t) sum_j p_ij (x_j - x_i), diffusion
/// (1/2t) sum_j p_ij (x_j - x_i)^2 and third absolute moment / t.
struct MomentRecovery {
  ScalarField drift;
  ScalarField diffusion;
  ScalarField third_moment;
  double t = 0.0;
  double lambda_t = 0.0;  // lambda_max * t
  /// lambda_max * t above 0.1: the first-order moment limits carry an O(t)
  /// bias. Reported alongside the estimates instead of thrown.
  bool bias_warning = false;
  /// Leading O(t) terms of the two estimates: (t/2) (Q^2 X)_i and
  /// (t/4) ((Q^2 X^2)_i - 2 x_i (Q^2 X)_i).
  ScalarField drift_bias;
  ScalarField diffusion_bias;
};

/// 1-D moments of P(t_small), built from Q.
MomentRecovery recover_coefficients(const DiscreteGenerator& q, double t_small, double tol = 1e-12);
/// Same from an existing kernel on `grid`; no bias terms are computed.
MomentRecovery recover_coefficients(const TransitionKernel& p, const Grid& grid);

/// 1 - p(t, x_i, ball(x_i, r)) for each t.
std::vector<double> stochastic_continuity_defect(const DiscreteGenerator& q, std::size_t node, double radius,
                                                 const std::vector<double>& times, double tol = 1e-12);

/// Max of the defect over nodes whose ball of radius r lies inside the grid.
std::vector<double> uniform_continuity_defect(const DiscreteGenerator& q, double radius,
                                              const std::vector<double>& times, double tol = 1e-12);

}  // namespace kinetic
