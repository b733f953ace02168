#pragma once

#include <string>

#include <Eigen/SparseCore>

#include "kinetic/generator.hpp"
#include "kinetic/grid.hpp"

namespace kinetic {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class Scheme { kExponentialFitting, kUpwind, kCustom };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

/// Diffusivity at or below which a node is treated as pure transport.
inline constexpr double kDegenerateDiffusion = 1e-14;

/// Bernoulli function B(z) = z / (e^z - 1), B(0) = 1.
double bernoulli(double z);

/// A Q-matrix on a grid: Q_ij >= 0 off the diagonal and zero row sums.
/// Rows act on observables, (Qf)_i = sum_j Q_ij f_j.
struct DiscreteGenerator {
  SparseMatrix q;
  Grid grid;
  Scheme scheme = Scheme::kCustom;
  double lambda_max = 0.0;  // max_i |Q_ii|

  std::size_t size() const { return static_cast<std::size_t>(q.rows()); }

  /// Wraps a hand-built matrix. Throws ShapeError for a non-square matrix or a
  /// grid of the wrong size, PreconditionViolated when the Q-matrix invariants
  /// fail.
  static DiscreteGenerator from_matrix(SparseMatrix q, Grid grid, Scheme scheme = Scheme::kCustom);
  static DiscreteGenerator from_dense(const Eigen::MatrixXd& q);
};

/// Assembles the Q-matrix of `spec` on `grid`.
///
/// Exponential fitting: at a node with a > 1e-14 the jumps to i+1 and i-1
/// have rates (a/dx^2) B(-b dx/a) and (a/dx^2) B(b dx/a). The drift of the
/// chain is exactly b and its second moment a (1 + z^2/12), z = b dx/a.
/// Degenerate nodes and the upwind scheme use a/dx^2 + max(+-b, 0)/dx.
///
/// No-flux boundary rows keep only their inward jumps; absorbing boundary rows
/// are zero. In n-D every axis is treated separately, so the diffusion matrix
/// has to be diagonal.
///
/// Throws NonEllipticCoefficient for a negative eigenvalue of a(x) and
/// UnsupportedTensor for off-diagonal diffusion.
DiscreteGenerator build_qmatrix(const GeneratorSpec& spec, const Grid& grid,
                                Scheme scheme = Scheme::kExponentialFitting);

/// Central differences a (f+ - 2f + f-)/dx^2 + b (f+ - f-)/(2 dx) with the
/// same boundary handling. Not a Q-matrix in general; kept as the negative
/// control for maximum_principle_check.
SparseMatrix assemble_central(const GeneratorSpec& spec, const Grid& grid);

/// Q^T. Drives densities: d nu/dt = Q^T nu.
SparseMatrix adjoint_qmatrix(const DiscreteGenerator& q);

/// Max over i of |sum_j Q_ij|.
double max_row_sum(const SparseMatrix& q);

}  // namespace kinetic
