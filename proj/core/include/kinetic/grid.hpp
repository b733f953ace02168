#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kinetic/types.hpp"

namespace kinetic {

enum class BoundaryCondition { kNoFlux, kAbsorbing };

/// One uniformly spaced axis.
struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  int nodes = 3;

  double spacing() const { return (hi - lo) / (nodes - 1); }
  double coordinate(int i) const { return i == nodes - 1 ? hi : lo + i * spacing(); }
};

/// Tensor-product grid of uniformly spaced axes. Node index is row major with
/// the last axis fastest. Each node owns a cell of volume prod(spacing), which
/// is the quadrature weight used throughout (the no-flux stencil makes every
/// node, boundary nodes included, a full cell).
class Grid {
 public:
  Grid() = default;
  Grid(std::vector<Axis> axes, BoundaryCondition bc = BoundaryCondition::kNoFlux);

  static Grid uniform(double lo, double hi, int nodes, BoundaryCondition bc = BoundaryCondition::kNoFlux) {
    return Grid({Axis{lo, hi, nodes}}, bc);
  }
  /// Abstract state space 0..n-1 with unit spacing; used for hand written
  /// Q-matrices that have no geometry.
  static Grid states(int n);

  int dimension() const { return static_cast<int>(axes_.size()); }
  std::size_t size() const { return size_; }
  const Axis& axis(int d) const { return axes_[static_cast<std::size_t>(d)]; }
  const std::vector<Axis>& axes() const { return axes_; }
  BoundaryCondition boundary_condition() const { return bc_; }

  /// Per-axis index of a flat node index.
  std::vector<int> multi_index(std::size_t node) const;
  std::size_t flat_index(std::span<const int> idx) const;
  /// Flat offset between neighbours along axis d.
  std::size_t stride(int d) const { return strides_[static_cast<std::size_t>(d)]; }

  Vec coordinate(std::size_t node) const;
  /// Coordinate along axis 0 (1-D convenience).
  double x(std::size_t node) const { return axes_[0].coordinate(static_cast<int>(node / strides_[0])); }

  double weight() const { return cell_volume_; }
  std::vector<double> weights() const { return std::vector<double>(size_, cell_volume_); }

  bool on_boundary(std::size_t node) const;
  /// True when every node of a stencil of half-width `reach` fits inside.
  bool is_interior(std::size_t node, int reach = 1) const;

  bool operator==(const Grid& o) const;

 private:
  std::vector<Axis> axes_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
  double cell_volume_ = 1.0;
  BoundaryCondition bc_ = BoundaryCondition::kNoFlux;
};

/// Values at the nodes of a grid (observables, densities, relative densities).
struct ScalarField {
  Grid grid;
  std::vector<double> values;

  ScalarField() = default;
  ScalarField(Grid g, std::vector<double> v);
  explicit ScalarField(Grid g, double fill = 0.0);

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  /// sum_i value_i * w_i.
  double integral() const;
  double sup_norm() const;
  double min() const;
};

/// Sum of |a_i - b_i| w_i.
double l1_distance(const ScalarField& a, const ScalarField& b);

/// Derivative of nodal values along axis d at `node`: centred second order
/// differences inside, second order one-sided differences at the two ends.
double axis_derivative(const Grid& grid, const std::vector<double>& values, std::size_t node, int d);

/// Merges blocks of `factor` consecutive cells of a 1-D field into one cell
/// (masses add). A trailing partial block is merged into the last block.
ScalarField coarsen(const ScalarField& field, int factor);

}  // namespace kinetic
