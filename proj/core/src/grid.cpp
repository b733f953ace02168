#include "kinetic/grid.hpp"

#include <algorithm>
#include <cmath>

#include "kinetic/errors.hpp"

namespace kinetic {

Grid::Grid(std::vector<Axis> axes, BoundaryCondition bc) : axes_(std::move(axes)), bc_(bc) {
  if (axes_.empty() || static_cast<int>(axes_.size()) > kMaxDimension) {
    throw ShapeError("grid dimension must be between 1 and " + std::to_string(kMaxDimension));
  }
  for (const Axis& a : axes_) {
    if (a.nodes < 3) throw ShapeError("grid needs at least 3 nodes per axis");
    if (!(a.lo < a.hi) || !std::isfinite(a.lo) || !std::isfinite(a.hi)) {
      throw DomainError("grid axis needs finite lo < hi");
    }
  }
  strides_.assign(axes_.size(), 1);
  for (int d = static_cast<int>(axes_.size()) - 2; d >= 0; --d) {
    strides_[d] = strides_[d + 1] * static_cast<std::size_t>(axes_[d + 1].nodes);
  }
  size_ = strides_[0] * static_cast<std::size_t>(axes_[0].nodes);
  cell_volume_ = 1.0;
  for (const Axis& a : axes_) cell_volume_ *= a.spacing();
}

Grid Grid::states(int n) {
  if (n < 1) throw ShapeError("state space must be non-empty");
  Grid g;
  g.axes_ = {Axis{0.0, static_cast<double>(std::max(n - 1, 1)), n}};
  g.strides_ = {1};
  g.size_ = static_cast<std::size_t>(n);
  g.cell_volume_ = 1.0;
  return g;
}

std::vector<int> Grid::multi_index(std::size_t node) const {
  std::vector<int> idx(axes_.size());
  for (std::size_t d = 0; d < axes_.size(); ++d) {
    idx[d] = static_cast<int>(node / strides_[d]);
    node %= strides_[d];
  }
  return idx;
}

std::size_t Grid::flat_index(std::span<const int> idx) const {
  std::size_t n = 0;
  for (std::size_t d = 0; d < axes_.size(); ++d) n += static_cast<std::size_t>(idx[d]) * strides_[d];
  return n;
}

Vec Grid::coordinate(std::size_t node) const {
  Vec x(dimension());
  const auto idx = multi_index(node);
  for (int d = 0; d < dimension(); ++d) x(d) = axes_[d].coordinate(idx[d]);
  return x;
}

bool Grid::on_boundary(std::size_t node) const { return !is_interior(node, 1); }

bool Grid::is_interior(std::size_t node, int reach) const {
  const auto idx = multi_index(node);
  for (std::size_t d = 0; d < axes_.size(); ++d) {
    if (idx[d] < reach || idx[d] > axes_[d].nodes - 1 - reach) return false;
  }
  return true;
}

bool Grid::operator==(const Grid& o) const {
  if (axes_.size() != o.axes_.size() || bc_ != o.bc_) return false;
  for (std::size_t d = 0; d < axes_.size(); ++d) {
    if (axes_[d].lo != o.axes_[d].lo || axes_[d].hi != o.axes_[d].hi || axes_[d].nodes != o.axes_[d].nodes) {
      return false;
    }
  }
  return true;
}

ScalarField::ScalarField(Grid g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
  if (values.size() != grid.size()) throw ShapeError("field length does not match grid node count");
}

ScalarField::ScalarField(Grid g, double fill) : grid(std::move(g)), values(grid.size(), fill) {}

double ScalarField::integral() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s * grid.weight();
}

double ScalarField::sup_norm() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

double ScalarField::min() const { return *std::min_element(values.begin(), values.end()); }

double l1_distance(const ScalarField& a, const ScalarField& b) {
  if (a.size() != b.size()) throw ShapeError("l1_distance: field sizes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s * a.grid.weight();
}

double axis_derivative(const Grid& grid, const std::vector<double>& v, std::size_t k, int d) {
  const int i = grid.multi_index(k)[static_cast<std::size_t>(d)];
  const int last = grid.axis(d).nodes - 1;
  const std::size_t s = grid.stride(d);
  const double h = grid.axis(d).spacing();
  if (i == 0) return (-3.0 * v[k] + 4.0 * v[k + s] - v[k + 2 * s]) / (2.0 * h);
  if (i == last) return (3.0 * v[k] - 4.0 * v[k - s] + v[k - 2 * s]) / (2.0 * h);
  return (v[k + s] - v[k - s]) / (2.0 * h);
}

ScalarField coarsen(const ScalarField& field, int factor) {
  if (field.grid.dimension() != 1) throw ShapeError("coarsen supports 1-D fields");
  if (factor < 1) throw PreconditionViolated("coarsen factor must be positive");
  const int n = static_cast<int>(field.size());
  const int blocks = std::max(3, n / factor);
  const Axis& ax = field.grid.axis(0);
  const double h = ax.spacing();
  // Block b covers fine cells [b*factor, (b+1)*factor); its centre is the mean
  // of the fine cell centres.
  std::vector<double> mass(static_cast<std::size_t>(blocks), 0.0);
  for (int i = 0; i < n; ++i) {
    const int b = std::min(i / factor, blocks - 1);
    mass[static_cast<std::size_t>(b)] += field[static_cast<std::size_t>(i)] * h;
  }
  const double H = h * factor;
  const double lo = ax.lo + 0.5 * (factor - 1) * h;
  Grid coarse = Grid({Axis{lo, lo + (blocks - 1) * H, blocks}}, field.grid.boundary_condition());
  std::vector<double> dens(mass.size());
  for (std::size_t b = 0; b < mass.size(); ++b) dens[b] = mass[b] / H;
  return ScalarField(std::move(coarse), std::move(dens));
}

}  // namespace kinetic
