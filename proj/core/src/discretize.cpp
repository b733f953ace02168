#include "kinetic/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "kinetic/errors.hpp"

namespace kinetic {

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::kExponentialFitting: return "exponential-fitting";
    case Scheme::kUpwind: return "upwind";
    case Scheme::kCustom: return "custom";
  }
  return "custom";
}

Scheme scheme_from_string(const std::string& s) {
  if (s == "exponential-fitting") return Scheme::kExponentialFitting;
  if (s == "upwind") return Scheme::kUpwind;
  throw SchemaError("unknown scheme '" + s + "' (expected exponential-fitting or upwind)");
}

double bernoulli(double z) {
  if (std::abs(z) < 1e-10) return 1.0 - 0.5 * z;
  return z / std::expm1(z);
}

namespace {

double max_abs_diagonal(const SparseMatrix& q) {
  double m = 0.0;
  for (int i = 0; i < q.outerSize(); ++i) m = std::max(m, std::abs(q.coeff(i, i)));
  return m;
}

}  // namespace

double max_row_sum(const SparseMatrix& q) {
  double worst = 0.0;
  for (int i = 0; i < q.outerSize(); ++i) {
    double s = 0.0;
    for (SparseMatrix::InnerIterator it(q, i); it; ++it) s += it.value();
    worst = std::max(worst, std::abs(s));
  }
  return worst;
}

DiscreteGenerator DiscreteGenerator::from_matrix(SparseMatrix q, Grid grid, Scheme scheme) {
  if (q.rows() != q.cols()) throw ShapeError("Q-matrix must be square");
  if (static_cast<std::size_t>(q.rows()) != grid.size()) throw ShapeError("Q-matrix size does not match the grid");
  q.makeCompressed();
  for (int i = 0; i < q.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(q, i); it; ++it) {
      if (it.col() != i && it.value() < -1e-12) {
        throw PreconditionViolated("negative off-diagonal entry in row " + std::to_string(i));
      }
    }
  }
  if (max_row_sum(q) > 1e-10) throw PreconditionViolated("Q-matrix rows must sum to zero");
  DiscreteGenerator g;
  g.lambda_max = max_abs_diagonal(q);
  g.q = std::move(q);
  g.grid = std::move(grid);
  g.scheme = scheme;
  return g;
}

DiscreteGenerator DiscreteGenerator::from_dense(const Eigen::MatrixXd& q) {
  if (q.rows() != q.cols()) throw ShapeError("Q-matrix must be square");
  SparseMatrix s = q.sparseView();
  return from_matrix(std::move(s), Grid::states(static_cast<int>(q.rows())));
}

namespace {

struct NodeCoefficients {
  std::vector<Mat> a;
  std::vector<Vec> b;
};

NodeCoefficients sample_coefficients(const GeneratorSpec& spec, const Grid& grid) {
  if (grid.dimension() != spec.dimension) throw ShapeError("grid dimension does not match the generator");
  check_admissible(spec, grid);
  NodeCoefficients c;
  c.a.resize(grid.size());
  c.b.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Vec x = grid.coordinate(k);
    c.a[k] = spec.a(x);
    c.b[k] = spec.b(x);
    if (spec.dimension > 1) {
      for (int i = 0; i < spec.dimension; ++i) {
        for (int j = 0; j < spec.dimension; ++j) {
          if (i != j && std::abs(c.a[k](i, j)) > kDegenerateDiffusion) {
            throw UnsupportedTensor("off-diagonal diffusion at node " + std::to_string(k) +
                                    " (only diagonal tensors are discretised)");
          }
        }
      }
    }
  }
  return c;
}

// Rates (to the + neighbour, to the - neighbour) along one axis.
std::pair<double, double> rates(double a, double b, double h, Scheme scheme) {
  if (scheme == Scheme::kUpwind || a <= kDegenerateDiffusion) {
    const double d = std::max(a, 0.0) / (h * h);
    return {d + std::max(b, 0.0) / h, d + std::max(-b, 0.0) / h};
  }
  const double z = b * h / a;
  const double d = a / (h * h);
  return {d * bernoulli(-z), d * bernoulli(z)};
}

}  // namespace

DiscreteGenerator build_qmatrix(const GeneratorSpec& spec, const Grid& grid, Scheme scheme) {
  if (scheme == Scheme::kCustom) throw SchemaError("build_qmatrix needs a concrete scheme");
  const NodeCoefficients c = sample_coefficients(spec, grid);
  const int n = grid.dimension();
  const bool absorbing = grid.boundary_condition() == BoundaryCondition::kAbsorbing;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(grid.size() * static_cast<std::size_t>(2 * n + 1));
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (absorbing && grid.on_boundary(k)) continue;
    const auto idx = grid.multi_index(k);
    std::vector<std::pair<std::size_t, double>> row;
    double total = 0.0;
    for (int d = 0; d < n; ++d) {
      const auto [up, down] = rates(c.a[k](d, d), c.b[k](d), grid.axis(d).spacing(), scheme);
      const std::size_t s = grid.stride(d);
      const int i = idx[static_cast<std::size_t>(d)];
      if (i + 1 < grid.axis(d).nodes && up > 0.0) row.emplace_back(k + s, up);
      if (i > 0 && down > 0.0) row.emplace_back(k - s, down);
      total += up + down;
    }
    // Rates are rounded to a common binary quantum (52 bits below the row
    // total), so every partial sum is exact and the row sums to zero in any
    // summation order.
    double out = 0.0;
    if (total > 0.0) {
      const double quantum = std::ldexp(1.0, std::ilogb(total) - 51);
      for (auto& [col, r] : row) {
        r = std::round(r / quantum) * quantum;
        if (r > 0.0) triplets.emplace_back(static_cast<int>(k), static_cast<int>(col), r);
        out += r;
      }
    }
    triplets.emplace_back(static_cast<int>(k), static_cast<int>(k), -out);
  }
  SparseMatrix q(static_cast<int>(grid.size()), static_cast<int>(grid.size()));
  q.setFromTriplets(triplets.begin(), triplets.end());
  q.makeCompressed();
  DiscreteGenerator g;
  g.lambda_max = max_abs_diagonal(q);
  g.q = std::move(q);
  g.grid = grid;
  g.scheme = scheme;
  return g;
}

SparseMatrix assemble_central(const GeneratorSpec& spec, const Grid& grid) {
  if (grid.dimension() != spec.dimension) throw ShapeError("grid dimension does not match the generator");
  const int n = grid.dimension();
  const bool absorbing = grid.boundary_condition() == BoundaryCondition::kAbsorbing;
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (absorbing && grid.on_boundary(k)) continue;
    const Vec x = grid.coordinate(k);
    const Mat a = spec.a(x);
    const Vec b = spec.b(x);
    const auto idx = grid.multi_index(k);
    double out = 0.0;
    for (int d = 0; d < n; ++d) {
      const double h = grid.axis(d).spacing();
      const double up = a(d, d) / (h * h) + b(d) / (2.0 * h);
      const double down = a(d, d) / (h * h) - b(d) / (2.0 * h);
      const std::size_t s = grid.stride(d);
      const int i = idx[static_cast<std::size_t>(d)];
      if (i + 1 < grid.axis(d).nodes) {
        triplets.emplace_back(static_cast<int>(k), static_cast<int>(k + s), up);
        out += up;
      }
      if (i > 0) {
        triplets.emplace_back(static_cast<int>(k), static_cast<int>(k - s), down);
        out += down;
      }
    }
    triplets.emplace_back(static_cast<int>(k), static_cast<int>(k), -out);
  }
  SparseMatrix q(static_cast<int>(grid.size()), static_cast<int>(grid.size()));
  q.setFromTriplets(triplets.begin(), triplets.end());
  q.makeCompressed();
  return q;
}

SparseMatrix adjoint_qmatrix(const DiscreteGenerator& q) {
  SparseMatrix t = q.q.transpose();
  t.makeCompressed();
  return t;
}

}  // namespace kinetic
