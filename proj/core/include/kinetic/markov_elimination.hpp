#pragma once

#include <vector>

#include "kinetic/discretize.hpp"

namespace kinetic {

/// Solves (lambda I - Q) f = g for a Q-matrix by state elimination in the
/// style of Grassmann, Taksar and Heyman. Only sums of non-negative terms are
/// formed (the diagonal is never used), which keeps the relative accuracy of
/// f high for g >= 0. Cost is O(N w^2) for bandwidth w.
std::vector<double> solve_killed_chain(const SparseMatrix& q, double lambda, const std::vector<double>& g);

/// A closed communicating class of a Q-matrix and its stationary distribution.
struct ClosedClass {
  std::vector<int> states;       // ascending
  std::vector<double> stationary;  // over `states`, sums to 1
  bool trap = false;             // single state with no outgoing jumps
};

/// Closed classes of Q in order of their smallest state, each with the
/// stationary law solved by the same elimination.
std::vector<ClosedClass> closed_classes(const SparseMatrix& q);

}  // namespace kinetic
