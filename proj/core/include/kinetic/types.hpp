#pragma once

#include <Eigen/Core>

namespace kinetic {

/// Largest phase-space dimension the library handles.
inline constexpr int kMaxDimension = 3;

/// Point / vector in phase space. Fixed capacity, so no heap traffic on the
/// hot paths (coefficient evaluation inside the particle loop).
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDimension, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDimension, kMaxDimension>;

inline Vec point(double x) {
  Vec v(1);
  v(0) = x;
  return v;
}

}  // namespace kinetic
