#pragma once

#include <array>
#include <cmath>
#include <functional>

#include "kinetic/errors.hpp"

namespace kinetic {

/// Truncated univariate Taylor series f(x0 + s) = sum_k c_k s^k, k <= order().
///
/// Used to hand exact higher derivatives of test functions to differential
/// operators of arbitrary order (the maximum-principle counterexamples need
/// derivatives up to the operator order).
class Jet {
 public:
  static constexpr int kCapacity = 12;

  Jet() = default;
  Jet(double value, int order) : order_(check(order)) { c_[0] = value; }

  /// The identity jet x0 + s.
  static Jet variable(double x0, int order) {
    Jet j(x0, order);
    if (order >= 1) j.c_[1] = 1.0;
    return j;
  }

  int order() const { return order_; }
  double coefficient(int k) const { return k <= order_ ? c_[k] : 0.0; }
  double& coefficient(int k) { return c_[k]; }
  double value() const { return c_[0]; }

  /// k-th derivative at the expansion point.
  double derivative(int k) const {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f * coefficient(k);
  }

  Jet& operator+=(const Jet& o) {
    for (int k = 0; k <= order_; ++k) c_[k] += o.coefficient(k);
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    for (int k = 0; k <= order_; ++k) c_[k] -= o.coefficient(k);
    return *this;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator-(Jet a) {
    for (int k = 0; k <= a.order_; ++k) a.c_[k] = -a.c_[k];
    return a;
  }
  friend Jet operator+(Jet a, double b) { a.c_[0] += b; return a; }
  friend Jet operator+(double b, Jet a) { a.c_[0] += b; return a; }
  friend Jet operator-(Jet a, double b) { a.c_[0] -= b; return a; }
  friend Jet operator-(double b, const Jet& a) { return -a + b; }
  friend Jet operator*(Jet a, double b) {
    for (int k = 0; k <= a.order_; ++k) a.c_[k] *= b;
    return a;
  }
  friend Jet operator*(double b, Jet a) { return a * b; }

  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r(0.0, std::min(a.order_, b.order_));
    for (int k = 0; k <= r.order_; ++k) {
      double s = 0.0;
      for (int j = 0; j <= k; ++j) s += a.c_[j] * b.c_[k - j];
      r.c_[k] = s;
    }
    return r;
  }

  friend Jet operator/(const Jet& a, const Jet& b) {
    Jet r(0.0, std::min(a.order_, b.order_));
    for (int k = 0; k <= r.order_; ++k) {
      double s = a.c_[k];
      for (int j = 0; j < k; ++j) s -= r.c_[j] * b.c_[k - j];
      r.c_[k] = s / b.c_[0];
    }
    return r;
  }
  friend Jet operator/(const Jet& a, double b) { return a * (1.0 / b); }

  friend Jet exp(const Jet& a) {
    Jet r(std::exp(a.c_[0]), a.order_);
    for (int k = 1; k <= a.order_; ++k) {
      double s = 0.0;
      for (int j = 1; j <= k; ++j) s += j * a.c_[j] * r.c_[k - j];
      r.c_[k] = s / k;
    }
    return r;
  }

  friend Jet log(const Jet& a) {
    Jet r(std::log(a.c_[0]), a.order_);
    for (int k = 1; k <= a.order_; ++k) {
      double s = 0.0;
      for (int j = 1; j < k; ++j) s += j * r.c_[j] * a.c_[k - j];
      r.c_[k] = (a.c_[k] - s / k) / a.c_[0];
    }
    return r;
  }

  friend Jet sin(const Jet& a) { return sincos(a)[0]; }
  friend Jet cos(const Jet& a) { return sincos(a)[1]; }

  /// Real power of a jet with a positive constant term.
  friend Jet pow(const Jet& a, double p) {
    if (p == std::round(p) && std::abs(p) <= 16) {
      const int n = static_cast<int>(std::abs(p));
      Jet r(1.0, a.order_);
      for (int i = 0; i < n; ++i) r = r * a;
      return p < 0 ? Jet(1.0, a.order_) / r : r;
    }
    return exp(log(a) * p);
  }

 private:
  static int check(int order) {
    if (order < 0 || order >= kCapacity) throw PreconditionViolated("jet order out of range");
    return order;
  }

  static std::array<Jet, 2> sincos(const Jet& a) {
    Jet s(std::sin(a.c_[0]), a.order_);
    Jet c(std::cos(a.c_[0]), a.order_);
    for (int k = 1; k <= a.order_; ++k) {
      double ss = 0.0;
      double cc = 0.0;
      for (int j = 1; j <= k; ++j) {
        ss += j * a.c_[j] * c.c_[k - j];
        cc += j * a.c_[j] * s.c_[k - j];
      }
      s.c_[k] = ss / k;
      c.c_[k] = -cc / k;
    }
    return {s, c};
  }

  int order_ = 0;
  std::array<double, kCapacity> c_{};
};

/// A univariate function written once against `Jet` so that any number of
/// exact derivatives can be extracted.
using JetFunction = std::function<Jet(const Jet&)>;

}  // namespace kinetic
