#pragma once

#include <cmath>
#include <complex>
#include <random>

#include "btq/numerics.hpp"

namespace btq::testutil {

inline bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

inline bool close(btq::cdouble a, btq::cdouble b, double tol) {
  return std::abs(a - b) <= tol;
}

// Fixed-seed generator so every test run sees the same samples.
inline std::mt19937& rng() {
  static std::mt19937 gen(987654321u);
  return gen;
}

inline double uniform(double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  return d(rng());
}

inline btq::numerics::ComplexMatrix random_hermitian(int n) {
  btq::numerics::ComplexMatrix a(n, n);
  for (int i = 0; i < n; ++i) {
    a.at(i, i) = uniform(-1, 1);
    for (int j = i + 1; j < n; ++j) {
      btq::cdouble v(uniform(-1, 1), uniform(-1, 1));
      a.at(i, j) = v;
      a.at(j, i) = std::conj(v);
    }
  }
  return a;
}

// Kahan compensated summation, used as the independent reference for tree_sum.
inline double kahan_sum(std::span<const double> xs) {
  double s = 0.0, c = 0.0;
  for (double x : xs) {
    double y = x - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s;
}

}  // namespace btq::testutil
