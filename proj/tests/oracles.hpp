#pragma once

// Test-only reference computations, independent of the library's SVD paths.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "afgd/matcore.hpp"
#include "afgd/random.hpp"

namespace afgd::testing {

/// min over R in {[1], [-1]} of ||U - V R||_F.
inline double dist_r1_by_signs(const Matrix& u, const Matrix& v) {
  return std::min((u - v).norm(), (u + v).norm());
}

/// min over R(theta) diag(1, s), s = +-1, theta on a grid of `step`, of
/// ||U - V R||_F for r = 2.
inline double dist_r2_by_grid(const Matrix& u, const Matrix& v, double step = 1e-4) {
  double best = std::numeric_limits<double>::infinity();
  Matrix r(2, 2);
  const int count = static_cast<int>(std::ceil(2.0 * std::numbers::pi / step));
  for (int i = 0; i < count; ++i) {
    const double th = i * step;
    const double c = std::cos(th), s = std::sin(th);
    for (double refl : {1.0, -1.0}) {
      r << c, -s * refl, s, c * refl;
      best = std::min(best, (u - v * r).squaredNorm());
    }
  }
  return std::sqrt(best);
}

/// Central difference (f(X + tE) - f(X - tE)) / (2t).
inline double central_difference(const std::function<double(const Matrix&)>& f, const Matrix& x, const Matrix& e,
                                 double t) {
  return (f(x + t * e) - f(x - t * e)) / (2.0 * t);
}

inline Matrix random_symmetric(Index n, Rng& rng) {
  const Matrix g = rng.uniform_matrix(n, n, -1.0, 1.0);
  return 0.5 * (g + g.transpose());
}

inline FactorMatrix random_factor(Index n, Index r, Rng& rng) {
  return FactorMatrix(rng.uniform_matrix(n, r, -1.0, 1.0));
}

}  // namespace afgd::testing
