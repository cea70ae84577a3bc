#pragma once

// Portable random streams. The engine is std::mt19937_64, whose output
// sequence is fixed by the C++ standard; the conversions to real numbers are
// written out here (std distributions are implementation-defined) so the same
// seed yields the same matrices on any conforming toolchain:
//
//   uniform01 : (engine() >> 11) * 2^-53, in [0, 1)
//   uniform   : lo + (hi - lo) * uniform01
//   normal    : Box-Muller, sqrt(-2 ln(1 - u1)) * cos(2 pi u2), two draws each
//
// Matrices are filled row by row: entry (i, j) is drawn before (i, j + 1).

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "afgd/matcore.hpp"

namespace afgd {

/// Independent sub-stream seed for a given stream index.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  Matrix uniform_matrix(Index rows, Index cols, double lo, double hi) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = uniform(lo, hi);
    return m;
  }

  Matrix normal_matrix(Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = normal();
    return m;
  }

 private:
  std::mt19937_64 engine_;
};

/// Haar-distributed orthonormal r x r matrix: QR of a Gaussian matrix with
/// the signs of diag(R) folded into Q.
inline Matrix random_orthonormal(Index r, Rng& rng) {
  const Matrix g = rng.normal_matrix(r, r);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(r, r);
  const Matrix upper = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < r; ++j) {
    if (upper(j, j) < 0) q.col(j) *= -1.0;
  }
  return q;
}

}  // namespace afgd
