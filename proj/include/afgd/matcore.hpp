#pragma once

// Dense-matrix primitives and factor-space geometry: norms, singular values,
// column-space projectors, orthogonal Procrustes alignment and the
// rotation-invariant factor distance DIST(U, V) = min_R ||U - V R||_F.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "afgd/error.hpp"

namespace afgd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw Error(Errc::NonFinite, std::string(what) + " has non-finite entries");
}

inline std::string shape_string(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename A, typename B>
void require_same_shape(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b,
                        const char* context) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(Errc::ShapeMismatch, std::string(context) + ": " +
                                         shape_string(a.rows(), a.cols()) + " vs " +
                                         shape_string(b.rows(), b.cols()));
  }
}

/// Dense n x r factor U of X = U U^T. Entries are finite and 1 <= r <= n.
class FactorMatrix {
 public:
  explicit FactorMatrix(Matrix u) : u_(std::move(u)) {
    if (u_.cols() < 1 || u_.rows() < u_.cols()) {
      throw Error(Errc::InvalidArgument,
                  "factor must be n x r with 1 <= r <= n, got " + shape_string(u_.rows(), u_.cols()));
    }
    require_finite(u_, "factor matrix");
  }

  const Matrix& mat() const noexcept { return u_; }
  Index n() const noexcept { return u_.rows(); }
  Index r() const noexcept { return u_.cols(); }

  /// X = U U^T.
  Matrix gram() const { return u_ * u_.transpose(); }

  friend bool operator==(const FactorMatrix& a, const FactorMatrix& b) {
    return a.u_.rows() == b.u_.rows() && a.u_.cols() == b.u_.cols() && a.u_ == b.u_;
  }

 private:
  Matrix u_;
};

inline constexpr double kOrthonormalTolerance = 1e-10;

/// An r x r matrix R with R^T R = I (max-abs deviation at most 1e-10).
class OrthonormalAligner {
 public:
  explicit OrthonormalAligner(Matrix r) : r_(std::move(r)) {
    if (r_.rows() != r_.cols() || r_.rows() < 1) {
      throw Error(Errc::ShapeMismatch, "aligner must be square, got " + shape_string(r_.rows(), r_.cols()));
    }
    const double dev = (r_.transpose() * r_ - Matrix::Identity(r_.rows(), r_.cols())).cwiseAbs().maxCoeff();
    if (!(dev <= kOrthonormalTolerance)) {
      throw Error(Errc::InvalidArgument, "aligner is not orthonormal (deviation " + std::to_string(dev) + ")");
    }
  }

  const Matrix& mat() const noexcept { return r_; }

 private:
  Matrix r_;
};

template <typename Derived>
double frobenius_norm(const Eigen::MatrixBase<Derived>& m) {
  return m.norm();
}

/// <A, B> = tr(A^T B) as an entrywise sum.
template <typename A, typename B>
double frobenius_inner(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  require_same_shape(a, b, "frobenius_inner");
  return a.cwiseProduct(b).sum();
}

/// Singular values in descending order, length min(rows, cols).
inline Vector singular_values(const Matrix& m) {
  require_finite(m, "singular_values input");
  if (m.size() == 0) return Vector();
  Eigen::BDCSVD<Matrix> svd(m);
  return svd.singularValues();
}

inline double spectral_norm(const Matrix& m) {
  const Vector s = singular_values(m);
  return s.size() == 0 ? 0.0 : s(0);
}

/// Threshold above which a singular value counts as strictly positive:
/// max(rows, cols) * sigma_1 * eps, floored at 1e-12.
inline double rank_tolerance(Index rows, Index cols, double sigma1) {
  const double eps = std::numeric_limits<double>::epsilon();
  return std::max(static_cast<double>(std::max(rows, cols)) * sigma1 * eps, 1e-12);
}

inline Index numerical_rank(const Vector& sv, Index rows, Index cols) {
  if (sv.size() == 0) return 0;
  const double tol = rank_tolerance(rows, cols, sv(0));
  return static_cast<Index>((sv.array() > tol).count());
}

/// Smallest singular value strictly above the rank tolerance.
inline double sigma_min_positive(const Matrix& m) {
  const Vector s = singular_values(m);
  const Index rank = numerical_rank(s, m.rows(), m.cols());
  if (rank == 0) throw Error(Errc::ZeroMatrix, "no singular value above the rank tolerance");
  return s(rank - 1);
}

inline double sigma_max(const Matrix& m) {
  const Vector s = singular_values(m);
  if (numerical_rank(s, m.rows(), m.cols()) == 0) {
    throw Error(Errc::ZeroMatrix, "no singular value above the rank tolerance");
  }
  return s(0);
}

/// Orthonormal basis Q_U (n x rank) of the column space of U.
inline Matrix column_space_basis(const FactorMatrix& u) {
  Eigen::JacobiSVD<Matrix> svd(u.mat(), Eigen::ComputeThinU);
  const Index rank = numerical_rank(svd.singularValues(), u.n(), u.r());
  if (rank == 0) throw Error(Errc::ZeroMatrix, "column space of an all-zero factor");
  return svd.matrixU().leftCols(rank);
}

/// P = Q_U Q_U^T, the orthogonal projector onto col(U).
inline Matrix column_space_projector(const FactorMatrix& u) {
  const Matrix q = column_space_basis(u);
  return q * q.transpose();
}

/// argmin over orthonormal R of ||U - V R||_F. With V^T U = P S Q^T the
/// minimizer is R = P Q^T; any completion of the singular bases is optimal
/// when V^T U is rank deficient.
inline OrthonormalAligner procrustes_align(const FactorMatrix& u, const FactorMatrix& v) {
  require_same_shape(u.mat(), v.mat(), "procrustes_align");
  const Matrix cross = v.mat().transpose() * u.mat();
  Eigen::JacobiSVD<Matrix> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return OrthonormalAligner(svd.matrixU() * svd.matrixV().transpose());
}

/// U - V R*, the aligned residual.
inline Matrix aligned_residual(const FactorMatrix& u, const FactorMatrix& v) {
  const OrthonormalAligner r = procrustes_align(u, v);
  return u.mat() - v.mat() * r.mat();
}

inline double dist_sq(const FactorMatrix& u, const FactorMatrix& v) {
  return aligned_residual(u, v).squaredNorm();
}

inline double dist(const FactorMatrix& u, const FactorMatrix& v) {
  return aligned_residual(u, v).norm();
}

}  // namespace afgd
