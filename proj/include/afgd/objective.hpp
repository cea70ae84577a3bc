#pragma once

// Convex objectives f over symmetric n x n matrices, and their factored form
// g(U) = f(U U^T).
//
// The descent direction used throughout is grad f(X) * U, not the chain-rule
// gradient of g. For a symmetric gradient the chain rule gives
// grad g(U) = 2 grad f(X) U, so the factor of two lives in the step size and
// the constants m, M below refer to f itself.

#include <memory>
#include <string>
#include <utility>

#include "afgd/error.hpp"
#include "afgd/matcore.hpp"

namespace afgd {

/// f with strong-convexity constant m and smoothness constant M (0 < m <= M).
class Objective {
 public:
  virtual ~Objective() = default;

  virtual Index dim() const = 0;
  virtual double eval(const Matrix& x) const = 0;
  virtual Matrix grad(const Matrix& x) const = 0;
  virtual double strong_convexity() const = 0;
  virtual double smoothness() const = 0;

  double condition_number() const { return smoothness() / strong_convexity(); }
};

struct CurvatureConstants {
  double m;
  double M;
};

/// f(X) = ||X - A||_F^2.
inline double mf_eval(const Matrix& a, const Matrix& x) {
  require_same_shape(a, x, "mf_eval");
  return (x - a).squaredNorm();
}

/// grad f(X) = 2 (X - A).
inline Matrix mf_grad(const Matrix& a, const Matrix& x) {
  require_same_shape(a, x, "mf_grad");
  return 2.0 * (x - a);
}

/// The Hessian of ||X - A||_F^2 is 2 I on matrix space, so m = M = 2.
inline CurvatureConstants mf_constants(const Matrix& /*a*/) { return {2.0, 2.0}; }

inline constexpr double kSymmetryTolerance = 1e-9;

/// Matrix factorization: minimize ||U U^T - A||_F^2 over n x r factors.
class MatrixFactorization final : public Objective {
 public:
  explicit MatrixFactorization(Matrix a) : a_(std::move(a)) {
    if (a_.rows() != a_.cols() || a_.rows() < 1) {
      throw Error(Errc::ShapeMismatch, "target must be square, got " + shape_string(a_.rows(), a_.cols()));
    }
    require_finite(a_, "target matrix");
    const double asym = (a_ - a_.transpose()).cwiseAbs().maxCoeff();
    if (asym > kSymmetryTolerance) {
      throw Error(Errc::InvalidArgument, "target is not symmetric (max asymmetry " + std::to_string(asym) + ")");
    }
  }

  const Matrix& target() const noexcept { return a_; }

  Index dim() const override { return a_.rows(); }
  double eval(const Matrix& x) const override { return mf_eval(a_, x); }
  Matrix grad(const Matrix& x) const override { return mf_grad(a_, x); }
  double strong_convexity() const override { return mf_constants(a_).m; }
  double smoothness() const override { return mf_constants(a_).M; }

 private:
  Matrix a_;
};

inline void require_compatible(const Objective& f, const FactorMatrix& u) {
  if (u.n() != f.dim()) {
    throw Error(Errc::ShapeMismatch, "factor has " + std::to_string(u.n()) + " rows, objective dimension is " +
                                         std::to_string(f.dim()));
  }
}

/// g(U) = f(U U^T).
inline double g_eval(const Objective& f, const FactorMatrix& u) {
  require_compatible(f, u);
  return f.eval(u.gram());
}

/// grad f(U U^T) * U, the direction of the factored update.
inline Matrix factored_gradient(const Objective& f, const FactorMatrix& u) {
  require_compatible(f, u);
  return f.grad(u.gram()) * u.mat();
}

}  // namespace afgd
