#pragma once

// Step sizes for the factored update U' = U - eta * grad f(X) U.
//
//   fixed     eta      = 1 / (16 (M ||X0||_2 + ||grad f(X0)||_2))
//   local     eta_hat  = 1 / (16 (M ||X||_2 + ||grad f(X) Q_U Q_U^T||_2))
//   exact     eta_star = 4 eta_hat / 5 + 3 m sigma_r D / (20 G)
//   practical eta_k    = eta + 3 m sigma_r(X0) D / (20 G)
//
// with D = DIST(U, U*)^2 and G = ||grad f(X) U||_F^2. eta_star is the vertex
// of the quadratic upper bound on DIST(U', U*)^2 as a function of the step.

#include <cstdint>
#include <string>
#include <variant>

#include "afgd/error.hpp"
#include "afgd/matcore.hpp"

namespace afgd {

enum class StepKind { FixedFgd, AdaptiveExact, AdaptivePractical };

/// Which matrix supplies sigma_r in the adaptive term.
enum class SigmaSource { TrueXStar, FromX0 };

struct TrueDist {};

/// Synthetic distance estimator: DIST_hat^2 = DIST^2 + Delta_k with
/// Delta_k = rho * DIST^2 * u_k, u_k ~ Uniform(-1, 1) drawn from `seed`.
struct EstimatedDist {
  double rho = 0.5;
  std::uint64_t seed = 0;
};

using DistSource = std::variant<TrueDist, EstimatedDist>;

struct StepPolicy {
  StepKind kind = StepKind::FixedFgd;
  SigmaSource sigma_source = SigmaSource::FromX0;
  DistSource dist_source = TrueDist{};

  static StepPolicy fgd() { return {StepKind::FixedFgd, SigmaSource::FromX0, TrueDist{}}; }
  static StepPolicy adaptive_exact() { return {StepKind::AdaptiveExact, SigmaSource::TrueXStar, TrueDist{}}; }
  static StepPolicy adaptive_practical() {
    return {StepKind::AdaptivePractical, SigmaSource::FromX0, TrueDist{}};
  }

  bool estimated() const { return std::holds_alternative<EstimatedDist>(dist_source); }

  /// Estimation noise only makes sense for the adaptive kinds. The contraction
  /// guarantee assumes |Delta_k| <= DIST^2 / 2, which caps rho at 1/2.
  void validate() const {
    if (const auto* est = std::get_if<EstimatedDist>(&dist_source)) {
      if (!(est->rho >= 0.0 && est->rho <= 0.5)) {
        throw Error(Errc::InvalidArgument, "estimation noise rho must lie in [0, 1/2]");
      }
      if (kind == StepKind::FixedFgd) {
        throw Error(Errc::InvalidArgument, "the fixed step does not use a distance estimate");
      }
    }
  }

  std::string name() const {
    std::string base;
    switch (kind) {
      case StepKind::FixedFgd: base = "fgd"; break;
      case StepKind::AdaptiveExact: base = "adaptive-exact"; break;
      case StepKind::AdaptivePractical: base = "adaptive-practical"; break;
    }
    if (estimated()) base += "-est";
    return base;
  }
};

/// Inputs to the step-size formulas at one iterate. `dist_sq` is the true
/// DIST(U_k, U*)^2; the estimated value is dist_sq + delta_k. When
/// grad_norm_sq < grad_floor the adaptive term is dropped and only the fixed
/// component is returned.
struct StepContext {
  double eta_fixed = 0.0;
  double eta_hat = 0.0;
  double m = 0.0;
  double sigma_r = 0.0;
  double dist_sq = 0.0;
  double grad_norm_sq = 0.0;
  double delta_k = 0.0;
  double grad_floor = 0.0;

  double estimated_dist_sq() const { return dist_sq + delta_k; }
};

/// Relative floor on ||grad f(X) U||_F^2, scaled by max(1, ||U||_F^4).
inline constexpr double kAdaptiveGradFloor = 1e-14;

inline double adaptive_grad_floor(const FactorMatrix& u) {
  const double s = u.mat().squaredNorm();
  return kAdaptiveGradFloor * std::max(1.0, s * s);
}

inline double eta_fgd(double smoothness, double x0_spectral, double grad0_spectral) {
  const double denom = 16.0 * (smoothness * x0_spectral + grad0_spectral);
  if (!(denom > 0.0) || !std::isfinite(denom)) {
    throw Error(Errc::DegenerateProblem, "fixed step denominator is not positive");
  }
  return 1.0 / denom;
}

inline double eta_fgd(double smoothness, const Matrix& x0, const Matrix& grad0) {
  return eta_fgd(smoothness, spectral_norm(x0), spectral_norm(grad0));
}

/// ||grad Q_U Q_U^T||_2 is evaluated as ||grad Q_U||_2 (Q_U has orthonormal
/// columns), avoiding the n x n projector.
inline double eta_hat(double smoothness, const Matrix& x, const Matrix& grad, const FactorMatrix& u) {
  require_same_shape(x, grad, "eta_hat");
  if (x.rows() != u.n()) throw Error(Errc::ShapeMismatch, "eta_hat: factor and X disagree in size");
  const double mismatch = (u.gram() - x).cwiseAbs().maxCoeff();
  if (mismatch > 1e-9 * std::max(1.0, x.cwiseAbs().maxCoeff())) {
    throw Error(Errc::InvalidArgument, "eta_hat: X is not U U^T");
  }
  const Matrix q = column_space_basis(u);
  const double projected = spectral_norm(grad * q);
  return 1.0 / (16.0 * (smoothness * spectral_norm(x) + projected));
}

namespace detail {

inline bool below_floor(const StepContext& ctx) { return ctx.grad_norm_sq < ctx.grad_floor; }

inline double adaptive_term(const StepContext& ctx, double dist_sq) {
  if (!(ctx.grad_norm_sq > 0.0)) {
    throw Error(Errc::ZeroGradient, "adaptive step needs ||grad f(X) U||_F^2 > 0");
  }
  return 3.0 * ctx.m * ctx.sigma_r * dist_sq / (20.0 * ctx.grad_norm_sq);
}

inline double checked_estimate(const StepContext& ctx) {
  const double est = ctx.estimated_dist_sq();
  if (est < 0.0) throw Error(Errc::NegativeEstimate, "estimated DIST^2 is negative");
  return est;
}

}  // namespace detail

inline double eta_star(const StepContext& ctx) {
  const double base = 0.8 * ctx.eta_hat;
  if (detail::below_floor(ctx)) return base;
  return base + detail::adaptive_term(ctx, ctx.dist_sq);
}

/// Same formula as eta_star, driven by the estimated distance.
inline double eta_with_estimation(const StepContext& ctx) {
  const double est = detail::checked_estimate(ctx);
  const double base = 0.8 * ctx.eta_hat;
  if (detail::below_floor(ctx)) return base;
  return base + detail::adaptive_term(ctx, est);
}

/// Fixed step plus the adaptive term; uses the estimated distance when
/// delta_k != 0.
inline double eta_practical(const StepContext& ctx) {
  const double est = detail::checked_estimate(ctx);
  if (detail::below_floor(ctx)) return ctx.eta_fixed;
  return ctx.eta_fixed + detail::adaptive_term(ctx, est);
}

inline double select_step(const StepPolicy& policy, const StepContext& ctx) {
  switch (policy.kind) {
    case StepKind::FixedFgd: return ctx.eta_fixed;
    case StepKind::AdaptiveExact: return policy.estimated() ? eta_with_estimation(ctx) : eta_star(ctx);
    case StepKind::AdaptivePractical: return eta_practical(ctx);
  }
  throw Error(Errc::InvalidArgument, "unknown step kind");
}

}  // namespace afgd
