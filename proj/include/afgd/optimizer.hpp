#pragma once

// Factored gradient descent U_{k+1} = U_k - eta_k grad f(U_k U_k^T) U_k with
// pluggable step policies, start-point construction and trajectory recording.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "afgd/error.hpp"
#include "afgd/matcore.hpp"
#include "afgd/objective.hpp"
#include "afgd/random.hpp"
#include "afgd/stepsize.hpp"

namespace afgd {

/// Objective, start point and optional ground truth, with the constants the
/// step policies need resolved once at construction.
class ProblemInstance {
 public:
  static ProblemInstance create(std::shared_ptr<const Objective> objective, std::optional<FactorMatrix> u_star,
                                FactorMatrix u0) {
    if (!objective) throw Error(Errc::InvalidArgument, "objective is null");
    require_compatible(*objective, u0);
    if (u_star) {
      require_same_shape(u_star->mat(), u0.mat(), "ProblemInstance");
    }
    const double m = objective->strong_convexity();
    const double big_m = objective->smoothness();
    if (!(m > 0.0) || !(big_m >= m)) {
      throw Error(Errc::InvalidArgument, "objective constants must satisfy 0 < m <= M");
    }
    return ProblemInstance(std::move(objective), std::move(u_star), std::move(u0));
  }

  /// Same objective and ground truth, different start.
  ProblemInstance with_start(FactorMatrix u0) const { return create(objective_, u_star_, std::move(u0)); }

  const Objective& objective() const noexcept { return *objective_; }
  const std::shared_ptr<const Objective>& objective_ptr() const noexcept { return objective_; }
  const std::optional<FactorMatrix>& u_star() const noexcept { return u_star_; }
  const FactorMatrix& u0() const noexcept { return u0_; }
  Index n() const noexcept { return u0_.n(); }
  Index r() const noexcept { return u0_.r(); }
  double m() const { return objective_->strong_convexity(); }
  double big_m() const { return objective_->smoothness(); }
  double kappa() const { return objective_->condition_number(); }

  const FactorMatrix& require_u_star() const {
    if (!u_star_) throw Error(Errc::MissingGroundTruth, "ground-truth factor U* is not known");
    return *u_star_;
  }
  double sigma_r_xstar() const {
    require_u_star();
    return sigma_r_xstar_;
  }
  double sigma1_xstar() const {
    require_u_star();
    return sigma1_xstar_;
  }
  double sigma_r_x0() const noexcept { return sigma_r_x0_; }
  /// Fixed FGD step computed at X0.
  double eta_fixed() const noexcept { return eta_fixed_; }
  double g0() const noexcept { return g0_; }

 private:
  ProblemInstance(std::shared_ptr<const Objective> objective, std::optional<FactorMatrix> u_star, FactorMatrix u0)
      : objective_(std::move(objective)), u_star_(std::move(u_star)), u0_(std::move(u0)) {
    // Singular values of U U^T are the squared singular values of U.
    if (u_star_) {
      sigma_r_xstar_ = square(sigma_min_positive(u_star_->mat()));
      sigma1_xstar_ = square(spectral_norm(u_star_->mat()));
    }
    const Vector sv0 = singular_values(u0_.mat());
    const Index rank0 = numerical_rank(sv0, u0_.n(), u0_.r());
    sigma_r_x0_ = rank0 > 0 ? square(sv0(rank0 - 1)) : 0.0;
    const Matrix x0 = u0_.gram();
    g0_ = objective_->eval(x0);
    eta_fixed_ = eta_fgd(objective_->smoothness(), square(sv0(0)), spectral_norm(objective_->grad(x0)));
  }

  static double square(double v) { return v * v; }

  std::shared_ptr<const Objective> objective_;
  std::optional<FactorMatrix> u_star_;
  FactorMatrix u0_;
  double sigma_r_xstar_ = 0.0;
  double sigma1_xstar_ = 0.0;
  double sigma_r_x0_ = 0.0;
  double eta_fixed_ = 0.0;
  double g0_ = 0.0;
};

// ---------------------------------------------------------------------------
// Initialization

struct InitCondition {
  bool holds;
  double lhs;
  double rhs;
};

/// Radius sigma_r(U*) / (100 kappa) * sigma_r(X*) / sigma_1(X*) of the local
/// basin assumed by the convergence analysis.
inline double init_radius(const FactorMatrix& u_star, double kappa) {
  const double sr_u = sigma_min_positive(u_star.mat());
  const double s1_u = spectral_norm(u_star.mat());
  return sr_u / (100.0 * kappa) * (sr_u * sr_u) / (s1_u * s1_u);
}

// lhs <= rhs up to one part in 1e12, so a start placed exactly on the
// boundary still counts as inside.
inline constexpr double kInitBoundarySlack = 1e-12;

inline InitCondition check_init_condition(const ProblemInstance& inst, const FactorMatrix& u) {
  const FactorMatrix& u_star = inst.require_u_star();
  const double lhs = dist(u, u_star);
  const double rhs = init_radius(u_star, inst.kappa());
  return {lhs <= rhs * (1.0 + kInitBoundarySlack), lhs, rhs};
}

inline InitCondition check_init_condition(const ProblemInstance& inst) {
  return check_init_condition(inst, inst.u0());
}

/// U0 = U* + E with DIST(U0, U*) = safety * init_radius. E is Gaussian with
/// the skew part of U*^T E removed, so U*^T U0 is symmetric positive definite,
/// the identity is the optimal aligner and DIST equals ||E||_F exactly.
inline FactorMatrix init_near(const FactorMatrix& u_star, std::uint64_t seed, double safety, double kappa = 1.0) {
  if (!(safety > 0.0 && safety <= 1.0)) throw Error(Errc::InvalidArgument, "safety must lie in (0, 1]");
  const Matrix& us = u_star.mat();
  Rng rng(seed);
  Matrix e = rng.normal_matrix(us.rows(), us.cols());
  const Matrix s = us.transpose() * e;
  const Matrix skew = 0.5 * (s - s.transpose());
  const Matrix gram = us.transpose() * us;
  e -= us * gram.completeOrthogonalDecomposition().solve(skew);
  const double norm = e.norm();
  if (!(norm > 0.0)) throw Error(Errc::DegenerateProblem, "perturbation vanished after symmetrization");
  e *= safety * init_radius(u_star, kappa) / norm;
  return FactorMatrix(us + e);
}

/// U0 with i.i.d. Uniform(-scale, scale) entries, independent of U*.
inline FactorMatrix init_far(const FactorMatrix& u_star, std::uint64_t seed, double scale = 1.0) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw Error(Errc::InvalidArgument, "scale must be positive");
  Rng rng(seed);
  Matrix u = rng.uniform_matrix(u_star.n(), u_star.r(), -scale, scale);
  // U = 0 is a stationary point of g and cannot serve as a start.
  if (u.isZero(0.0)) throw Error(Errc::DegenerateProblem, "far start drew the all-zero factor");
  return FactorMatrix(std::move(u));
}

// ---------------------------------------------------------------------------
// Iteration

struct IterateRecord {
  int k = 0;
  double g_value = 0.0;
  double rel_error = 1.0;
  std::optional<double> dist_sq;
  double eta_used = 0.0;  // step taken from U_k to U_{k+1}; 0 on the last record
  double grad_norm_sq = 0.0;
  double delta_injected = 0.0;
};

enum class Termination { MaxIters, Tolerance, Stationary, Diverged };

constexpr const char* to_string(Termination t) noexcept {
  switch (t) {
    case Termination::MaxIters: return "MaxIters";
    case Termination::Tolerance: return "Tolerance";
    case Termination::Stationary: return "Stationary";
    case Termination::Diverged: return "Diverged";
  }
  return "Unknown";
}

struct Trajectory {
  std::vector<IterateRecord> records;
  Termination terminated_reason = Termination::MaxIters;
  std::optional<FactorMatrix> last_iterate;

  /// First k with rel_error <= tol.
  std::optional<int> iterations_to(double tol) const {
    for (const auto& rec : records) {
      if (rec.rel_error <= tol) return rec.k;
    }
    return std::nullopt;
  }
};

/// Terminate as stationary once ||grad f(X) U||_F^2 < 1e-28 max(1, ||U||_F^4).
inline constexpr double kStationarityFloor = 1e-28;

inline double stationarity_floor(const FactorMatrix& u) {
  const double s = u.mat().squaredNorm();
  return kStationarityFloor * std::max(1.0, s * s);
}

/// Quantities at one iterate that both the step rule and the record need.
struct IterateEvaluation {
  double g_value = 0.0;
  Matrix x;          // U U^T
  Matrix grad;       // grad f(X), n x n
  Matrix direction;  // grad f(X) U
  double grad_norm_sq = 0.0;
  std::optional<double> dist_sq;
};

/// Everything an observer sees about one accepted step.
struct StepObservation {
  const FactorMatrix& current;
  const FactorMatrix& next;
  const IterateRecord& record;
  const StepContext& context;
};

using StepObserver = std::function<void(const StepObservation&)>;

struct StepResult {
  FactorMatrix next;
  IterateRecord record;
  StepContext context;
};

/// Runs one policy on one instance. The only mutable state is the stream
/// of estimation-noise draws for EstimatedDist policies.
class FactoredDescent {
 public:
  FactoredDescent(const ProblemInstance& inst, StepPolicy policy) : inst_(inst), policy_(std::move(policy)) {
    policy_.validate();
    if (policy_.kind != StepKind::FixedFgd) inst_.require_u_star();
    if (const auto* est = std::get_if<EstimatedDist>(&policy_.dist_source)) noise_.emplace(est->seed);
  }

  const StepPolicy& policy() const noexcept { return policy_; }

  IterateEvaluation evaluate(const FactorMatrix& u) const {
    require_compatible(inst_.objective(), u);
    IterateEvaluation ev;
    ev.x = u.gram();
    ev.g_value = inst_.objective().eval(ev.x);
    ev.grad = inst_.objective().grad(ev.x);
    ev.direction = ev.grad * u.mat();
    ev.grad_norm_sq = ev.direction.squaredNorm();
    if (inst_.u_star()) ev.dist_sq = dist_sq(u, *inst_.u_star());
    return ev;
  }

  /// Step context at `u`; draws the next estimation-noise sample if any.
  StepContext context(const FactorMatrix& u, const IterateEvaluation& ev) {
    StepContext ctx;
    ctx.eta_fixed = inst_.eta_fixed();
    ctx.m = inst_.m();
    ctx.grad_norm_sq = ev.grad_norm_sq;
    ctx.grad_floor = adaptive_grad_floor(u);
    if (policy_.kind == StepKind::FixedFgd) return ctx;

    ctx.sigma_r = policy_.sigma_source == SigmaSource::TrueXStar ? inst_.sigma_r_xstar() : inst_.sigma_r_x0();
    ctx.dist_sq = ev.dist_sq.value();
    if (noise_) {
      const double rho = std::get<EstimatedDist>(policy_.dist_source).rho;
      ctx.delta_k = rho * ctx.dist_sq * noise_->uniform(-1.0, 1.0);
    }
    if (policy_.kind == StepKind::AdaptiveExact) {
      ctx.eta_hat = eta_hat(inst_.big_m(), ev.x, ev.grad, u);
    }
    return ctx;
  }

  IterateRecord make_record(int k, const IterateEvaluation& ev) const {
    IterateRecord rec;
    rec.k = k;
    rec.g_value = ev.g_value;
    rec.rel_error = inst_.g0() > 0.0 ? ev.g_value / inst_.g0() : (k == 0 ? 1.0 : 0.0);
    rec.dist_sq = ev.dist_sq;
    rec.grad_norm_sq = ev.grad_norm_sq;
    return rec;
  }

  /// U' = U - eta_k grad f(U U^T) U, where eta_k comes from the policy.
  StepResult step(const FactorMatrix& u, int k = 0) {
    const IterateEvaluation ev = evaluate(u);
    return advance(u, ev, make_record(k, ev));
  }

  Trajectory run(int max_iters, double rel_tol, const StepObserver& observer = {}) {
    if (max_iters < 1) throw Error(Errc::InvalidArgument, "max_iters must be at least 1");
    if (!(rel_tol > 0.0)) throw Error(Errc::InvalidArgument, "rel_tol must be positive");

    Trajectory traj;
    FactorMatrix u = inst_.u0();
    for (int k = 0;; ++k) {
      const IterateEvaluation ev = evaluate(u);
      IterateRecord rec = make_record(k, ev);
      if (!std::isfinite(rec.g_value) || !std::isfinite(ev.grad_norm_sq)) {
        traj.terminated_reason = Termination::Diverged;
        break;
      }

      std::optional<Termination> stop;
      if (rec.rel_error <= rel_tol) {
        stop = Termination::Tolerance;
      } else if (ev.grad_norm_sq < stationarity_floor(u)) {
        stop = Termination::Stationary;
      } else if (k >= max_iters) {
        stop = Termination::MaxIters;
      }
      if (stop) {
        traj.records.push_back(rec);
        traj.terminated_reason = *stop;
        break;
      }

      try {
        StepResult res = advance(u, ev, rec);
        traj.records.push_back(res.record);
        if (observer) observer(StepObservation{u, res.next, traj.records.back(), res.context});
        u = std::move(res.next);
      } catch (const Error& e) {
        if (e.code() != Errc::NumericalBlowup) throw;
        traj.records.push_back(rec);
        traj.terminated_reason = Termination::Diverged;
        break;
      }
    }
    traj.last_iterate = std::move(u);
    return traj;
  }

 private:
  StepResult advance(const FactorMatrix& u, const IterateEvaluation& ev, IterateRecord rec) {
    StepContext ctx = context(u, ev);
    const double eta = select_step(policy_, ctx);
    Matrix next = u.mat() - eta * ev.direction;
    if (!next.allFinite() || !std::isfinite(eta)) {
      throw Error(Errc::NumericalBlowup, "iterate " + std::to_string(rec.k + 1) + " has non-finite entries");
    }
    rec.eta_used = eta;
    rec.delta_injected = ctx.delta_k;
    return {FactorMatrix(std::move(next)), rec, ctx};
  }

  const ProblemInstance& inst_;
  StepPolicy policy_;
  std::optional<Rng> noise_;
};

inline std::pair<FactorMatrix, IterateRecord> step(const FactorMatrix& u, const ProblemInstance& inst,
                                                   const StepPolicy& policy) {
  FactoredDescent fd(inst, policy);
  StepResult res = fd.step(u);
  return {std::move(res.next), res.record};
}

inline Trajectory run(const ProblemInstance& inst, const StepPolicy& policy, int max_iters, double rel_tol,
                      const StepObserver& observer = {}) {
  return FactoredDescent(inst, policy).run(max_iters, rel_tol, observer);
}

}  // namespace afgd
