#pragma once

// Numerical checks of the local convergence analysis for factored descent.
// Each check yields an InequalityReport with slack = rhs - lhs; the report
// holds when slack >= -(tol_abs + tol_rel |rhs|). Checks whose hypotheses are
// not met at the iterate (outside the initialization radius, or a step that
// is not the one the inequality is about) are marked not applicable and never
// count as failures.
//
// The step-level checks, with D = DIST(U_k, U*)^2, D' = DIST(U_{k+1}, U*)^2,
// G = ||grad f(X_k) U_k||_F^2 and s = sigma_r(X*):
//
//   Lemma1            5 eta / 6                  <= eta_hat
//   Lemma2            4 eta_hat / 5 G + 3 m s D / 20 <= <grad f(X) U, U - U* R>
//   Eq4Bound          D'  <= eta^2 G + D - 2 eta (4 eta_hat / 5 G + 3 m s D / 20)
//   Theorem1Fgd       D'  <= (1 - 3 m eta s / 10) D
//   Theorem1Adaptive  D'  <= (1 - 9 m eta_star s / 80) D
//   Eq7               D'  <= (1 - 12 m s eta_hat / 25) D      (exact step only)
//   Eq9               D'  <= (1 - 3 m s eta_star / 20) D      (exact step only)

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "afgd/matcore.hpp"
#include "afgd/optimizer.hpp"
#include "afgd/random.hpp"
#include "afgd/stepsize.hpp"

namespace afgd {

enum class Check { Lemma1, Lemma2, Eq4Bound, Theorem1Fgd, Theorem1Adaptive, Eq7, Eq9 };

constexpr const char* to_string(Check c) noexcept {
  switch (c) {
    case Check::Lemma1: return "Lemma1";
    case Check::Lemma2: return "Lemma2";
    case Check::Eq4Bound: return "Eq4Bound";
    case Check::Theorem1Fgd: return "Theorem1-FGD";
    case Check::Theorem1Adaptive: return "Theorem1-Adaptive";
    case Check::Eq7: return "Eq7";
    case Check::Eq9: return "Eq9";
  }
  return "Unknown";
}

struct Tolerance {
  double abs = 1e-9;
  double rel = 1e-9;
};

struct InequalityReport {
  int k = 0;
  Check name = Check::Lemma1;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  bool holds = true;
  bool applicable = true;

  bool failed() const { return applicable && !holds; }
};

inline InequalityReport make_report(int k, Check name, double lhs, double rhs, bool applicable,
                                    Tolerance tol = {}) {
  InequalityReport rep;
  rep.k = k;
  rep.name = name;
  rep.lhs = lhs;
  rep.rhs = rhs;
  rep.slack = rhs - lhs;
  rep.holds = rep.slack >= -(tol.abs + tol.rel * std::abs(rhs));
  rep.applicable = applicable;
  return rep;
}

/// Quadratic-in-eta upper bound on DIST(U_{k+1}, U*)^2.
inline double eq4_rhs(double eta, double dist_sq, double grad_norm_sq, double eta_hat, double m, double sigma_r) {
  return eta * eta * grad_norm_sq + dist_sq -
         2.0 * eta * (0.8 * eta_hat * grad_norm_sq + 0.15 * m * sigma_r * dist_sq);
}

inline double eq4_rhs(double eta, const StepContext& ctx) {
  return eq4_rhs(eta, ctx.dist_sq, ctx.grad_norm_sq, ctx.eta_hat, ctx.m, ctx.sigma_r);
}

/// eta_hat at U for the instance's objective.
inline double local_eta_hat(const ProblemInstance& inst, const FactorMatrix& u) {
  const Matrix x = u.gram();
  return eta_hat(inst.big_m(), x, inst.objective().grad(x), u);
}

inline bool within_init_radius(const ProblemInstance& inst, const FactorMatrix& u) {
  return inst.u_star() && check_init_condition(inst, u).holds;
}

inline InequalityReport check_lemma1(const ProblemInstance& inst, const FactorMatrix& u, int k = 0,
                                     Tolerance tol = {}) {
  return make_report(k, Check::Lemma1, 5.0 * inst.eta_fixed() / 6.0, local_eta_hat(inst, u),
                     within_init_radius(inst, u), tol);
}

inline InequalityReport check_lemma2(const ProblemInstance& inst, const FactorMatrix& u, int k = 0,
                                     Tolerance tol = {}) {
  const FactorMatrix& u_star = inst.require_u_star();
  const Matrix x = u.gram();
  const Matrix grad = inst.objective().grad(x);
  const Matrix direction = grad * u.mat();
  const double g = direction.squaredNorm();
  const Matrix residual = aligned_residual(u, u_star);  // U - U* R*_U
  const double d = residual.squaredNorm();
  const double eh = eta_hat(inst.big_m(), x, grad, u);
  const double lhs = 0.8 * eh * g + 0.15 * inst.m() * inst.sigma_r_xstar() * d;
  const double rhs = frobenius_inner(direction, residual);
  return make_report(k, Check::Lemma2, lhs, rhs, within_init_radius(inst, u), tol);
}

/// Data for the checks that relate two consecutive iterates.
struct StepData {
  int k = 0;
  double dist_sq = 0.0;
  double next_dist_sq = 0.0;
  double eta_used = 0.0;
  double eta_fixed = 0.0;
  double eta_hat = 0.0;
  double grad_norm_sq = 0.0;
  double m = 0.0;
  double sigma_r = 0.0;  // sigma_r(X*)
  bool in_radius = false;

  double eta_star() const {
    return 0.8 * eta_hat + (grad_norm_sq > 0.0 ? 3.0 * m * sigma_r * dist_sq / (20.0 * grad_norm_sq) : 0.0);
  }
  StepContext context() const {
    StepContext ctx;
    ctx.eta_fixed = eta_fixed;
    ctx.eta_hat = eta_hat;
    ctx.m = m;
    ctx.sigma_r = sigma_r;
    ctx.dist_sq = dist_sq;
    ctx.grad_norm_sq = grad_norm_sq;
    return ctx;
  }
};

inline StepData capture_step(const ProblemInstance& inst, const FactorMatrix& u, const FactorMatrix& next,
                             double eta_used, int k = 0) {
  const FactorMatrix& u_star = inst.require_u_star();
  StepData s;
  s.k = k;
  s.dist_sq = dist_sq(u, u_star);
  s.next_dist_sq = dist_sq(next, u_star);
  s.eta_used = eta_used;
  s.eta_fixed = inst.eta_fixed();
  s.eta_hat = local_eta_hat(inst, u);
  s.grad_norm_sq = factored_gradient(inst.objective(), u).squaredNorm();
  s.m = inst.m();
  s.sigma_r = inst.sigma_r_xstar();
  s.in_radius = check_init_condition(inst, u).holds;
  return s;
}

// Step-identity tolerance for deciding which inequality a step is about.
inline constexpr double kStepMatchRel = 1e-12;

inline bool is_exact_step(const StepData& s) {
  return std::abs(s.eta_used - s.eta_star()) <= kStepMatchRel * s.eta_star();
}

inline bool is_fixed_step(const StepData& s) {
  return std::abs(s.eta_used - s.eta_fixed) <= kStepMatchRel * s.eta_fixed;
}

/// |eta_k - eta_star| <= eta_star / 2, which is what |Delta_k| <= D / 2 buys.
inline bool within_estimation_band(const StepData& s) {
  return std::abs(s.eta_used - s.eta_star()) <= 0.5 * s.eta_star() * (1.0 + kStepMatchRel);
}

inline InequalityReport check_descent_bound(const StepData& s, Tolerance tol = {}) {
  const double bound = eq4_rhs(s.eta_used, s.dist_sq, s.grad_norm_sq, s.eta_hat, s.m, s.sigma_r);
  return make_report(s.k, Check::Eq4Bound, s.next_dist_sq, bound, s.in_radius, tol);
}

enum class Theorem1Variant { Fgd, Adaptive };

inline InequalityReport check_theorem1(const StepData& s, Theorem1Variant variant, Tolerance tol = {}) {
  if (variant == Theorem1Variant::Fgd) {
    const double factor = 1.0 - 0.3 * s.m * s.eta_fixed * s.sigma_r;
    const bool applicable = s.in_radius && (is_fixed_step(s) || within_estimation_band(s));
    return make_report(s.k, Check::Theorem1Fgd, s.next_dist_sq, factor * s.dist_sq, applicable, tol);
  }
  const double factor = 1.0 - (9.0 / 80.0) * s.m * s.eta_star() * s.sigma_r;
  const bool applicable = s.in_radius && within_estimation_band(s);
  return make_report(s.k, Check::Theorem1Adaptive, s.next_dist_sq, factor * s.dist_sq, applicable, tol);
}

inline InequalityReport check_eq7(const StepData& s, Tolerance tol = {}) {
  const double factor = 1.0 - 0.48 * s.m * s.sigma_r * s.eta_hat;
  return make_report(s.k, Check::Eq7, s.next_dist_sq, factor * s.dist_sq, s.in_radius && is_exact_step(s), tol);
}

inline InequalityReport check_eq9(const StepData& s, Tolerance tol = {}) {
  const double factor = 1.0 - 0.15 * s.m * s.sigma_r * s.eta_star();
  return make_report(s.k, Check::Eq9, s.next_dist_sq, factor * s.dist_sq, s.in_radius && is_exact_step(s), tol);
}

inline constexpr int kEtaStarGridPoints = 41;
inline constexpr int kEtaStarRandomPoints = 20;
inline constexpr double kEtaStarOptimalityTol = 1e-12;

/// eq4_rhs(eta_star) <= eq4_rhs(eta) + 1e-12 on a 41-point grid over
/// [0, 2 eta_star] and 20 uniform draws from the same interval.
inline bool check_eta_star_optimal(const StepContext& ctx, std::uint64_t seed = 0) {
  const double es = eta_star(ctx);
  const double best = eq4_rhs(es, ctx);
  auto ok = [&](double eta) { return best <= eq4_rhs(eta, ctx) + kEtaStarOptimalityTol; };
  for (int i = 0; i < kEtaStarGridPoints; ++i) {
    if (!ok(2.0 * es * i / (kEtaStarGridPoints - 1))) return false;
  }
  Rng rng(seed);
  for (int i = 0; i < kEtaStarRandomPoints; ++i) {
    if (!ok(rng.uniform(0.0, 2.0 * es))) return false;
  }
  return true;
}

/// Collects every theory check along a run; pass observer() to run().
class TheoryRecorder {
 public:
  explicit TheoryRecorder(const ProblemInstance& inst, Tolerance tol = {}) : inst_(inst), tol_(tol) {}

  StepObserver observer() {
    return [this](const StepObservation& obs) { record(obs.current, obs.next, obs.record.eta_used, obs.record.k); };
  }

  void record(const FactorMatrix& u, const FactorMatrix& next, double eta_used, int k) {
    reports_.push_back(check_lemma1(inst_, u, k, tol_));
    reports_.push_back(check_lemma2(inst_, u, k, tol_));
    const StepData s = capture_step(inst_, u, next, eta_used, k);
    reports_.push_back(check_descent_bound(s, tol_));
    reports_.push_back(check_theorem1(s, Theorem1Variant::Fgd, tol_));
    reports_.push_back(check_theorem1(s, Theorem1Variant::Adaptive, tol_));
    reports_.push_back(check_eq7(s, tol_));
    reports_.push_back(check_eq9(s, tol_));
    ++contexts_checked_;
    if (s.grad_norm_sq > 0.0 && !check_eta_star_optimal(s.context(), static_cast<std::uint64_t>(k))) {
      ++eta_star_failures_;
    }
  }

  const std::vector<InequalityReport>& reports() const noexcept { return reports_; }
  int eta_star_contexts() const noexcept { return contexts_checked_; }
  int eta_star_failures() const noexcept { return eta_star_failures_; }

 private:
  const ProblemInstance& inst_;
  Tolerance tol_;
  std::vector<InequalityReport> reports_;
  int contexts_checked_ = 0;
  int eta_star_failures_ = 0;
};

struct CheckTally {
  int applicable = 0;
  int failed = 0;
  int not_applicable = 0;
  double worst_relative_slack = 0.0;  // min over applicable of slack / max(|rhs|, tiny)
};

inline CheckTally tally(const std::vector<InequalityReport>& reports, Check name) {
  CheckTally t;
  bool first = true;
  for (const auto& rep : reports) {
    if (rep.name != name) continue;
    if (!rep.applicable) {
      ++t.not_applicable;
      continue;
    }
    ++t.applicable;
    if (!rep.holds) ++t.failed;
    const double rel = rep.slack / std::max(std::abs(rep.rhs), 1e-300);
    if (first || rel < t.worst_relative_slack) t.worst_relative_slack = rel;
    first = false;
  }
  return t;
}

}  // namespace afgd
