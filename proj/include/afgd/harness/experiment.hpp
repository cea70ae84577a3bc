#pragma once

// Instance generation, policy comparison runs and their on-disk artifacts.
//
// Output layout for one comparison in directory DIR:
//
//   DIR/<policy>.csv   iter,g_value,rel_error,dist_sq,eta,grad_norm_sq,delta
//   DIR/checks.csv     iter,name,lhs,rhs,slack,holds,applicable
//                      (name is "<policy>:<check>")
//   DIR/summary.json   config echo, start diagnostics, per-policy results
//
// Reals are written in shortest round-trip form, so identical runs produce
// identical bytes.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "afgd/harness/config.hpp"
#include "afgd/matcore.hpp"
#include "afgd/objective.hpp"
#include "afgd/optimizer.hpp"
#include "afgd/random.hpp"
#include "afgd/theory.hpp"

namespace afgd::harness {

/// U* has i.i.d. Uniform(-1, 1) entries from stream 0 of the seed, A = U* U*^T,
/// and U0 comes from stream 1.
inline ProblemInstance generate_instance(const ExperimentConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, 0));
  FactorMatrix u_star(rng.uniform_matrix(cfg.n, cfg.r, -1.0, 1.0));
  auto objective = std::make_shared<const MatrixFactorization>(u_star.gram());
  const std::uint64_t init_seed = derive_seed(cfg.seed, 1);
  FactorMatrix u0 = std::holds_alternative<NearInit>(cfg.init)
                        ? init_near(u_star, init_seed, std::get<NearInit>(cfg.init).safety,
                                    objective->condition_number())
                        : init_far(u_star, init_seed, std::get<FarInit>(cfg.init).scale);
  return ProblemInstance::create(std::move(objective), std::move(u_star), std::move(u0));
}

struct PolicyRun {
  StepPolicy policy;
  std::optional<Trajectory> trajectory;
  std::string error;  // non-empty when the run failed
  std::vector<InequalityReport> reports;
  int eta_star_contexts = 0;
  int eta_star_failures = 0;

  std::optional<int> iterations_to(double tol) const {
    return trajectory ? trajectory->iterations_to(tol) : std::nullopt;
  }
  int failed_checks() const {
    int count = 0;
    for (const auto& rep : reports) count += rep.failed() ? 1 : 0;
    return count + eta_star_failures;
  }
};

struct RunArtifact {
  ExperimentConfig config;
  InitCondition init{false, 0.0, 0.0};
  double eta_fixed = 0.0;
  std::vector<PolicyRun> runs;

  const PolicyRun* find(StepKind kind) const {
    for (const auto& run : runs) {
      if (run.policy.kind == kind) return &run;
    }
    return nullptr;
  }
  bool any_run_failed() const {
    for (const auto& run : runs) {
      if (!run.error.empty()) return true;
    }
    return false;
  }
  int failed_checks() const {
    int count = 0;
    for (const auto& run : runs) count += run.failed_checks();
    return count;
  }
};

/// Runs every configured policy from the same U0 of the same instance. A
/// failing policy is recorded and does not stop the others.
inline RunArtifact run_comparison(const ExperimentConfig& cfg, const ProblemInstance& inst) {
  if (cfg.policies.empty()) throw Error(Errc::InvalidArgument, "no step policy requested");
  RunArtifact art;
  art.config = cfg;
  art.init = check_init_condition(inst);
  art.eta_fixed = inst.eta_fixed();
  for (const StepPolicy& policy : cfg.step_policies()) {
    PolicyRun pr;
    pr.policy = policy;
    try {
      if (cfg.checks_enabled) {
        TheoryRecorder recorder(inst);
        pr.trajectory = run(inst, policy, cfg.max_iters, cfg.rel_tol, recorder.observer());
        pr.reports = recorder.reports();
        pr.eta_star_contexts = recorder.eta_star_contexts();
        pr.eta_star_failures = recorder.eta_star_failures();
      } else {
        pr.trajectory = run(inst, policy, cfg.max_iters, cfg.rel_tol);
      }
    } catch (const Error& e) {
      pr.error = e.what();
    }
    art.runs.push_back(std::move(pr));
  }
  return art;
}

inline RunArtifact run_comparison(const ExperimentConfig& cfg) {
  return run_comparison(cfg, generate_instance(cfg));
}

// ---------------------------------------------------------------------------
// Serialization

/// Shortest decimal form that parses back to the same double.
inline std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

inline constexpr const char* kTrajectoryHeader = "iter,g_value,rel_error,dist_sq,eta,grad_norm_sq,delta";
inline constexpr const char* kChecksHeader = "iter,name,lhs,rhs,slack,holds,applicable";

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << kTrajectoryHeader << '\n';
  for (const auto& rec : traj.records) {
    os << rec.k << ',' << format_real(rec.g_value) << ',' << format_real(rec.rel_error) << ','
       << (rec.dist_sq ? format_real(*rec.dist_sq) : std::string()) << ',' << format_real(rec.eta_used) << ','
       << format_real(rec.grad_norm_sq) << ',' << format_real(rec.delta_injected) << '\n';
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Inverse of write_trajectory_csv for the numeric fields.
inline std::vector<IterateRecord> read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kTrajectoryHeader) {
    throw Error(Errc::InvalidArgument, "trajectory CSV: unexpected header");
  }
  std::vector<IterateRecord> out;
  while (std::getline(is, line)) {
    const auto f = split_csv_line(line);
    if (f.size() != 7) throw Error(Errc::InvalidArgument, "trajectory CSV: expected 7 fields");
    IterateRecord rec;
    rec.k = parse_number<int>(f[0], "iter");
    rec.g_value = parse_number<double>(f[1], "g_value");
    rec.rel_error = parse_number<double>(f[2], "rel_error");
    if (!f[3].empty()) rec.dist_sq = parse_number<double>(f[3], "dist_sq");
    rec.eta_used = parse_number<double>(f[4], "eta");
    rec.grad_norm_sq = parse_number<double>(f[5], "grad_norm_sq");
    rec.delta_injected = parse_number<double>(f[6], "delta");
    out.push_back(rec);
  }
  return out;
}

inline void write_checks_csv(std::ostream& os, const RunArtifact& art) {
  os << kChecksHeader << '\n';
  for (const auto& run : art.runs) {
    const std::string prefix = run.policy.name() + ":";
    for (const auto& rep : run.reports) {
      os << rep.k << ',' << prefix << to_string(rep.name) << ',' << format_real(rep.lhs) << ','
         << format_real(rep.rhs) << ',' << format_real(rep.slack) << ',' << (rep.holds ? 1 : 0) << ','
         << (rep.applicable ? 1 : 0) << '\n';
    }
  }
}

inline nlohmann::ordered_json summary_json(const RunArtifact& art) {
  using nlohmann::ordered_json;
  const auto& cfg = art.config;
  ordered_json j;
  ordered_json c;
  c["n"] = cfg.n;
  c["r"] = cfg.r;
  c["seed"] = cfg.seed;
  c["init"] = format_init(cfg.init);
  ordered_json pols = ordered_json::array();
  for (auto kind : cfg.policies) pols.push_back(policy_name(kind));
  c["policies"] = pols;
  c["max_iters"] = cfg.max_iters;
  c["rel_tol"] = cfg.rel_tol;
  c["delta_rho"] = cfg.delta_rho;
  c["checks"] = cfg.checks_enabled;
  j["config"] = c;
  j["init_condition"] = {{"holds", art.init.holds}, {"dist", art.init.lhs}, {"radius", art.init.rhs}};
  j["eta_fixed"] = art.eta_fixed;

  ordered_json runs = ordered_json::array();
  std::map<std::string, int> iters;
  for (const auto& run : art.runs) {
    ordered_json r;
    r["policy"] = run.policy.name();
    if (!run.error.empty()) {
      r["error"] = run.error;
    } else {
      r["termination"] = to_string(run.trajectory->terminated_reason);
      r["iterations"] = run.trajectory->records.back().k;
      r["final_rel_error"] = run.trajectory->records.back().rel_error;
      if (auto it = run.iterations_to(cfg.rel_tol)) {
        r["iterations_to_tolerance"] = *it;
        iters[run.policy.name()] = *it;
      } else {
        r["iterations_to_tolerance"] = nullptr;
      }
    }
    if (cfg.checks_enabled) {
      int applicable = 0;
      for (const auto& rep : run.reports) applicable += rep.applicable ? 1 : 0;
      r["checks_applicable"] = applicable;
      r["checks_failed"] = run.failed_checks();
    }
    runs.push_back(r);
  }
  j["runs"] = runs;

  if (auto fgd = iters.find("fgd"); fgd != iters.end()) {
    ordered_json ratios;
    for (const auto& [name, count] : iters) {
      if (name != "fgd" && count > 0) ratios[name] = static_cast<double>(fgd->second) / count;
    }
    if (!ratios.empty()) j["fgd_over_policy_iterations"] = ratios;
  }
  return j;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

/// Writes the per-policy CSVs, checks.csv and summary.json into `dir`.
inline void export_csv(const RunArtifact& art, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::Io, "cannot create " + dir.string() + ": " + ec.message());
  for (const auto& run : art.runs) {
    if (!run.trajectory) continue;
    std::ostringstream os;
    write_trajectory_csv(os, *run.trajectory);
    write_file(dir / (run.policy.name() + ".csv"), os.str());
  }
  std::ostringstream checks;
  write_checks_csv(checks, art);
  write_file(dir / "checks.csv", checks.str());
  write_file(dir / "summary.json", summary_json(art).dump(2) + "\n");
}

/// Whitespace-separated columns "iter <rel_error per policy>" for plotting;
/// a policy that has already stopped repeats its last value.
inline std::string rel_error_plot_data(const RunArtifact& art) {
  std::ostringstream os;
  os << "# iter";
  std::size_t longest = 0;
  for (const auto& run : art.runs) {
    os << ' ' << run.policy.name();
    if (run.trajectory) longest = std::max(longest, run.trajectory->records.size());
  }
  os << '\n';
  for (std::size_t k = 0; k < longest; ++k) {
    os << k;
    for (const auto& run : art.runs) {
      if (!run.trajectory) {
        os << " nan";
        continue;
      }
      const auto& recs = run.trajectory->records;
      os << ' ' << format_real(recs[std::min(k, recs.size() - 1)].rel_error);
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace afgd::harness
