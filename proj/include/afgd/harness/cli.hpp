#pragma once

// Command-line front end: run, verify, reproduce-figures.
// Exit codes: 0 success, 1 run or verification failure, 2 bad usage.

#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "afgd/harness/config.hpp"
#include "afgd/harness/experiment.hpp"
#include "afgd/theory.hpp"

namespace afgd::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct SeedRange {
  std::uint64_t first = 1;
  std::uint64_t last = 1;
};

/// "A..B" (inclusive) or a single seed "A".
inline SeedRange parse_seed_range(std::string_view text) {
  text = trim(text);
  const auto dots = text.find("..");
  if (dots == std::string_view::npos) {
    const auto s = parse_number<std::uint64_t>(text, "seed");
    return {s, s};
  }
  SeedRange range{parse_number<std::uint64_t>(text.substr(0, dots), "seed"),
                  parse_number<std::uint64_t>(text.substr(dots + 2), "seed")};
  if (range.last < range.first) throw Error(Errc::InvalidArgument, "empty seed range");
  return range;
}

/// Flag values for `run`; unset flags leave the config file's values alone.
struct RunFlags {
  std::string config_file;
  std::optional<int> n, r, max_iters;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> init, out;
  std::vector<std::string> policies;
  std::optional<double> rel_tol, delta_rho;
  bool checks = false;

  ExperimentConfig resolve() const {
    ExperimentConfig cfg;
    if (!config_file.empty()) cfg = load_config_file(config_file);
    if (n) cfg.n = *n;
    if (r) cfg.r = *r;
    if (seed) cfg.seed = *seed;
    if (init) cfg.init = parse_init(*init);
    if (max_iters) cfg.max_iters = *max_iters;
    if (rel_tol) cfg.rel_tol = *rel_tol;
    if (delta_rho) cfg.delta_rho = *delta_rho;
    if (out) cfg.output_dir = *out;
    if (checks) cfg.checks_enabled = true;
    if (!policies.empty()) {
      cfg.policies.clear();
      for (const auto& p : policies) cfg.policies.push_back(parse_policy(p));
    }
    if (cfg.policies.empty()) cfg.policies = {StepKind::FixedFgd, StepKind::AdaptivePractical};
    cfg.validate();
    return cfg;
  }
};

inline void print_run_summary(std::ostream& out, const RunArtifact& art) {
  out << "n=" << art.config.n << " r=" << art.config.r << " seed=" << art.config.seed
      << " init=" << format_init(art.config.init) << " in_radius=" << (art.init.holds ? "yes" : "no")
      << " eta_fixed=" << format_real(art.eta_fixed) << '\n';
  for (const auto& run : art.runs) {
    out << "  " << std::left << std::setw(24) << run.policy.name();
    if (!run.error.empty()) {
      out << "ERROR " << run.error << '\n';
      continue;
    }
    const auto& traj = *run.trajectory;
    out << to_string(traj.terminated_reason) << " after " << traj.records.back().k
        << " iterations, rel_error " << format_real(traj.records.back().rel_error);
    if (art.config.checks_enabled) out << ", failed checks " << run.failed_checks();
    out << '\n';
  }
}

inline int cmd_run(const RunFlags& flags, std::ostream& out, std::ostream& err) {
  const ExperimentConfig cfg = flags.resolve();
  const RunArtifact art = run_comparison(cfg);
  export_csv(art, cfg.output_dir);
  print_run_summary(out, art);
  out << "wrote " << cfg.output_dir.string() << '\n';
  if (art.any_run_failed()) {
    err << "one or more policies failed\n";
    return kExitFailure;
  }
  if (art.failed_checks() > 0) {
    err << "theory checks failed: " << art.failed_checks() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

struct VerifyFlags {
  std::string seeds = "1..50";
  int n = 50;
  int r = 3;
  double safety = 0.5;
  double delta_rho = 0.5;
  int max_iters = 1000;
  double rel_tol = 1e-8;
  std::string out;
};

/// Seed sweep of the theory checks: per seed, one comparison of fgd,
/// adaptive-exact and adaptive-practical with the true distance, and one
/// adaptive-exact run with injected estimation error.
inline int cmd_verify(const VerifyFlags& flags, std::ostream& out, std::ostream& err) {
  const SeedRange seeds = parse_seed_range(flags.seeds);
  std::vector<InequalityReport> all;
  int eta_contexts = 0, eta_failures = 0, run_failures = 0;
  bool ok = true;
  for (std::uint64_t seed = seeds.first;; ++seed) {
    ExperimentConfig base;
    base.n = flags.n;
    base.r = flags.r;
    base.seed = seed;
    base.init = NearInit{flags.safety};
    base.max_iters = flags.max_iters;
    base.rel_tol = flags.rel_tol;
    base.checks_enabled = true;
    const ProblemInstance inst = generate_instance(base);

    ExperimentConfig exact = base;
    exact.policies = {StepKind::FixedFgd, StepKind::AdaptiveExact, StepKind::AdaptivePractical};
    ExperimentConfig noisy = base;
    noisy.policies = {StepKind::AdaptiveExact};
    noisy.delta_rho = flags.delta_rho;

    int index = 0;
    for (const auto* cfg : {&exact, &noisy}) {
      const RunArtifact art = run_comparison(*cfg, inst);
      for (const auto& run : art.runs) {
        all.insert(all.end(), run.reports.begin(), run.reports.end());
        eta_contexts += run.eta_star_contexts;
        eta_failures += run.eta_star_failures;
        if (!run.error.empty()) {
          ++run_failures;
          err << "seed " << seed << " " << run.policy.name() << ": " << run.error << '\n';
        }
      }
      if (!flags.out.empty()) {
        export_csv(art, std::filesystem::path(flags.out) /
                            ("seed" + std::to_string(seed) + (index == 0 ? "_exact" : "_estimated")));
      }
      ++index;
    }
    if (seed == seeds.last) break;
  }

  out << std::left << std::setw(20) << "check" << std::right << std::setw(12) << "applicable" << std::setw(10)
      << "failed" << std::setw(12) << "n/a" << "  " << "worst rel slack" << '\n';
  for (Check c : {Check::Lemma1, Check::Lemma2, Check::Eq4Bound, Check::Theorem1Fgd, Check::Theorem1Adaptive,
                  Check::Eq7, Check::Eq9}) {
    const CheckTally t = tally(all, c);
    out << std::left << std::setw(20) << to_string(c) << std::right << std::setw(12) << t.applicable
        << std::setw(10) << t.failed << std::setw(12) << t.not_applicable << "  "
        << format_real(t.worst_relative_slack) << '\n';
    if (t.failed > 0) ok = false;
  }
  out << std::left << std::setw(20) << "EtaStarOptimal" << std::right << std::setw(12) << eta_contexts
      << std::setw(10) << eta_failures << '\n';
  if (eta_failures > 0 || run_failures > 0) ok = false;
  out << (ok ? "verify: PASS" : "verify: FAIL") << '\n';
  return ok ? kExitOk : kExitFailure;
}

struct FigureFlags {
  std::uint64_t seed = 1;
  int n = 1000;
  int max_iters = 2000;
  double rel_tol = 1e-10;
  std::string out = "figures";
};

struct FigureSetup {
  std::string name;
  int r;
  InitSpec init;
};

inline std::vector<FigureSetup> figure_setups() {
  return {{"figure1_near", 2, NearInit{0.5}},
          {"figure1_far", 2, FarInit{1.0}},
          {"figure2_near", 5, NearInit{0.5}},
          {"figure2_far", 5, FarInit{1.0}}};
}

inline std::string gnuplot_script(const std::vector<FigureSetup>& setups) {
  std::ostringstream os;
  os << "# gnuplot figures.gp\n"
     << "set terminal pngcairo size 900,600\n"
     << "set logscale y\n"
     << "set format y '10^{%L}'\n"
     << "set xlabel 'iteration'\n"
     << "set ylabel 'g(U_k) / g(U_0)'\n";
  for (const auto& s : setups) {
    os << "set output '" << s.name << ".png'\n"
       << "set title '" << s.name << "'\n"
       << "plot '" << s.name << "/rel_error.dat' using 1:2 with lines title 'fgd', \\\n"
       << "     '' using 1:3 with lines title 'adaptive-practical'\n";
  }
  return os.str();
}

inline int cmd_reproduce(const FigureFlags& flags, std::ostream& out, std::ostream& err) {
  const std::filesystem::path root = flags.out;
  const auto setups = figure_setups();
  bool ok = true;
  for (const auto& s : setups) {
    ExperimentConfig cfg;
    cfg.n = flags.n;
    cfg.r = s.r;
    cfg.seed = flags.seed;
    cfg.init = s.init;
    cfg.policies = {StepKind::FixedFgd, StepKind::AdaptivePractical};
    cfg.max_iters = flags.max_iters;
    cfg.rel_tol = flags.rel_tol;
    cfg.output_dir = root / s.name;
    cfg.validate();
    const RunArtifact art = run_comparison(cfg);
    export_csv(art, cfg.output_dir);
    write_file(cfg.output_dir / "rel_error.dat", rel_error_plot_data(art));
    out << s.name << ": ";
    print_run_summary(out, art);
    if (art.any_run_failed()) ok = false;
  }
  write_file(root / "figures.gp", gnuplot_script(setups));
  out << "wrote " << root.string() << '\n';
  if (!ok) err << "one or more runs failed\n";
  return ok ? kExitOk : kExitFailure;
}

inline int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Factored gradient descent with adaptive step sizes for low-rank PSD problems", "afgd"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "run one comparison and write CSV artifacts");
  run_cmd->add_option("--config", run_flags.config_file, "key = value config file")->check(CLI::ExistingFile);
  run_cmd->add_option("--n", run_flags.n, "rows of U");
  run_cmd->add_option("--r", run_flags.r, "columns of U");
  run_cmd->add_option("--seed", run_flags.seed, "instance seed");
  run_cmd->add_option("--init", run_flags.init, "near:SAFETY or far:SCALE");
  run_cmd->add_option("--policy", run_flags.policies, "fgd | adaptive-exact | adaptive-practical (repeatable)");
  run_cmd->add_option("--max-iters", run_flags.max_iters, "iteration budget");
  run_cmd->add_option("--rel-tol", run_flags.rel_tol, "stop when g(U_k)/g(U_0) <= tol");
  run_cmd->add_option("--delta-rho", run_flags.delta_rho, "distance estimation noise in [0, 0.5]");
  run_cmd->add_option("--out", run_flags.out, "output directory");
  run_cmd->add_flag("--checks", run_flags.checks, "record theory checks");

  VerifyFlags verify_flags;
  auto* verify_cmd = app.add_subcommand("verify", "seed sweep of the convergence-theory checks");
  verify_cmd->add_option("--seed", verify_flags.seeds, "seed or inclusive range A..B")->capture_default_str();
  verify_cmd->add_option("--n", verify_flags.n)->capture_default_str();
  verify_cmd->add_option("--r", verify_flags.r)->capture_default_str();
  verify_cmd->add_option("--safety", verify_flags.safety, "near-start radius fraction")->capture_default_str();
  verify_cmd->add_option("--delta-rho", verify_flags.delta_rho)->capture_default_str();
  verify_cmd->add_option("--max-iters", verify_flags.max_iters)->capture_default_str();
  verify_cmd->add_option("--rel-tol", verify_flags.rel_tol)->capture_default_str();
  verify_cmd->add_option("--out", verify_flags.out, "also write per-seed artifacts here");

  FigureFlags fig_flags;
  auto* fig_cmd = app.add_subcommand("reproduce-figures", "n x 2 and n x 5 runs from near and far starts");
  fig_cmd->add_option("--seed", fig_flags.seed)->capture_default_str();
  fig_cmd->add_option("--n", fig_flags.n)->capture_default_str();
  fig_cmd->add_option("--max-iters", fig_flags.max_iters)->capture_default_str();
  fig_cmd->add_option("--rel-tol", fig_flags.rel_tol)->capture_default_str();
  fig_cmd->add_option("--out", fig_flags.out)->capture_default_str();

  if (argc <= 1) {
    out << app.help();
    return kExitUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run_flags, out, err);
    if (*verify_cmd) return cmd_verify(verify_flags, out, err);
    if (*fig_cmd) return cmd_reproduce(fig_flags, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == Errc::InvalidArgument ? kExitUsage : kExitFailure;
  }
  return kExitUsage;
}

}  // namespace afgd::harness
