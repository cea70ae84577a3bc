#pragma once

// Experiment configuration and its flat text format.
//
// Grammar, one entry per line:
//
//   line    := blank | comment | entry
//   comment := '#' anything
//   entry   := key '=' value        (whitespace around key and value ignored)
//
// A '#' after a value starts a trailing comment. Keys:
//
//   n, r          dimensions, n >= r >= 1
//   seed          unsigned 64-bit integer
//   init          near:SAFETY | far:SCALE
//   policy        fgd | adaptive-exact | adaptive-practical; may repeat, and a
//                 single value may list several policies separated by commas
//   max_iters     positive integer
//   rel_tol       positive real
//   delta_rho     real in [0, 0.5]; estimation noise for the adaptive policies
//   checks        true | false
//   out           output directory

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "afgd/error.hpp"
#include "afgd/random.hpp"
#include "afgd/stepsize.hpp"

namespace afgd::harness {

struct NearInit {
  double safety = 0.5;
};
struct FarInit {
  double scale = 1.0;
};
using InitSpec = std::variant<NearInit, FarInit>;

struct ExperimentConfig {
  int n = 50;
  int r = 3;
  std::uint64_t seed = 1;
  InitSpec init = NearInit{};
  std::vector<StepKind> policies;
  int max_iters = 2000;
  double rel_tol = 1e-10;
  double delta_rho = 0.0;
  bool checks_enabled = false;
  std::filesystem::path output_dir = "out";

  void validate() const {
    if (r < 1 || n < r) throw Error(Errc::InvalidArgument, "need n >= r >= 1");
    if (max_iters < 1) throw Error(Errc::InvalidArgument, "max_iters must be at least 1");
    if (!(rel_tol > 0.0)) throw Error(Errc::InvalidArgument, "rel_tol must be positive");
    if (!(delta_rho >= 0.0 && delta_rho <= 0.5)) throw Error(Errc::InvalidArgument, "delta_rho must lie in [0, 0.5]");
    if (const auto* near = std::get_if<NearInit>(&init); near && !(near->safety > 0.0 && near->safety <= 1.0)) {
      throw Error(Errc::InvalidArgument, "near safety must lie in (0, 1]");
    }
    if (const auto* far = std::get_if<FarInit>(&init); far && !(far->scale > 0.0)) {
      throw Error(Errc::InvalidArgument, "far scale must be positive");
    }
  }

  /// Resolved step policies. Estimation noise, when requested, is attached to
  /// the adaptive kinds with a per-policy stream derived from the seed.
  std::vector<StepPolicy> step_policies() const {
    std::vector<StepPolicy> out;
    for (std::size_t i = 0; i < policies.size(); ++i) {
      StepPolicy p;
      switch (policies[i]) {
        case StepKind::FixedFgd: p = StepPolicy::fgd(); break;
        case StepKind::AdaptiveExact: p = StepPolicy::adaptive_exact(); break;
        case StepKind::AdaptivePractical: p = StepPolicy::adaptive_practical(); break;
      }
      if (delta_rho > 0.0 && p.kind != StepKind::FixedFgd) {
        p.dist_source = EstimatedDist{delta_rho, derive_seed(seed, 2 + i)};
      }
      out.push_back(p);
    }
    return out;
  }
};

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view text, std::string_view key) {
  text = trim(text);
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error(Errc::InvalidArgument, "bad value '" + std::string(text) + "' for " + std::string(key));
  }
  return value;
}

inline StepKind parse_policy(std::string_view name) {
  name = trim(name);
  if (name == "fgd") return StepKind::FixedFgd;
  if (name == "adaptive-exact") return StepKind::AdaptiveExact;
  if (name == "adaptive-practical") return StepKind::AdaptivePractical;
  throw Error(Errc::InvalidArgument, "unknown policy '" + std::string(name) + "'");
}

inline const char* policy_name(StepKind kind) {
  switch (kind) {
    case StepKind::FixedFgd: return "fgd";
    case StepKind::AdaptiveExact: return "adaptive-exact";
    case StepKind::AdaptivePractical: return "adaptive-practical";
  }
  return "unknown";
}

inline InitSpec parse_init(std::string_view text) {
  text = trim(text);
  const auto colon = text.find(':');
  const std::string_view kind = text.substr(0, colon);
  if (kind == "near") {
    return NearInit{colon == std::string_view::npos ? 0.5 : parse_number<double>(text.substr(colon + 1), "init")};
  }
  if (kind == "far") {
    return FarInit{colon == std::string_view::npos ? 1.0 : parse_number<double>(text.substr(colon + 1), "init")};
  }
  throw Error(Errc::InvalidArgument, "init must be near:SAFETY or far:SCALE, got '" + std::string(text) + "'");
}

inline std::string format_init(const InitSpec& init) {
  std::ostringstream os;
  if (const auto* near = std::get_if<NearInit>(&init)) {
    os << "near:" << near->safety;
  } else {
    os << "far:" << std::get<FarInit>(init).scale;
  }
  return os.str();
}

inline bool parse_bool(std::string_view text, std::string_view key) {
  text = trim(text);
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw Error(Errc::InvalidArgument, "bad boolean '" + std::string(text) + "' for " + std::string(key));
}

/// Applies one key = value entry to `cfg`.
inline void apply_entry(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  if (key == "n") {
    cfg.n = parse_number<int>(value, key);
  } else if (key == "r") {
    cfg.r = parse_number<int>(value, key);
  } else if (key == "seed") {
    cfg.seed = parse_number<std::uint64_t>(value, key);
  } else if (key == "init") {
    cfg.init = parse_init(value);
  } else if (key == "policy") {
    std::size_t start = 0;
    while (start <= value.size()) {
      const auto comma = value.find(',', start);
      cfg.policies.push_back(parse_policy(value.substr(start, comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
  } else if (key == "max_iters") {
    cfg.max_iters = parse_number<int>(value, key);
  } else if (key == "rel_tol") {
    cfg.rel_tol = parse_number<double>(value, key);
  } else if (key == "delta_rho") {
    cfg.delta_rho = parse_number<double>(value, key);
  } else if (key == "checks") {
    cfg.checks_enabled = parse_bool(value, key);
  } else if (key == "out") {
    cfg.output_dir = std::string(trim(value));
  } else {
    throw Error(Errc::InvalidArgument, "unknown config key '" + std::string(key) + "'");
  }
}

inline ExperimentConfig parse_config_text(std::string_view text, ExperimentConfig cfg = {}) {
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(Errc::InvalidArgument, "line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      apply_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.message());
    }
  }
  return cfg;
}

inline ExperimentConfig load_config_file(const std::filesystem::path& path, ExperimentConfig cfg = {}) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), std::move(cfg));
}

}  // namespace afgd::harness
