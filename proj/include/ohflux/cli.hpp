#pragma once

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ohflux/diagnostics.hpp"
#include "ohflux/evolve.hpp"
#include "ohflux/experiments.hpp"

namespace ohflux {

enum class Command { Run, Convergence, Check };

inline std::optional<Command> command_from_string(std::string const& s) {
  if (s == "run") return Command::Run;
  if (s == "convergence") return Command::Convergence;
  if (s == "check") return Command::Check;
  return std::nullopt;
}

/// Exit codes shared by every command.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitInvariant = 2 };

struct RunConfig {
  Command command = Command::Run;
  ExperimentConfig experiment;
  std::size_t n = 128;          // resolution for run/check
  std::size_t check_every = 0;  // 0: only the per-step sup-norm and mean checks
  std::uint64_t seed = 20170601;
  int verbosity = 1;
  bool reference = false;       // run: also emit figure data with the reference
  std::string fault = "none";   // "flip_source" negates P (diagnostics self-test)
  DiagnosticTolerances tolerances;
};

/// Flat `key = value` text with `#` comments; values may be double-quoted.
using KeyValues = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(std::string const& s) {
  auto const b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto const e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string unquote(std::string const& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

inline std::size_t parse_size(std::string const& key, std::string const& v) {
  std::size_t out = 0;
  auto const res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError("key '" + key + "' expects a nonnegative integer, got '" + v + "'");
  return out;
}

inline double parse_real(std::string const& key, std::string const& v) {
  double out = 0.0;
  auto const res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError("key '" + key + "' expects a real number, got '" + v + "'");
  return out;
}

inline bool parse_bool(std::string const& key, std::string const& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "' expects true/false, got '" + v + "'");
}

inline std::vector<std::string> split_list(std::string const& v) {
  std::vector<std::string> parts;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

inline std::set<std::string> const& known_keys() {
  static std::set<std::string> const keys = {
      "profile", "N", "N_list", "N_ref", "T", "flux", "model", "lf_alpha", "cfl_safety",
      "cfl", "snapshot_times", "out", "check_every", "seed", "verbosity", "reference",
      "fault", "tol_entropy", "tol_linf", "tol_bv", "tol_time_continuity",
      "tol_l1_stability"};
  return keys;
}

}  // namespace detail

inline KeyValues parse_key_values(std::string const& text, std::string const& origin = "config") {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = detail::trim(line);
    if (line.empty()) continue;
    auto const eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    std::string const key = detail::trim(line.substr(0, eq));
    std::string const value = detail::unquote(detail::trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (kv.contains(key))
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv[key] = value;
  }
  return kv;
}

/// Resolve a config from file key-values, overridden by `overrides`.
/// Unknown keys are rejected; `profile` is required.
inline RunConfig build_config(Command command, KeyValues values, KeyValues const& overrides) {
  for (auto const& [k, v] : overrides) values[k] = v;

  std::vector<std::string> unknown;
  for (auto const& [k, v] : values)
    if (!detail::known_keys().contains(k)) unknown.push_back(k);
  if (!unknown.empty()) {
    std::string msg = "unknown config key(s):";
    for (auto const& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }
  if (!values.contains("profile")) throw ConfigError("missing required key 'profile'");

  RunConfig cfg;
  cfg.command = command;
  auto& ex = cfg.experiment;
  if (command == Command::Check) {
    cfg.n = 64;
    ex.t_end = 1.0;
    cfg.check_every = 1;
  }
  auto const get = [&](char const* key) -> std::optional<std::string> {
    auto const it = values.find(key);
    if (it == values.end()) return std::nullopt;
    return it->second;
  };

  ex.profile = *get("profile");
  profile_by_name(ex.profile);
  if (auto v = get("N")) cfg.n = detail::parse_size("N", *v);
  if (auto v = get("N_list")) {
    ex.n_list.clear();
    for (auto const& item : detail::split_list(*v)) ex.n_list.push_back(detail::parse_size("N_list", item));
  }
  if (auto v = get("N_ref")) ex.n_ref = detail::parse_size("N_ref", *v);
  if (auto v = get("T")) ex.t_end = detail::parse_real("T", *v);
  if (auto v = get("flux")) ex.flux = *v;
  if (ex.flux != "eo" && ex.flux != "lf") throw ConfigError("unknown numerical flux '" + ex.flux + "'");
  if (auto v = get("model")) ex.model = *v;
  model_by_name(ex.model);
  if (auto v = get("lf_alpha")) ex.lf_alpha = detail::parse_real("lf_alpha", *v);
  if (auto v = get("cfl")) ex.cfl_safety = detail::parse_real("cfl", *v);
  if (auto v = get("cfl_safety")) ex.cfl_safety = detail::parse_real("cfl_safety", *v);
  if (auto v = get("snapshot_times")) {
    for (auto const& item : detail::split_list(*v))
      ex.snapshot_times.push_back(detail::parse_real("snapshot_times", item));
  }
  if (auto v = get("out")) {
    ex.out_dir = *v;
  } else if (char const* env = std::getenv("OHFLUX_OUT"); env && *env) {
    ex.out_dir = env;
  }
  if (auto v = get("check_every")) cfg.check_every = detail::parse_size("check_every", *v);
  if (auto v = get("seed")) cfg.seed = detail::parse_size("seed", *v);
  if (auto v = get("verbosity")) cfg.verbosity = static_cast<int>(detail::parse_size("verbosity", *v));
  if (auto v = get("reference")) cfg.reference = detail::parse_bool("reference", *v);
  if (auto v = get("fault")) cfg.fault = *v;
  if (cfg.fault != "none" && cfg.fault != "flip_source")
    throw ConfigError("unknown fault '" + cfg.fault + "' (expected none or flip_source)");
  if (auto v = get("tol_entropy")) cfg.tolerances.entropy = detail::parse_real("tol_entropy", *v);
  if (auto v = get("tol_linf")) cfg.tolerances.linf = detail::parse_real("tol_linf", *v);
  if (auto v = get("tol_bv")) cfg.tolerances.bv = detail::parse_real("tol_bv", *v);
  if (auto v = get("tol_time_continuity"))
    cfg.tolerances.time_continuity = detail::parse_real("tol_time_continuity", *v);
  if (auto v = get("tol_l1_stability"))
    cfg.tolerances.l1_stability = detail::parse_real("tol_l1_stability", *v);

  if (cfg.n < 2) throw ConfigError("N must be at least 2");
  if (!(ex.cfl_safety > 0.0 && ex.cfl_safety <= 1.0))
    throw ConfigError("cfl_safety must lie in (0,1]");
  if (ex.t_end < 0.0) throw ConfigError("T must be nonnegative");
  if (ex.lf_alpha && !(*ex.lf_alpha > 0.0)) throw ConfigError("lf_alpha must be positive");
  return cfg;
}

/// Read `path` (optional) and apply CLI overrides.
inline RunConfig parse_config(Command command, std::optional<std::filesystem::path> const& path,
                              KeyValues const& overrides) {
  KeyValues values;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot read config file '" + path->string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    values = parse_key_values(buf.str(), path->string());
  }
  return build_config(command, std::move(values), overrides);
}

namespace detail {

inline StepControl step_control(RunConfig const& cfg) {
  StepControl ctrl;
  ctrl.cfl_safety = cfg.experiment.cfl_safety;
  ctrl.t_end = cfg.experiment.t_end;
  if (cfg.fault == "flip_source") ctrl.source_sign = -1.0;
  return ctrl;
}

inline void print_report(DiagnosticsReport const& report, std::ostream& os) {
  for (auto const& c : report.checks) {
    os << (c.pass() ? "PASS " : "FAIL ") << c.name << "  worst residual "
       << (c.evaluations ? format_real(c.worst_residual) : std::string("n/a")) << " (tol "
       << format_real(c.tolerance) << ", " << c.evaluations << " evaluations)";
    if (c.n) os << " at n=" << *c.n;
    if (c.j) os << " j=" << *c.j;
    if (c.k) os << " k=" << format_real(*c.k);
    os << '\n';
  }
}

inline void prepare_out_dir(std::filesystem::path const& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw InputError("cannot create output directory '" + dir.string() + "'");
  auto const probe = dir / ".ohflux_write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw InputError("output directory '" + dir.string() + "' is not writable");
  }
  std::filesystem::remove(probe, ec);
}

template <class Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (InvariantViolation const& e) {
    err << "invariant violation: " << e.what() << '\n';
    return kExitInvariant;
  } catch (BlowUpError const& e) {
    err << "blow-up: " << e.what() << '\n';
    return kExitInvariant;
  } catch (std::exception const& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace detail

/// Single simulation: snapshot CSVs for t = 0, requested times and T, plus
/// a diagnostics report.
inline int cmd_run(RunConfig const& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    auto const& ex = cfg.experiment;
    detail::prepare_out_dir(ex.out_dir);
    InitialProfile const profile = profile_by_name(ex.profile);
    require_zero_mean(profile);
    FluxModel const model = model_by_name(ex.model);
    NumericalFlux const nf = make_flux(ex, model, profile);
    State s0 = cell_average_init(profile, Grid(cfg.n));

    StepDiagnosticsOptions opt;
    opt.stride = cfg.check_every;
    opt.tolerances = cfg.tolerances;
    StepDiagnostics diag(nf, model, opt);
    Trajectory const tr =
        evolve_to(std::move(s0), detail::step_control(cfg), nf, ex.snapshot_times, {diag.observer()});

    std::string const stem = ex.profile + "_N" + std::to_string(cfg.n);
    for (auto const& s : tr.snapshots) write_snapshot_csv(s, ex.out_dir / (stem + "_t" + format_real(s.t) + ".csv"));
    DiagnosticsReport const report = diag.report();
    write_report_csv(report, ex.out_dir / (stem + "_diagnostics.csv"));
    if (cfg.reference) snapshot_run(ex, {cfg.n});

    if (cfg.verbosity > 0) {
      out << "run " << ex.profile << " N=" << cfg.n << " T=" << format_real(ex.t_end) << ": "
          << tr.steps << " steps, dt in [" << format_real(tr.dt_min) << ", " << format_real(tr.dt_max)
          << "]\n";
      detail::print_report(report, out);
    }
    return report.passed() ? kExitOk : kExitInvariant;
  });
}

/// Convergence study; writes convergence_<profile>.csv, figure data for N = 128
/// and 256 when those are in the list, and prints the table.
inline int cmd_convergence(RunConfig const& cfg, std::ostream& out = std::cout,
                           std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    auto const& ex = cfg.experiment;
    detail::prepare_out_dir(ex.out_dir);
    ConvergenceStudy const study = run_convergence_study(ex);
    write_convergence_csv(study.table, ex.out_dir / ("convergence_" + ex.profile + ".csv"));
    write_study_figures(ex, study, {128, 256});
    if (cfg.verbosity > 0) print_convergence_table(study.table, out);
    return kExitOk;
  });
}

/// Short run with every diagnostic enabled at full per-step granularity, plus
/// a lockstep L1-stability run against a seeded zero-mean perturbation.
inline int cmd_check(RunConfig const& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    auto const& ex = cfg.experiment;
    detail::prepare_out_dir(ex.out_dir);
    InitialProfile const profile = profile_by_name(ex.profile);
    require_zero_mean(profile);
    FluxModel const model = model_by_name(ex.model);
    NumericalFlux const nf = make_flux(ex, model, profile);
    State const s0 = cell_average_init(profile, Grid(cfg.n));
    StepControl const ctrl = detail::step_control(cfg);

    StepDiagnosticsOptions opt;
    opt.stride = cfg.check_every == 0 ? 1 : cfg.check_every;
    opt.tolerances = cfg.tolerances;
    StepDiagnostics diag(nf, model, opt);
    evolve_to(s0, ctrl, nf, {}, {diag.observer()});
    DiagnosticsReport report = diag.report();

    // Zero-mean random perturbation of relative size 1e-3.
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    State v0 = s0;
    double const amplitude = 1e-3 * std::max(linf_norm(s0), 1e-3);
    std::vector<double> delta(cfg.n);
    double mean = 0.0;
    for (auto& d : delta) {
      d = dist(rng);
      mean += d;
    }
    mean /= static_cast<double>(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i) v0.u[i] += amplitude * (delta[i] - mean);
    auto const [ta, tb] = evolve_lockstep(s0, v0, ctrl, nf);
    report.checks.push_back(check_l1_stability(ta, tb, cfg.tolerances.l1_stability));

    write_report_csv(report, ex.out_dir / (ex.profile + "_N" + std::to_string(cfg.n) + "_check.csv"));
    if (cfg.verbosity > 0) {
      out << "check " << ex.profile << " N=" << cfg.n << " T=" << format_real(ex.t_end) << '\n';
      detail::print_report(report, out);
    }
    return report.passed() ? kExitOk : kExitInvariant;
  });
}

inline int dispatch(RunConfig const& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  switch (cfg.command) {
    case Command::Run: return cmd_run(cfg, out, err);
    case Command::Convergence: return cmd_convergence(cfg, out, err);
    case Command::Check: return cmd_check(cfg, out, err);
  }
  return kExitUsage;
}

}  // namespace ohflux
