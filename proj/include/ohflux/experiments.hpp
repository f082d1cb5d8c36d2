#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ohflux/diagnostics.hpp"
#include "ohflux/evolve.hpp"
#include "ohflux/flux_model.hpp"
#include "ohflux/mesh_state.hpp"

namespace ohflux {

// ---------------------------------------------------------------------------
// Initial data

/// Piecewise quadratic "corner wave":
///   (x-1/2)^2/6 + (x-1/2)/6 + 1/36 on [0,1/2),
///   (x-1/2)^2/6 - (x-1/2)/6 + 1/36 on [1/2,1].
inline InitialProfile corner_wave() {
  InitialProfile p;
  p.name = "corner";
  p.eval = [](double x) {
    double const y = x - 0.5;
    double const slope = x < 0.5 ? 1.0 / 6.0 : -1.0 / 6.0;
    return y * y / 6.0 + slope * y + 1.0 / 36.0;
  };
  // Antiderivative vanishing at x = 1/2; it also vanishes at 0 and 1.
  auto const primitive = [](double x) {
    double const y = x - 0.5;
    double const half = x < 0.5 ? 1.0 / 12.0 : -1.0 / 12.0;
    return y * y * y / 18.0 + half * y * y + y / 36.0;
  };
  p.exact_cell_average = [primitive](double a, double b) {
    return (primitive(b) - primitive(a)) / (b - a);
  };
  return p;
}

/// u0(x) = -0.05 cos(2 pi x).
inline InitialProfile cosine_profile() {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  InitialProfile p;
  p.name = "cosine";
  p.eval = [](double x) { return -0.05 * std::cos(two_pi * x); };
  p.exact_cell_average = [](double a, double b) {
    return -0.05 * (std::sin(two_pi * b) - std::sin(two_pi * a)) / (two_pi * (b - a));
  };
  return p;
}

inline InitialProfile zero_profile() {
  InitialProfile p;
  p.name = "zero";
  p.eval = [](double) { return 0.0; };
  p.exact_cell_average = [](double, double) { return 0.0; };
  return p;
}

inline std::vector<std::string> profile_names() { return {"corner", "cosine", "zero"}; }

inline InitialProfile profile_by_name(std::string const& name) {
  if (name == "corner" || name == "corner_wave") return corner_wave();
  if (name == "cosine") return cosine_profile();
  if (name == "zero") return zero_profile();
  throw ConfigError("unknown initial profile '" + name + "'");
}

/// int_0^1 u0, from the exact average when available, else composite
/// 5-point Gauss on 1024 cells.
inline double profile_mean(InitialProfile const& p) {
  if (p.exact_cell_average) return p.exact_cell_average(0.0, 1.0);
  double sum = 0.0;
  constexpr std::size_t cells = 1024;
  for (std::size_t i = 0; i < cells; ++i) {
    double const a = static_cast<double>(i) / cells;
    double const b = static_cast<double>(i + 1) / cells;
    sum += detail::gauss5_average(p.eval, a, b) / cells;
  }
  return sum;
}

inline void require_zero_mean(InitialProfile const& p, double tolerance = 1e-12) {
  double const m = profile_mean(p);
  if (!(std::abs(m) <= tolerance))
    throw InputError("profile '" + p.name + "' has mean " + format_real(m) + ", expected 0");
}

// ---------------------------------------------------------------------------
// Errors and rates

/// E = 100 |u - u_ref|_1 / |u_ref|_1 with the reference block-averaged onto
/// the candidate grid.
inline double relative_l1_error(State const& candidate, State const& reference) {
  if (std::abs(candidate.t - reference.t) > 1e-12)
    throw InputError("relative error needs states at the same time, got " +
                     format_real(candidate.t) + " and " + format_real(reference.t));
  State const ref = restrict(reference, candidate.grid);
  double const norm = l1_norm(ref);
  if (!(norm > 0.0)) throw InputError("reference solution has zero L1 norm");
  double diff = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) diff += std::abs(candidate.u[i] - ref.u[i]);
  return 100.0 * candidate.dx() * diff / norm;
}

/// max_j |u_j - u_{j-1}| with periodic wrap.
inline double max_jump(State const& s) {
  double m = std::abs(s.u.front() - s.u.back());
  for (std::size_t i = 1; i < s.size(); ++i) m = std::max(m, std::abs(s.u[i] - s.u[i - 1]));
  return m;
}

struct ConvergenceRow {
  std::size_t n = 0;
  double error_percent = 0.0;
  std::optional<double> rate;  // against the previous (coarser) row
};

struct ConvergenceTable {
  std::string profile;
  std::size_t n_ref = 0;
  double t = 0.0;
  std::vector<ConvergenceRow> rows;
};

/// Fill in rates; the rate on row i compares rows i-1 and i.
inline void assign_rates(ConvergenceTable& table) {
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    auto& row = table.rows[i];
    row.rate.reset();
    if (i == 0) continue;
    auto const& prev = table.rows[i - 1];
    row.rate = std::log(prev.error_percent / row.error_percent) /
               std::log(static_cast<double>(row.n) / static_cast<double>(prev.n));
  }
}

/// CSV with header `N,E_percent,rate`; rate blank on the first row.
inline void write_convergence_csv(ConvergenceTable const& table, std::filesystem::path const& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  out << "N,E_percent,rate\n";
  for (auto const& row : table.rows)
    out << row.n << ',' << format_real(row.error_percent) << ','
        << (row.rate ? format_real(*row.rate) : std::string()) << '\n';
  if (!out) throw InputError("write failed for '" + path.string() + "'");
}

/// Human-readable table, one decimal as is customary for percent errors.
inline void print_convergence_table(ConvergenceTable const& table, std::ostream& os) {
  os << "relative L1 errors, profile " << table.profile << ", t = " << format_real(table.t)
     << ", reference N = " << table.n_ref << '\n';
  char line[128];
  std::snprintf(line, sizeof line, "%6s | %8s | %5s\n", "N", "E", "rate");
  os << line << "-------+----------+------\n";
  for (auto const& row : table.rows) {
    if (row.rate)
      std::snprintf(line, sizeof line, "%6zu | %8.1f | %5.1f\n", row.n, row.error_percent, *row.rate);
    else
      std::snprintf(line, sizeof line, "%6zu | %8.1f | %5s\n", row.n, row.error_percent, "");
    os << line;
  }
}

// ---------------------------------------------------------------------------
// Studies

struct ExperimentConfig {
  std::string profile = "corner";
  std::vector<std::size_t> n_list = {32, 64, 128, 256, 512, 1024, 2048};
  std::size_t n_ref = 8192;
  double t_end = 36.0;
  std::string flux = "eo";
  std::string model = "oh_builtin";
  std::optional<double> lf_alpha;
  double cfl_safety = 0.9;
  std::vector<double> snapshot_times;
  std::filesystem::path out_dir = ".";
  /// Run resolutions on separate threads.
  bool parallel = true;

  void validate() const {
    if (!(t_end > 0.0) || !std::isfinite(t_end))
      throw ConfigError("T must be positive, got " + format_real(t_end));
    if (n_list.empty()) throw ConfigError("N list is empty");
    for (std::size_t i = 0; i < n_list.size(); ++i) {
      if (n_list[i] < 2) throw ConfigError("N must be at least 2");
      if (i > 0 && n_list[i] <= n_list[i - 1]) throw ConfigError("N list must be strictly increasing");
      if (n_ref % n_list[i] != 0)
        throw ConfigError("N_ref = " + std::to_string(n_ref) + " is not divisible by N = " +
                          std::to_string(n_list[i]));
    }
  }
};

/// sup |u0| sampled on 8193 points.
inline double profile_sup(InitialProfile const& p) {
  double m = 0.0;
  for (std::size_t i = 0; i <= 8192; ++i) m = std::max(m, std::abs(p.eval(static_cast<double>(i) / 8192.0)));
  return m;
}

/// Flux for a config. LF without an explicit alpha takes the Lipschitz bound
/// on a box twice the profile's sup-norm, so every resolution shares it.
inline NumericalFlux make_flux(ExperimentConfig const& cfg, FluxModel const& model,
                               InitialProfile const& profile) {
  return flux_by_name(cfg.flux, model, cfg.lf_alpha, 2.0 * profile_sup(profile));
}

/// Extra per-run observers, created per resolution.
using ObserverFactory = std::function<std::vector<Observer>(std::size_t n)>;

/// Evolve `profile` on an N-cell grid to cfg.t_end.
inline Trajectory run_profile(ExperimentConfig const& cfg, std::size_t n,
                              ObserverFactory const& make_observers = {},
                              std::vector<double> const& snapshot_times = {}) {
  InitialProfile const profile = profile_by_name(cfg.profile);
  require_zero_mean(profile);
  FluxModel const model = model_by_name(cfg.model);
  State s0 = cell_average_init(profile, Grid(n));
  NumericalFlux const nf = make_flux(cfg, model, profile);
  StepControl ctrl;
  ctrl.cfl_safety = cfg.cfl_safety;
  ctrl.t_end = cfg.t_end;
  std::vector<Observer> observers;
  if (make_observers) observers = make_observers(n);
  try {
    return evolve_to(std::move(s0), ctrl, nf, snapshot_times, observers);
  } catch (BlowUpError const& e) {
    throw BlowUpError("run with N = " + std::to_string(n) + " failed: " + e.what(), e.step());
  } catch (InvariantViolation const& e) {
    throw InvariantViolation("run with N = " + std::to_string(n) + " failed: " + e.what());
  }
}

struct ConvergenceStudy {
  ConvergenceTable table;
  State reference;
  std::vector<State> finals;  // one per row
};

/// One reference run plus one run per N; relative errors at T and rates.
inline ConvergenceStudy run_convergence_study(ExperimentConfig const& cfg,
                                              ObserverFactory const& make_observers = {}) {
  cfg.validate();
  auto const launch = cfg.parallel ? std::launch::async : std::launch::deferred;
  auto const final_state = [&cfg, &make_observers](std::size_t n) {
    return run_profile(cfg, n, make_observers).final();
  };

  auto ref_future = std::async(launch, final_state, cfg.n_ref);
  std::vector<std::future<State>> futures;
  futures.reserve(cfg.n_list.size());
  for (std::size_t n : cfg.n_list) futures.push_back(std::async(launch, final_state, n));

  ConvergenceStudy study{.table = {}, .reference = ref_future.get(), .finals = {}};
  study.table.profile = cfg.profile;
  study.table.n_ref = cfg.n_ref;
  study.table.t = cfg.t_end;
  for (std::size_t i = 0; i < futures.size(); ++i) {
    study.finals.push_back(futures[i].get());
    study.table.rows.push_back({cfg.n_list[i], relative_l1_error(study.finals.back(), study.reference), {}});
  }
  assign_rates(study.table);
  return study;
}

struct SnapshotFiles {
  std::vector<std::filesystem::path> paths;
};

/// Figure data: for every coarse N, the initial cell averages and the
/// solution at T, plus the reference solution at T.
inline SnapshotFiles snapshot_run(ExperimentConfig const& cfg, std::vector<std::size_t> const& coarse,
                                  bool with_reference = true) {
  std::filesystem::create_directories(cfg.out_dir);
  SnapshotFiles files;
  std::string const stem = "fig_" + cfg.profile;
  std::string const tag = "_T" + format_real(cfg.t_end);
  auto emit = [&](State const& s, std::string const& name) {
    auto const path = cfg.out_dir / name;
    write_snapshot_csv(s, path);
    files.paths.push_back(path);
  };
  for (std::size_t n : coarse) {
    Trajectory const tr = run_profile(cfg, n);
    emit(tr.initial(), stem + "_initial_N" + std::to_string(n) + ".csv");
    emit(tr.final(), stem + "_N" + std::to_string(n) + tag + ".csv");
  }
  if (with_reference) {
    Trajectory const ref = run_profile(cfg, cfg.n_ref);
    emit(ref.final(), stem + "_ref_N" + std::to_string(cfg.n_ref) + tag + ".csv");
  }
  return files;
}

/// Figure data from a finished study: initial averages and final state for each
/// requested N present in the study, plus its reference. Returns the paths.
inline SnapshotFiles write_study_figures(ExperimentConfig const& cfg, ConvergenceStudy const& study,
                                         std::vector<std::size_t> const& wanted) {
  std::filesystem::create_directories(cfg.out_dir);
  SnapshotFiles files;
  std::string const stem = "fig_" + cfg.profile;
  std::string const tag = "_T" + format_real(cfg.t_end);
  auto emit = [&](State const& s, std::string const& name) {
    auto const path = cfg.out_dir / name;
    write_snapshot_csv(s, path);
    files.paths.push_back(path);
  };
  InitialProfile const profile = profile_by_name(cfg.profile);
  for (std::size_t i = 0; i < study.table.rows.size(); ++i) {
    std::size_t const n = study.table.rows[i].n;
    if (std::find(wanted.begin(), wanted.end(), n) == wanted.end()) continue;
    emit(cell_average_init(profile, Grid(n)), stem + "_initial_N" + std::to_string(n) + ".csv");
    emit(study.finals[i], stem + "_N" + std::to_string(n) + tag + ".csv");
  }
  if (!files.paths.empty())
    emit(study.reference, stem + "_ref_N" + std::to_string(cfg.n_ref) + tag + ".csv");
  return files;
}

}  // namespace ohflux
