// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "ohflux/ohflux.hpp"
#include "oracles.hpp"

using namespace ohflux;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::map<int, std::string> lines;
int failures = 0;

void report(int id, std::string const& title, Outcome const& o) {
  lines[id] = std::string(o.pass ? "PASS" : "FAIL") + "  [" + std::to_string(id) + "] " + title + ": " + o.detail;
  if (!o.pass) ++failures;
  std::cerr << "finished criterion " << id << std::endl;
}

template <class F>
void criterion(int id, std::string const& title, F&& body) {
  auto const t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (std::exception const& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  double const secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char buf[32];
  std::snprintf(buf, sizeof buf, " (%.1f s)", secs);
  report(id, title, {o.pass, o.detail + buf});
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Sup-norm and mean checks gathered from every run of the session.
struct BoundLog {
  std::mutex mu;
  std::map<std::string, DiagnosticsReport> reports;
  std::vector<std::pair<std::string, StepDiagnostics>> live;

  ObserverFactory factory(std::string const& tag) {
    return [this, tag](std::size_t n) {
      StepDiagnosticsOptions opt;
      opt.stride = 0;
      opt.entropy = false;
      StepDiagnostics d(builtin_flux(), builtin_oh_flux(), opt);
      std::lock_guard lock(mu);
      live.emplace_back(tag + " N=" + std::to_string(n), d);
      return std::vector<Observer>{d.observer()};
    };
  }

  void collect() {
    std::lock_guard lock(mu);
    for (auto const& [name, d] : live) reports[name] = d.report();
    live.clear();
  }

  void add(std::string const& name, DiagnosticsReport r) {
    std::lock_guard lock(mu);
    reports[name] = std::move(r);
  }

  static NumericalFlux builtin_flux() { return engquist_osher(builtin_oh_flux()); }
};

BoundLog bounds;

std::map<std::pair<std::string, std::size_t>, ConvergenceStudy> studies;

// Rate floor: N = 64..2048 against N_ref = 4096. Table comparison: the
// tabulated N = 32..2048 against the tabulated reference N_ref = 8192.
ConvergenceStudy const& study(std::string const& profile, std::size_t n_ref) {
  auto const key = std::make_pair(profile, n_ref);
  auto it = studies.find(key);
  if (it == studies.end()) {
    ExperimentConfig cfg;
    cfg.profile = profile;
    cfg.n_ref = n_ref;
    cfg.t_end = 36.0;
    cfg.n_list = n_ref == 4096 ? std::vector<std::size_t>{64, 128, 256, 512, 1024, 2048}
                               : std::vector<std::size_t>{32, 64, 128, 256, 512, 1024, 2048};
    std::string const tag = profile + " ref" + std::to_string(n_ref);
    it = studies.emplace(key, run_convergence_study(cfg, bounds.factory(tag))).first;
    bounds.collect();
  }
  return it->second;
}

std::string rate_list(ConvergenceTable const& t) {
  std::string s;
  for (auto const& r : t.rows)
    if (r.rate) s += (s.empty() ? "" : " ") + num(*r.rate);
  return s;
}

Outcome rate_floor() {
  bool ok = true;
  std::string detail;
  for (char const* p : {"corner", "cosine"}) {
    auto const& t = study(p, 4096).table;
    for (auto const& r : t.rows)
      if (r.rate && !(*r.rate >= 0.5)) ok = false;
    detail += std::string(detail.empty() ? "" : "; ") + p + " rates " + rate_list(t);
  }
  return {ok, detail};
}

Outcome table_reproduction() {
  std::map<std::string, std::vector<double>> const expected = {
      {"corner", {0.5, 0.6, 0.8, 1.0, 1.1, 1.2}}, {"cosine", {0.7, 0.9, 0.9, 1.0, 1.1, 1.2}}};
  bool ok = true;
  std::string detail;
  for (auto const& [p, want] : expected) {
    auto const& rows = study(p, 8192).table.rows;
    std::string errs;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      errs += (i ? " " : "") + num(rows[i].error_percent);
      if (i > 0 && !(rows[i].error_percent < rows[i - 1].error_percent)) ok = false;
    }
    for (std::size_t i = 1; i < rows.size(); ++i)
      if (!(std::abs(*rows[i].rate - want[i - 1]) <= 0.3)) ok = false;
    detail += (detail.empty() ? "" : "; ") + p + " E% " + errs + " rates " + rate_list(study(p, 8192).table);
  }
  return {ok, detail};
}

Outcome entropy_every_step() {
  FluxModel const model = builtin_oh_flux();
  NumericalFlux const nf = engquist_osher(model);
  StepDiagnosticsOptions opt;
  opt.stride = 1;
  StepDiagnostics diag(nf, model, opt);
  std::size_t observed = 0;
  StepControl ctrl;
  ctrl.t_end = 1.0;
  Trajectory const tr = evolve_to(cell_average_init(cosine_profile(), Grid(64)), ctrl, nf, {},
                                  {diag.observer(), [&observed](StepRecord const&) { ++observed; }});
  DiagnosticsReport const rep = diag.report();
  bounds.add("entropy run N=64", rep);
  CheckResult const* e = rep.find("entropy");
  return {e->pass() && observed == tr.steps && tr.steps > 0,
          "worst normalized residual " + num(e->worst_residual) + " over " + std::to_string(tr.steps) +
              " steps (" + std::to_string(e->evaluations) + " cell/level pairs)"};
}

Outcome linf_bounds() {
  bool ok = !bounds.reports.empty();
  double worst_step = -INFINITY, worst_bound = -INFINITY;
  std::string bad;
  for (auto const& [name, rep] : bounds.reports) {
    for (char const* c : {"linf_step", "linf_bound"}) {
      CheckResult const* r = rep.find(c);
      if (!r) continue;
      (std::string(c) == "linf_step" ? worst_step : worst_bound) =
          std::max(std::string(c) == "linf_step" ? worst_step : worst_bound, r->worst_residual);
      if (!r->pass()) {
        ok = false;
        bad += " " + name + ":" + c + "=" + num(r->worst_residual);
      }
    }
  }
  return {ok, std::to_string(bounds.reports.size()) + " runs, worst per-step " + num(worst_step) +
                  ", worst cumulative " + num(worst_bound) + (bad.empty() ? "" : ", violations" + bad)};
}

Outcome zero_mean() {
  study("corner", 4096);
  auto const it = bounds.reports.find("corner ref4096 N=2048");
  if (it == bounds.reports.end()) return {false, "corner N=2048 run missing"};
  CheckResult const* r = it->second.find("zero_mean");
  return {r->pass(), "max |dx sum u| / max(1, linf0) = " + num(r->worst_residual)};
}

Outcome source_identities_random() {
  std::mt19937_64 rng(6);
  double worst_rel = 0.0, worst_ratio = 0.0, worst_diff = 0.0, worst_sum = 0.0;
  bool ok = true;
  for (std::size_t n : {2, 3, 4, 64, 1024}) {
    double const dx = 1.0 / static_cast<double>(n);
    for (int trial = 0; trial < 100; ++trial) {
      State s{Grid(n)};
      s.u = oracle::random_zero_mean(n, rng, 1.0);
      std::vector<double> const p = compute_source(s);
      SourceIdentityReport const id = source_identities(s, p);
      std::vector<double> const bf = oracle::brute_force_source(s.u, dx);
      double const scale = linf_norm(s);
      double rel = 0.0;
      for (std::size_t j = 0; j < n; ++j) rel = std::max(rel, std::abs(p[j] - bf[j]) / scale);
      double const rounding = 64.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(n) * scale;
      double const diff = std::max(id.interior_residual, id.wrap_residual);
      worst_rel = std::max(worst_rel, rel);
      worst_ratio = std::max(worst_ratio, id.bound_ratio);
      worst_diff = std::max(worst_diff, diff / scale);
      worst_sum = std::max(worst_sum, id.sum_residual / scale);
      if (rel > 1e-13 || id.bound_ratio > 2.0 || diff > rounding || id.sum_residual > rounding) ok = false;
    }
  }
  return {ok, "sum P " + num(worst_sum) + ", D-P " + num(worst_diff) + ", max|P|/|u| " + num(worst_ratio) +
                  ", vs brute force " + num(worst_rel)};
}

Outcome l1_stability() {
  constexpr double two_pi = 2 * std::numbers::pi;
  InitialProfile pert = cosine_profile();
  pert.eval = [](double x) { return cosine_profile().eval(x) + 1e-3 * std::sin(2 * two_pi * x); };
  pert.exact_cell_average = [](double a, double b) {
    return cosine_profile().exact_cell_average(a, b) -
           1e-3 * (std::cos(2 * two_pi * b) - std::cos(2 * two_pi * a)) / (2 * two_pi * (b - a));
  };
  NumericalFlux const nf = engquist_osher(builtin_oh_flux());
  StepControl ctrl;
  ctrl.t_end = 2.0;
  auto const [ta, tb] = evolve_lockstep(cell_average_init(cosine_profile(), Grid(128)),
                                        cell_average_init(pert, Grid(128)), ctrl, nf);
  for (auto const* tr : {&ta, &tb}) {
    DiagnosticsReport rep;
    rep.checks = {check_linf_step(*tr), check_linf_bound(*tr)};
    bounds.add(tr == &ta ? "lockstep u" : "lockstep v", rep);
  }
  CheckResult const r = check_l1_stability(ta, tb);
  return {r.pass(), std::to_string(ta.steps) + " steps, worst (|u-v|_1 - bound)/bound " + num(r.worst_residual)};
}

Outcome step_oracle() {
  std::mt19937_64 rng(8);
  NumericalFlux const nf = engquist_osher(builtin_oh_flux());
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    State s{Grid(32)};
    s.u = oracle::random_zero_mean(32, rng, 0.5);
    StepControl ctrl;
    ctrl.t_end = 1e9;
    double const dt = cfl_dt(nf, s, ctrl);
    State const next = step(s, dt, nf);
    std::vector<double> const want = oracle::straight_line_step(s.u, dt);
    for (std::size_t j = 0; j < 32; ++j) worst = std::max(worst, std::abs(next.u[j] - want[j]));
  }
  return {worst <= 1e-14, "max |difference| per cell " + num(worst)};
}

Outcome flux_conformance() {
  FluxModel const m = builtin_oh_flux();
  NumericalFlux const eo = engquist_osher(m);
  double const cons = check_consistency(eo, m, SampleSpec::uniform(101, 101)).max_deviation;
  MonotonicityReport const mono = check_monotonicity(eo, SampleSpec::uniform(21, 41));
  MonotonicityReport const under = check_monotonicity(lax_friedrichs(m, 1.0), SampleSpec::uniform(21, 41));
  return {cons <= 1e-13 && mono.violations == 0 && under.violations > 0,
          "EO consistency " + num(cons) + ", EO violations " + std::to_string(mono.violations) +
              ", LF(alpha=1) violations " + std::to_string(under.violations)};
}

Outcome determinism() {
  namespace fs = std::filesystem;
  auto const root = fs::temp_directory_path() / "ohflux_acceptance_determinism";
  fs::remove_all(root);
  std::string text[2];
  for (int i = 0; i < 2; ++i) {
    KeyValues kv = {{"profile", "cosine"}, {"N_list", "32,64,128"}, {"N_ref", "512"},
                    {"T", "2"},           {"verbosity", "0"},       {"out", (root / std::to_string(i)).string()}};
    RunConfig const cfg = parse_config(Command::Convergence, std::nullopt, kv);
    std::ostringstream out, err;
    if (cmd_convergence(cfg, out, err) != kExitOk) return {false, "cmd_convergence failed: " + err.str()};
    std::ifstream in(root / std::to_string(i) / "convergence_cosine.csv", std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    text[i] = buf.str();
  }
  return {!text[0].empty() && text[0] == text[1], std::to_string(text[0].size()) + " bytes, identical"};
}

}  // namespace

int main() {
  criterion(1, "convergence-rate floor", rate_floor);
  criterion(2, "convergence table rates", table_reproduction);
  criterion(3, "discrete entropy inequality", entropy_every_step);
  criterion(5, "zero-mean conservation", zero_mean);
  criterion(6, "source identities", source_identities_random);
  criterion(7, "discrete L1 stability", l1_stability);
  criterion(8, "single-step oracle", step_oracle);
  criterion(9, "flux conformance", flux_conformance);
  criterion(10, "convergence CSV determinism", determinism);
  criterion(4, "sup-norm bounds on every acceptance run", linf_bounds);
  for (auto const& [id, line] : lines) std::cout << line << '\n';
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
