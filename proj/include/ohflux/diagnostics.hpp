#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ohflux/evolve.hpp"
#include "ohflux/flux_model.hpp"
#include "ohflux/mesh_state.hpp"
#include "ohflux/nonlocal_source.hpp"

namespace ohflux {

/// Outcome of one named check. `worst_residual` is the largest normalized
/// violation (LHS - RHS) / scale seen; the check passes when it does not
/// exceed `tolerance`. Location fields are empty when not applicable.
struct CheckResult {
  std::string name;
  double worst_residual = -std::numeric_limits<double>::infinity();
  std::optional<std::size_t> n = {};
  std::optional<std::size_t> j = {};
  std::optional<double> k = {};
  double tolerance = 0.0;
  std::size_t evaluations = 0;

  bool pass() const { return evaluations == 0 || worst_residual <= tolerance; }

  void offer(double residual, std::optional<std::size_t> step, std::optional<std::size_t> cell = {},
             std::optional<double> level = {}) {
    ++evaluations;
    if (residual > worst_residual || evaluations == 1) {
      worst_residual = residual;
      n = step;
      j = cell;
      k = level;
    }
  }

  void merge(CheckResult const& other) {
    if (other.evaluations == 0) return;
    std::size_t const count = evaluations + other.evaluations;
    if (evaluations == 0 || other.worst_residual > worst_residual) {
      worst_residual = other.worst_residual;
      n = other.n;
      j = other.j;
      k = other.k;
    }
    evaluations = count;
  }
};

struct DiagnosticsReport {
  std::vector<CheckResult> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](auto const& c) { return c.pass(); });
  }

  CheckResult const* find(std::string const& name) const {
    for (auto const& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

/// CSV with header `check,worst_residual,n,j,k,pass`.
inline void write_report_csv(DiagnosticsReport const& report, std::filesystem::path const& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  out << "check,worst_residual,n,j,k,pass\n";
  for (auto const& c : report.checks) {
    out << c.name << ',' << (c.evaluations ? format_real(c.worst_residual) : std::string()) << ','
        << (c.n ? std::to_string(*c.n) : "") << ',' << (c.j ? std::to_string(*c.j) : "") << ','
        << (c.k ? format_real(*c.k) : "") << ',' << (c.pass() ? "true" : "false") << '\n';
  }
  if (!out) throw InputError("write failed for '" + path.string() + "'");
}

/// Tolerances for the runtime checks.
struct DiagnosticTolerances {
  double entropy = 1e-12;      // relative to 1 + |u|_inf + |P|_inf
  double linf = 1e-12;         // relative slack on the sup-norm bounds
  double bv = 1e-12;           // relative slack on the BV bounds
  double time_continuity = 1e-12;
  double l1_stability = 1e-10;
};

// ---------------------------------------------------------------------------
// Discrete entropy inequality

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// Cell values of both states plus `extra` equispaced levels spanning
/// [min - 1, max + 1].
inline std::vector<double> standard_k_set(State const& prev, State const& next,
                                          std::size_t extra = 5) {
  std::vector<double> ks;
  ks.reserve(prev.size() + next.size() + extra);
  ks.insert(ks.end(), prev.u.begin(), prev.u.end());
  ks.insert(ks.end(), next.u.begin(), next.u.end());
  auto const [lo_p, hi_p] = std::minmax_element(prev.u.begin(), prev.u.end());
  auto const [lo_n, hi_n] = std::minmax_element(next.u.begin(), next.u.end());
  double const lo = std::min(*lo_p, *lo_n) - 1.0;
  double const hi = std::max(*hi_p, *hi_n) + 1.0;
  for (std::size_t i = 0; i < extra; ++i)
    ks.push_back(extra > 1 ? lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(extra - 1)
                           : lo);
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  return ks;
}

/// Worst normalized residual of
///   D+ |u_j - k| + D- Q_{j+1/2} + s_j D- f(x_{j+1/2}, k) <= s_j P_j,
/// s_j = sgn(u^{n+1}_j - k), Q = F(x, u v k, v v k) - F(x, u ^ k, v ^ k),
/// normalized by 1 + |u|_inf + |P|_inf.
inline CheckResult entropy_residual(State const& prev, State const& next, double dt,
                                    NumericalFlux const& nf, FluxModel const& model,
                                    std::span<double const> k_set, double tolerance = 1e-12,
                                    std::optional<std::size_t> step_index = {}) {
  CheckResult r{.name = "entropy", .tolerance = tolerance};
  std::size_t const n = prev.size();
  double const dx = prev.dx();
  std::vector<double> const p = compute_source(prev);
  double const scale =
      1.0 + std::max(linf_norm(prev), linf_norm(next)) + linf_norm(std::span<double const>(p));

  std::vector<double> faces(n);
  for (std::size_t f = 0; f < n; ++f) faces[f] = prev.grid.face(f);

  std::vector<double> q(n);
  std::vector<double> fk(n);
  for (double k : k_set) {
    // q[f], fk[f] live on face f (left face of cell f).
    for (std::size_t f = 0; f < n; ++f) {
      double const l = prev.u[f == 0 ? n - 1 : f - 1];
      double const rr = prev.u[f];
      q[f] = nf(faces[f], std::max(l, k), std::max(rr, k)) - nf(faces[f], std::min(l, k), std::min(rr, k));
      fk[f] = model.value(faces[f], k);
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t const right = i + 1 == n ? 0 : i + 1;
      double const s = sign(next.u[i] - k);
      double const lhs = (std::abs(next.u[i] - k) - std::abs(prev.u[i] - k)) / dt +
                         (q[right] - q[i]) / dx + s * (fk[right] - fk[i]) / dx;
      double const rhs = s * p[i];
      r.offer((lhs - rhs) / scale, step_index, i + 1, k);
    }
  }
  return r;
}

inline CheckResult entropy_residual(State const& prev, State const& next, double dt,
                                    NumericalFlux const& nf, FluxModel const& model,
                                    double tolerance = 1e-12,
                                    std::optional<std::size_t> step_index = {}) {
  auto const ks = standard_k_set(prev, next);
  return entropy_residual(prev, next, dt, nf, model, ks, tolerance, step_index);
}

// ---------------------------------------------------------------------------
// Sup-norm, BV and time-continuity bounds

namespace detail {

inline double relative_excess(double value, double bound) {
  return bound > 0.0 ? (value - bound) / bound : value;
}

}  // namespace detail

/// |u^{n+1}|_inf <= (1 + 2 dt) |u^n|_inf, relative residual.
inline double linf_step_residual(State const& prev, State const& next, double dt) {
  return detail::relative_excess(linf_norm(next), (1.0 + 2.0 * dt) * linf_norm(prev));
}

/// |u^n|_inf <= e^{2 t^n} |u^0|_inf at every snapshot.
inline CheckResult check_linf_bound(Trajectory const& traj, double tolerance = 1e-12) {
  CheckResult r{.name = "linf_bound", .tolerance = tolerance};
  State const& s0 = traj.initial();
  double const linf0 = linf_norm(s0);
  for (std::size_t n = 0; n < traj.snapshots.size(); ++n) {
    State const& s = traj.snapshots[n];
    r.offer(detail::relative_excess(linf_norm(s), std::exp(2.0 * (s.t - s0.t)) * linf0), n);
  }
  return r;
}

/// Per-step sup-norm growth along consecutive snapshots.
inline CheckResult check_linf_step(Trajectory const& traj, double tolerance = 1e-12) {
  CheckResult r{.name = "linf_step", .tolerance = tolerance};
  for (std::size_t n = 0; n + 1 < traj.snapshots.size(); ++n) {
    State const& a = traj.snapshots[n];
    State const& b = traj.snapshots[n + 1];
    r.offer(linf_step_residual(a, b, b.t - a.t), n);
  }
  return r;
}

/// Sup-norms of the second partials over x in [0,1], |u| <= box, and the
/// total-variation growth constant built from them.
struct BoundConstants {
  double box = 0.0;       // state bound used
  double f_xu_sup = 0.0;  // sup |d2f/dxdu|
  double f_xx_sup = 0.0;  // sup |d2f/dx2|
  double c_f_bv = 0.0;
  double growth_rate = 2.0;
};

/// Sampled sup of |h(x,u)| over a lattice of [0,1] x [-box, box].
inline double sampled_sup(PointFunction const& h, double box, std::size_t nx = 4097,
                          std::size_t nu = 33) {
  double sup = 0.0;
  for (std::size_t a = 0; a < nx; ++a) {
    double const x = static_cast<double>(a) / static_cast<double>(nx - 1);
    for (std::size_t b = 0; b < nu; ++b) {
      double const u = -box + 2.0 * box * static_cast<double>(b) / static_cast<double>(nu - 1);
      sup = std::max(sup, std::abs(h(x, u)));
    }
  }
  return sup;
}

/// With a = sup|f_xu| and b = sup|f_xx| + box the per-step estimate
/// BV' <= (1 + dt a) BV + dt b integrates to e^{at} BV0 + (b/a)(e^{at} - 1),
/// so C_f = max(a, b/a) dominates it (sqrt(b) when a = 0).
inline BoundConstants assemble_bound_constants(FluxModel const& model, double box) {
  if (!model.d2_dxx || !model.d2_dxu)
    throw ConfigError("model '" + model.name + "' has no second partials for the BV bound");
  BoundConstants c;
  c.box = box;
  c.f_xu_sup = sampled_sup(model.d2_dxu, box);
  c.f_xx_sup = sampled_sup(model.d2_dxx, box);
  double const a = c.f_xu_sup;
  double const b = c.f_xx_sup + box;
  c.c_f_bv = a > 0.0 ? std::max(a, b / a) : std::sqrt(b);
  return c;
}

/// BV(u^{n+1}) <= (1 + dt |f_xu|) BV(u^n) + dt (|f_xx| + |u^n|_inf), with the
/// sup-norms taken over |u| <= |u^n|_inf.
inline double bv_step_residual(State const& prev, State const& next, double dt,
                               FluxModel const& model) {
  double const m = linf_norm(prev);
  double const a = sampled_sup(model.d2_dxu, m, 1025, 17);
  double const b = sampled_sup(model.d2_dxx, m, 1025, 17);
  double const bound = (1.0 + dt * a) * bv_seminorm(prev) + dt * (b + m);
  return detail::relative_excess(bv_seminorm(next), bound);
}

/// BV(u^n) <= e^{C t} BV(u^0) + C (e^{C t} - 1) at every snapshot.
inline CheckResult check_bv_bound(Trajectory const& traj, BoundConstants const& consts,
                                  double tolerance = 1e-12) {
  CheckResult r{.name = "bv_bound", .tolerance = tolerance};
  State const& s0 = traj.initial();
  double const bv0 = bv_seminorm(s0);
  double const c = consts.c_f_bv;
  for (std::size_t n = 0; n < traj.snapshots.size(); ++n) {
    State const& s = traj.snapshots[n];
    double const e = std::exp(c * (s.t - s0.t));
    r.offer(detail::relative_excess(bv_seminorm(s), e * bv0 + c * (e - 1.0)), n);
  }
  return r;
}

inline CheckResult check_bv_bound(Trajectory const& traj, FluxModel const& model,
                                  double tolerance = 1e-12) {
  double box = 0.0;
  for (auto const& s : traj.snapshots) box = std::max(box, linf_norm(s));
  return check_bv_bound(traj, assemble_bound_constants(model, box), tolerance);
}

inline CheckResult check_bv_step(Trajectory const& traj, FluxModel const& model,
                                 double tolerance = 1e-12) {
  CheckResult r{.name = "bv_step", .tolerance = tolerance};
  for (std::size_t n = 0; n + 1 < traj.snapshots.size(); ++n) {
    State const& a = traj.snapshots[n];
    State const& b = traj.snapshots[n + 1];
    r.offer(bv_step_residual(a, b, b.t - a.t, model), n);
  }
  return r;
}

/// dx * sum_j |u^{n+1}_j - u^n_j| / dt_n
inline double time_variation(State const& prev, State const& next) {
  double sum = 0.0;
  for (std::size_t i = 0; i < prev.size(); ++i) sum += std::abs(next.u[i] - prev.u[i]);
  return prev.dx() * sum / (next.t - prev.t);
}

/// dx sum|D+ u^n| <= dx sum|D+ u^0| + 2 (e^{2 t^n} - 1) |u^0|_inf along
/// consecutive snapshots (record every step for the discrete statement).
inline CheckResult check_time_continuity(Trajectory const& traj, double tolerance = 1e-12) {
  CheckResult r{.name = "time_continuity", .tolerance = tolerance};
  if (traj.snapshots.size() < 2) return r;
  State const& s0 = traj.initial();
  double const linf0 = linf_norm(s0);
  double const tv0 = time_variation(traj.snapshots[0], traj.snapshots[1]);
  for (std::size_t n = 0; n + 1 < traj.snapshots.size(); ++n) {
    State const& a = traj.snapshots[n];
    double const tv = time_variation(a, traj.snapshots[n + 1]);
    double const bound = tv0 + 2.0 * (std::exp(2.0 * (a.t - s0.t)) - 1.0) * linf0;
    r.offer(detail::relative_excess(tv, bound), n);
  }
  return r;
}

/// Largest ratio |u_h(t) - u_h(s)|_1 / (|t - s| + dt_max) over snapshot pairs;
/// a finite measured Lipschitz-in-time constant.
inline double time_modulus_constant(Trajectory const& traj) {
  double c = 0.0;
  double const dt = traj.dt_max;
  for (std::size_t a = 0; a < traj.snapshots.size(); ++a) {
    for (std::size_t b = a + 1; b < traj.snapshots.size(); ++b) {
      State const& sa = traj.snapshots[a];
      State const& sb = traj.snapshots[b];
      double diff = 0.0;
      for (std::size_t i = 0; i < sa.size(); ++i) diff += std::abs(sa.u[i] - sb.u[i]);
      diff *= sa.dx();
      c = std::max(c, diff / (std::abs(sb.t - sa.t) + dt));
    }
  }
  return c;
}

/// dx sum|u - v|
inline double l1_distance(State const& a, State const& b) {
  if (!(a.grid == b.grid)) throw InputError("L1 distance needs states on the same grid");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a.u[i] - b.u[i]);
  return a.dx() * sum;
}

/// |u^n - v^n|_1 <= e^{2 t^n} |u^0 - v^0|_1 for lockstep trajectories.
inline CheckResult check_l1_stability(Trajectory const& a, Trajectory const& b,
                                      double tolerance = 1e-10) {
  if (a.snapshots.size() != b.snapshots.size())
    throw InputError("L1 stability check needs trajectories with matching step counts");
  CheckResult r{.name = "l1_stability", .tolerance = tolerance};
  double const d0 = l1_distance(a.initial(), b.initial());
  double const t0 = a.initial().t;
  for (std::size_t n = 0; n < a.snapshots.size(); ++n) {
    State const& sa = a.snapshots[n];
    State const& sb = b.snapshots[n];
    if (sa.t != sb.t) throw InputError("L1 stability check needs a shared step sequence");
    r.offer(detail::relative_excess(l1_distance(sa, sb), std::exp(2.0 * (sa.t - t0)) * d0), n);
  }
  return r;
}

inline CheckResult check_zero_mean(Trajectory const& traj, double tolerance = 1e-10) {
  CheckResult r{.name = "zero_mean", .tolerance = tolerance};
  double const scale = std::max(1.0, linf_norm(traj.initial()));
  for (std::size_t n = 0; n < traj.snapshots.size(); ++n)
    r.offer(std::abs(mean_value(traj.snapshots[n])) / scale, n);
  return r;
}

// ---------------------------------------------------------------------------
// Streaming checks for long runs

struct StepDiagnosticsOptions {
  /// Entropy, BV-step and time-continuity checks run every `stride` steps;
  /// 0 disables them. Sup-norm and mean checks run every step.
  std::size_t stride = 1;
  bool entropy = true;
  DiagnosticTolerances tolerances{};
};

/// Accumulates per-step checks while a run is in progress; attach with
/// observer() and read the result with report().
class StepDiagnostics {
 public:
  StepDiagnostics(NumericalFlux nf, FluxModel model, StepDiagnosticsOptions options = {})
      : state_(std::make_shared<Data>(std::move(nf), std::move(model), options)) {}

  Observer observer() const {
    return [data = state_](StepRecord const& rec) { data->observe(rec); };
  }

  DiagnosticsReport report() const { return state_->finish(); }

 private:
  struct Data {
    NumericalFlux nf;
    FluxModel model;
    StepDiagnosticsOptions opt;
    CheckResult entropy{.name = "entropy"};
    CheckResult linf_step{.name = "linf_step"};
    CheckResult linf_bound{.name = "linf_bound"};
    CheckResult bv_step{.name = "bv_step"};
    CheckResult time_cont{.name = "time_continuity"};
    CheckResult zero_mean{.name = "zero_mean"};
    // Series for the bounds that need the whole run.
    double t0 = 0.0;
    double linf0 = 0.0;
    double bv0 = 0.0;
    double tv0 = -1.0;
    double box = 0.0;
    std::vector<std::pair<double, double>> bv_series;  // (t, BV)

    Data(NumericalFlux f, FluxModel m, StepDiagnosticsOptions o)
        : nf(std::move(f)), model(std::move(m)), opt(o) {
      entropy.tolerance = opt.tolerances.entropy;
      linf_step.tolerance = opt.tolerances.linf;
      linf_bound.tolerance = opt.tolerances.linf;
      bv_step.tolerance = opt.tolerances.bv;
      time_cont.tolerance = opt.tolerances.time_continuity;
      zero_mean.tolerance = 1e-10;
    }

    void observe(StepRecord const& rec) {
      if (rec.n == 0) {
        t0 = rec.prev.t;
        linf0 = linf_norm(rec.prev);
        bv0 = bv_seminorm(rec.prev);
        box = linf0;
        bv_series.emplace_back(rec.prev.t, bv0);
      }
      double const linf_next = linf_norm(rec.next);
      box = std::max(box, linf_next);
      bv_series.emplace_back(rec.next.t, bv_seminorm(rec.next));

      linf_step.offer(linf_step_residual(rec.prev, rec.next, rec.dt), rec.n);
      linf_bound.offer(
          detail::relative_excess(linf_next, std::exp(2.0 * (rec.next.t - t0)) * linf0), rec.n + 1);
      zero_mean.offer(std::abs(mean_value(rec.next)) / std::max(1.0, linf0), rec.n + 1);

      double const tv = time_variation(rec.prev, rec.next);
      if (rec.n == 0) tv0 = tv;
      bool const strided = opt.stride > 0 && rec.n % opt.stride == 0;
      if (strided) {
        double const bound = tv0 + 2.0 * (std::exp(2.0 * (rec.prev.t - t0)) - 1.0) * linf0;
        time_cont.offer(detail::relative_excess(tv, bound), rec.n);
        bv_step.offer(bv_step_residual(rec.prev, rec.next, rec.dt, model), rec.n);
        if (opt.entropy)
          entropy.merge(entropy_residual(rec.prev, rec.next, rec.dt, nf, model,
                                         opt.tolerances.entropy, rec.n));
      }
    }

    DiagnosticsReport finish() const {
      DiagnosticsReport rep;
      rep.checks = {entropy, linf_step, linf_bound, bv_step};
      CheckResult bv_bound{.name = "bv_bound", .tolerance = opt.tolerances.bv};
      if (!bv_series.empty()) {
        BoundConstants const c = assemble_bound_constants(model, box);
        for (std::size_t n = 0; n < bv_series.size(); ++n) {
          double const e = std::exp(c.c_f_bv * (bv_series[n].first - t0));
          bv_bound.offer(detail::relative_excess(bv_series[n].second, e * bv0 + c.c_f_bv * (e - 1.0)),
                         n);
        }
      }
      rep.checks.push_back(bv_bound);
      rep.checks.push_back(time_cont);
      rep.checks.push_back(zero_mean);
      return rep;
    }
  };

  std::shared_ptr<Data> state_;
};

}  // namespace ohflux
