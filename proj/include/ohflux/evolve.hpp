#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ohflux/errors.hpp"
#include "ohflux/flux_model.hpp"
#include "ohflux/mesh_state.hpp"
#include "ohflux/nonlocal_source.hpp"

namespace ohflux {

/// Multiplier applied to the current sup-norm to cover one step's growth
/// (at most 1 + 2 dt) when sizing the monotonicity box.
inline constexpr double kStateBoxMargin = 1.1;
/// Floor on the wave bound so a zero state still yields a finite step.
inline constexpr double kMinWaveBound = 1e-12;

struct StepControl {
  double cfl_safety = 0.9;
  std::optional<double> fixed_dt;  // adaptive when empty
  double t_end = 0.0;
  /// Keep every intermediate state in the trajectory.
  bool record_every_step = false;
  /// Multiplies the source term. Anything but 1 is a fault-injection hook
  /// for exercising the diagnostics.
  double source_sign = 1.0;

  void validate() const {
    if (!(cfl_safety > 0.0 && cfl_safety <= 1.0))
      throw ConfigError("cfl_safety must lie in (0,1], got " + std::to_string(cfl_safety));
    if (fixed_dt && !(*fixed_dt > 0.0))
      throw ConfigError("fixed dt must be positive, got " + std::to_string(*fixed_dt));
    if (!(t_end >= 0.0) || !std::isfinite(t_end))
      throw ConfigError("t_end must be finite and nonnegative, got " + std::to_string(t_end));
  }
};

/// Time step for the current sup-norm `linf`, clipped to land on t_end.
/// Adaptive: dt = safety * dx / max(B, 1e-12) with B the flux wave bound on
/// [-1.1 linf, 1.1 linf]. Fixed: the configured dt, checked against the same
/// bound.
inline double cfl_dt(NumericalFlux const& nf, double linf, double dx, double t,
                     StepControl const& ctrl) {
  double const box = kStateBoxMargin * linf;
  if (auto reason = nf.inadmissible_reason(box)) throw ConfigError(*reason);
  double const bound = nf.wave_bound(box);
  double dt = 0.0;
  if (ctrl.fixed_dt) {
    dt = *ctrl.fixed_dt;
    if (dt * bound > dx) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "fixed dt = " << dt << " violates the monotonicity bound dt * B <= dx with B = "
          << bound << " (|u| <= " << box << "), dx = " << dx << "; need dt <= " << dx / bound;
      throw ConfigError(msg.str());
    }
  } else {
    dt = ctrl.cfl_safety * dx / std::max(bound, kMinWaveBound);
  }
  double const remaining = ctrl.t_end - t;
  if (remaining > 0.0 && dt > remaining) dt = remaining;
  return dt;
}

inline double cfl_dt(NumericalFlux const& nf, State const& s, StepControl const& ctrl) {
  return cfl_dt(nf, linf_norm(s), s.dx(), s.t, ctrl);
}

/// Scratch buffers reused across steps.
struct StepWorkspace {
  std::vector<double> face_flux;
  std::vector<double> source;
};

/// u_j <- u_j - (dt/dx) (F_{j+1/2} - F_{j-1/2}) + dt P_j with periodic ghosts.
/// Leaves P^n in ws.source.
inline State step(State const& s, double dt, FaceKernel const& kernel, StepWorkspace& ws,
                  double source_sign = 1.0, std::size_t step_index = 0) {
  std::size_t const n = s.size();
  ws.face_flux.resize(n);
  ws.source.resize(n);
  kernel(s.u, ws.face_flux);
  compute_source(s.u, s.dx(), ws.source);

  double const lambda = dt / s.dx();
  State next(s.grid, s.t + dt);
  for (std::size_t i = 0; i < n; ++i) {
    double const right = ws.face_flux[i + 1 == n ? 0 : i + 1];
    next.u[i] = s.u[i] - lambda * (right - ws.face_flux[i]) + dt * source_sign * ws.source[i];
  }
  if (!next.all_finite()) {
    std::ostringstream msg;
    msg << "numerical blow-up at step " << step_index << " (t = " << s.t << ", dt = " << dt
        << ")";
    throw BlowUpError(msg.str(), step_index);
  }
  return next;
}

inline State step(State const& s, double dt, NumericalFlux const& nf) {
  StepWorkspace ws;
  return step(s, dt, nf.bind(s.grid), ws);
}

/// One completed step as seen by observers: prev = u^n, next = u^{n+1}.
struct StepRecord {
  std::size_t n;
  double dt;
  State const& prev;
  State const& next;
  std::span<double const> source;  // P^n
};

/// Observers may throw InvariantViolation to abort the run.
using Observer = std::function<void(StepRecord const&)>;

struct Trajectory {
  std::vector<State> snapshots;
  std::size_t steps = 0;
  double dt_min = 0.0;
  double dt_max = 0.0;
  double dt_mean = 0.0;

  State const& initial() const { return snapshots.front(); }
  State const& final() const { return snapshots.back(); }
};

namespace detail {

inline std::vector<double> snapshot_targets(std::vector<double> times, double t0, double t_end) {
  for (double t : times)
    if (!(t >= t0 && t <= t_end))
      throw InputError("snapshot time " + std::to_string(t) + " outside [" + std::to_string(t0) +
                       ", " + std::to_string(t_end) + "]");
  times.push_back(t_end);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  std::erase_if(times, [t0](double t) { return t <= t0; });
  return times;
}

// A remainder below 1e-12 relative is folded into the landing step so the
// run never ends on a step of rounding-error size.
inline bool reaches(double t, double dt, double target) {
  return t + dt >= target - 1e-12 * std::max(1.0, std::abs(target));
}

inline double zero_mean_tolerance(double linf0) { return 1e-10 * std::max(1.0, linf0); }

inline void check_zero_mean(State const& s, double tolerance, std::size_t n) {
  double const mean = mean_value(s);
  if (std::abs(mean) > tolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "zero-mean drift: dx*sum(u) = " << mean << " at step " << n << " (t = " << s.t
        << "), tolerance " << tolerance;
    throw InvariantViolation(msg.str());
  }
}

struct DtStats {
  std::size_t steps = 0;
  double min = std::numeric_limits<double>::infinity();
  double max = 0.0;
  double sum = 0.0;

  void add(double dt) {
    ++steps;
    min = std::min(min, dt);
    max = std::max(max, dt);
    sum += dt;
  }

  void store(Trajectory& tr) const {
    tr.steps = steps;
    tr.dt_min = steps ? min : 0.0;
    tr.dt_max = max;
    tr.dt_mean = steps ? sum / static_cast<double>(steps) : 0.0;
  }
};

}  // namespace detail

/// Advance `s0` to ctrl.t_end. Snapshots hold the initial state, the state
/// at each requested time (steps are clipped to land on them exactly) and
/// the final state. The zero-mean property is enforced at every step.
inline Trajectory evolve_to(State s0, StepControl const& ctrl, NumericalFlux const& nf,
                            std::vector<double> const& snapshot_times = {},
                            std::vector<Observer> const& observers = {}) {
  ctrl.validate();
  if (!s0.all_finite()) throw InputError("initial state has non-finite values");
  double const mean_tol = detail::zero_mean_tolerance(linf_norm(s0));
  if (std::abs(mean_value(s0)) > mean_tol)
    throw InputError("initial state violates the zero-mean condition: dx*sum(u) = " +
                     format_real(mean_value(s0)));

  auto targets = detail::snapshot_targets(snapshot_times, s0.t, ctrl.t_end);
  FaceKernel const kernel = nf.bind(s0.grid);
  StepWorkspace ws;
  detail::DtStats stats;

  Trajectory tr;
  tr.snapshots.push_back(s0);
  State current = std::move(s0);
  std::size_t target_index = 0;
  std::size_t n = 0;
  while (target_index < targets.size()) {
    double const target = targets[target_index];
    double dt = cfl_dt(nf, linf_norm(current), current.dx(), current.t, ctrl);
    bool const lands = detail::reaches(current.t, dt, target);
    if (lands) dt = target - current.t;

    State next = step(current, dt, kernel, ws, ctrl.source_sign, n);
    if (lands) next.t = target;
    detail::check_zero_mean(next, mean_tol, n + 1);

    StepRecord const record{n, dt, current, next, ws.source};
    for (auto const& observer : observers) {
      try {
        observer(record);
      } catch (InvariantViolation const& e) {
        std::ostringstream msg;
        msg << e.what() << " [step " << n << ", t = " << current.t << " -> " << next.t << "]";
        throw InvariantViolation(msg.str());
      }
    }

    stats.add(dt);
    ++n;
    if (lands) {
      ++target_index;
      tr.snapshots.push_back(next);
    } else if (ctrl.record_every_step) {
      tr.snapshots.push_back(next);
    }
    current = std::move(next);
  }
  stats.store(tr);
  return tr;
}

/// Observer for a lockstep pair: both states advance with the same dt.
struct PairStepRecord {
  std::size_t n;
  double dt;
  State const& prev_a;
  State const& next_a;
  State const& prev_b;
  State const& next_b;
};

using PairObserver = std::function<void(PairStepRecord const&)>;

/// Evolve two states on the same grid with a shared dt sequence sized from
/// the larger of the two sup-norms. Every step is recorded.
inline std::pair<Trajectory, Trajectory> evolve_lockstep(State a0, State b0, StepControl ctrl,
                                                         NumericalFlux const& nf,
                                                         std::vector<PairObserver> const& observers = {}) {
  ctrl.validate();
  if (!(a0.grid == b0.grid)) throw InputError("lockstep runs need a shared grid");
  if (a0.t != b0.t) throw InputError("lockstep runs need a shared start time");
  FaceKernel const kernel = nf.bind(a0.grid);
  StepWorkspace ws;
  detail::DtStats stats;

  std::pair<Trajectory, Trajectory> out;
  out.first.snapshots.push_back(a0);
  out.second.snapshots.push_back(b0);
  State a = std::move(a0);
  State b = std::move(b0);
  std::size_t n = 0;
  while (a.t < ctrl.t_end) {
    double const linf = std::max(linf_norm(a), linf_norm(b));
    double dt = cfl_dt(nf, linf, a.dx(), a.t, ctrl);
    bool const lands = detail::reaches(a.t, dt, ctrl.t_end);
    if (lands) dt = ctrl.t_end - a.t;
    State na = step(a, dt, kernel, ws, ctrl.source_sign, n);
    State nb = step(b, dt, kernel, ws, ctrl.source_sign, n);
    if (lands) na.t = nb.t = ctrl.t_end;
    PairStepRecord const record{n, dt, a, na, b, nb};
    for (auto const& observer : observers) observer(record);
    stats.add(dt);
    ++n;
    out.first.snapshots.push_back(na);
    out.second.snapshots.push_back(nb);
    a = std::move(na);
    b = std::move(nb);
  }
  stats.store(out.first);
  stats.store(out.second);
  return out;
}

}  // namespace ohflux
