#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "ohflux/errors.hpp"
#include "ohflux/grid.hpp"

namespace ohflux {

using PointFunction = std::function<double(double x, double u)>;

/// Space-dependent flux f(x,u), periodic in x, with its partial derivatives.
struct FluxModel {
  std::string name;
  PointFunction value;
  PointFunction d_dx;
  PointFunction d_du;
  // Second partials; only needed for the total-variation bound constant.
  PointFunction d2_dxx;
  PointFunction d2_dxu;
  /// sup over x in [0,1], u in [u_min,u_max] of |f_u(x,u)|.
  std::function<double(double u_min, double u_max)> lipschitz_box;
  /// True when sign f_u(x,u) depends on u only. Then at most one of the
  /// upwind halves of the Engquist-Osher flux is active at any state, which
  /// halves the stability bound.
  bool du_sign_x_independent = false;
  /// Closed-form Engquist-Osher flux, when known.
  std::function<double(double x, double u, double v)> engquist_osher;
};

/// f(x,u) = u^2/2 * exp(sin(2 pi x)).
inline FluxModel builtin_oh_flux() {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  FluxModel m;
  m.name = "oh_builtin";
  m.value = [](double x, double u) { return 0.5 * std::exp(std::sin(two_pi * x)) * (u * u); };
  m.d_du = [](double x, double u) { return u * std::exp(std::sin(two_pi * x)); };
  m.d_dx = [](double x, double u) {
    return std::numbers::pi * std::cos(two_pi * x) * (u * u) * std::exp(std::sin(two_pi * x));
  };
  // g = exp(sin 2 pi x): g' = 2 pi cos g, g'' = 4 pi^2 (cos^2 - sin) g.
  m.d2_dxx = [](double x, double u) {
    double const s = std::sin(two_pi * x);
    double const c = std::cos(two_pi * x);
    return 0.5 * (u * u) * two_pi * two_pi * (c * c - s) * std::exp(s);
  };
  m.d2_dxu = [](double x, double u) {
    return two_pi * std::cos(two_pi * x) * u * std::exp(std::sin(two_pi * x));
  };
  m.lipschitz_box = [](double u_min, double u_max) {
    return std::max(std::abs(u_min), std::abs(u_max)) * std::numbers::e;
  };
  m.du_sign_x_independent = true;
  // g >= 0, so u = 0 is the only sonic point.
  m.engquist_osher = [](double x, double u, double v) {
    double const up = std::max(u, 0.0);
    double const vm = std::min(v, 0.0);
    return 0.5 * std::exp(std::sin(two_pi * x)) * (up * up + vm * vm);
  };
  return m;
}

/// f(x,u) = u^2/2, the x-independent Burgers flux.
inline FluxModel burgers_flux() {
  FluxModel m;
  m.name = "burgers";
  m.value = [](double, double u) { return 0.5 * u * u; };
  m.d_du = [](double, double u) { return u; };
  m.d_dx = [](double, double) { return 0.0; };
  m.d2_dxx = [](double, double) { return 0.0; };
  m.d2_dxu = [](double, double) { return 0.0; };
  m.lipschitz_box = [](double u_min, double u_max) {
    return std::max(std::abs(u_min), std::abs(u_max));
  };
  m.du_sign_x_independent = true;
  m.engquist_osher = [](double, double u, double v) {
    double const up = std::max(u, 0.0);
    double const vm = std::min(v, 0.0);
    return 0.5 * (up * up + vm * vm);
  };
  return m;
}

inline std::vector<std::string> model_names() { return {"burgers", "oh_builtin"}; }

inline FluxModel model_by_name(std::string const& name) {
  if (name == "oh_builtin") return builtin_oh_flux();
  if (name == "burgers") return burgers_flux();
  throw ConfigError("unknown flux model '" + name + "'");
}

enum class FluxKind { EngquistOsher, LaxFriedrichs };

inline char const* to_string(FluxKind kind) {
  return kind == FluxKind::EngquistOsher ? "eo" : "lf";
}

/// Writes the numerical flux at every face of a grid for a given state.
/// out[i] is the flux at face i (x = i*dx) between cells i-1 and i, with
/// periodic wrap for i = 0. Faces 0 and N are the same periodic face.
using FaceKernel = std::function<void(std::span<double const> u, std::span<double> out)>;

/// Two-point numerical flux F(x,u,v) with the data needed to pick a stable
/// time step.
class NumericalFlux {
 public:
  using Eval = std::function<double(double x, double u, double v)>;
  using Bound = std::function<double(double m)>;
  using Admissible = std::function<std::optional<std::string>(double m)>;
  using Binder = std::function<FaceKernel(Grid const&)>;

  NumericalFlux(FluxKind kind, Eval eval, Bound wave_bound, Admissible admissible = {},
                Binder binder = {})
      : kind_(kind),
        eval_(std::move(eval)),
        wave_bound_(std::move(wave_bound)),
        admissible_(std::move(admissible)),
        binder_(std::move(binder)) {}

  FluxKind kind() const noexcept { return kind_; }

  double operator()(double x, double u, double v) const { return eval_(x, u, v); }

  /// Bound B with sup F_u + sup |F_v| <= B over states with |u|,|v| <= m;
  /// the update is monotone when dt * B <= dx.
  double wave_bound(double m) const { return wave_bound_(m); }

  /// Reason the flux is not monotone on [-m,m], if any.
  std::optional<std::string> inadmissible_reason(double m) const {
    return admissible_ ? admissible_(m) : std::nullopt;
  }

  /// Kernel evaluating all faces of `grid` at once. Position-dependent
  /// factors may be precomputed; results match operator() bit for bit.
  FaceKernel bind(Grid const& grid) const {
    if (binder_) return binder_(grid);
    return [eval = eval_, grid](std::span<double const> u, std::span<double> out) {
      std::size_t const n = grid.size();
      out[0] = eval(grid.face(0), u[n - 1], u[0]);
      for (std::size_t i = 1; i < n; ++i) out[i] = eval(grid.face(i), u[i - 1], u[i]);
    };
  }

 private:
  FluxKind kind_;
  Eval eval_;
  Bound wave_bound_;
  Admissible admissible_;
  Binder binder_;
};

namespace detail {

/// int_a^b clamp(f_u(s)) ds, clamp = max(.,0) or min(.,0). The interval is cut
/// at sign changes of f_u so that each Gauss-Kronrod panel sees a smooth integrand.
inline double integrate_clamped(std::function<double(double)> const& fu, bool positive, double a,
                                double b, double x, double u, double v) {
  if (a == b) return 0.0;
  constexpr int kScan = 32;
  std::vector<double> cuts = {a};
  double s_prev = a;
  double f_prev = fu(a);
  for (int i = 1; i <= kScan; ++i) {
    double const s = i == kScan ? b : a + (b - a) * static_cast<double>(i) / kScan;
    double const f = fu(s);
    if ((f_prev < 0.0 && f > 0.0) || (f_prev > 0.0 && f < 0.0)) {
      std::uintmax_t iters = 100;
      auto const lo = std::min(s_prev, s);
      auto const hi = std::max(s_prev, s);
      auto const root = boost::math::tools::toms748_solve(fu, lo, hi, boost::math::tools::eps_tolerance<double>(52),
                                                          iters);
      cuts.push_back(0.5 * (root.first + root.second));
    }
    s_prev = s;
    f_prev = f;
  }
  cuts.push_back(b);

  auto const clamped = [&](double s) { return positive ? std::max(fu(s), 0.0) : std::min(fu(s), 0.0); };
  double total = 0.0;
  double error = 0.0;
  double l1 = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i] == cuts[i + 1]) continue;
    double e = 0.0;
    double m = 0.0;
    total += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(clamped, cuts[i], cuts[i + 1], 15,
                                                                           1e-13, &e, &m);
    error += e;
    l1 += m;
  }
  if (!std::isfinite(total) || error > 1e-12 * std::max(1.0, l1)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "Engquist-Osher quadrature failed at (x, u, v) = (" << x << ", " << u << ", " << v
        << "), error estimate " << error;
    throw QuadratureError(msg.str());
  }
  return total;
}

}  // namespace detail

/// Engquist-Osher flux. Uses the model's closed form when registered, else
/// F = f(x,0) + int_0^u max(f_u,0) ds + int_0^v min(f_u,0) ds by adaptive
/// Gauss-Kronrod quadrature.
inline NumericalFlux engquist_osher(FluxModel const& model) {
  if (!model.d_du) throw ConfigError("Engquist-Osher flux needs d_du for model " + model.name);

  NumericalFlux::Eval eval;
  if (model.engquist_osher) {
    eval = model.engquist_osher;
  } else {
    eval = [value = model.value, du = model.d_du](double x, double u, double v) {
      std::function<double(double)> const fu = [&](double s) { return du(x, s); };
      return value(x, 0.0) + detail::integrate_clamped(fu, true, 0.0, u, x, u, v) +
             detail::integrate_clamped(fu, false, 0.0, v, x, u, v);
    };
  }

  double const factor = model.du_sign_x_independent ? 1.0 : 2.0;
  NumericalFlux::Bound bound = [lip = model.lipschitz_box, factor](double m) {
    return factor * lip(-m, m);
  };

  NumericalFlux::Binder binder;
  if (model.name == "oh_builtin" && model.engquist_osher) {
    binder = [](Grid const& grid) -> FaceKernel {
      std::vector<double> g(grid.size());
      for (std::size_t f = 0; f < g.size(); ++f)
        g[f] = std::exp(std::sin(2.0 * std::numbers::pi * grid.face(f)));
      return [g = std::move(g)](std::span<double const> u, std::span<double> out) {
        std::size_t const n = g.size();
        auto const face = [&](std::size_t f, double l, double r) {
          double const up = std::max(l, 0.0);
          double const vm = std::min(r, 0.0);
          return 0.5 * g[f] * (up * up + vm * vm);
        };
        out[0] = face(0, u[n - 1], u[0]);
        for (std::size_t i = 1; i < n; ++i) out[i] = face(i, u[i - 1], u[i]);
      };
    };
  }
  return NumericalFlux(FluxKind::EngquistOsher, std::move(eval), std::move(bound), {},
                       std::move(binder));
}

/// Lax-Friedrichs flux F = (f(x,u) + f(x,v))/2 - alpha/2 (v - u). Monotone on
/// states where alpha >= |f_u|.
inline NumericalFlux lax_friedrichs(FluxModel const& model, double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw ConfigError("Lax-Friedrichs alpha must be positive, got " + std::to_string(alpha));
  auto eval = [value = model.value, alpha](double x, double u, double v) {
    return 0.5 * (value(x, u) + value(x, v)) - 0.5 * alpha * (v - u);
  };
  auto bound = [lip = model.lipschitz_box, alpha](double m) { return alpha + lip(-m, m); };
  auto admissible = [lip = model.lipschitz_box,
                     alpha](double m) -> std::optional<std::string> {
    double const l = lip(-m, m);
    if (alpha >= l) return std::nullopt;
    return "Lax-Friedrichs alpha = " + std::to_string(alpha) +
           " is below the Lipschitz bound " + std::to_string(l) + " on [-" +
           std::to_string(m) + ", " + std::to_string(m) + "]";
  };
  return NumericalFlux(FluxKind::LaxFriedrichs, std::move(eval), std::move(bound),
                       std::move(admissible));
}

/// Look up a numerical flux by config name ("eo" or "lf"). LF uses `lf_alpha`
/// when given, else the model's Lipschitz bound on [-alpha_box, alpha_box].
inline NumericalFlux flux_by_name(std::string const& name, FluxModel const& model,
                                  std::optional<double> lf_alpha = std::nullopt,
                                  double alpha_box = 1.0) {
  if (name == "eo") return engquist_osher(model);
  if (name == "lf") return lax_friedrichs(model, lf_alpha ? *lf_alpha : model.lipschitz_box(-alpha_box, alpha_box));
  throw ConfigError("unknown numerical flux '" + name + "' (expected eo or lf)");
}

/// Sample lattice for flux conformance checks.
struct SampleSpec {
  std::vector<double> x;
  double u_min = -1.0;
  double u_max = 1.0;
  std::size_t u_points = 101;

  /// `nx` equispaced x in [0,1] and `nu` equispaced u in [u_min,u_max].
  static SampleSpec uniform(std::size_t nx, std::size_t nu, double u_min = -1.0,
                            double u_max = 1.0) {
    SampleSpec s;
    s.x.resize(nx);
    for (std::size_t i = 0; i < nx; ++i)
      s.x[i] = nx > 1 ? static_cast<double>(i) / static_cast<double>(nx - 1) : 0.0;
    s.u_min = u_min;
    s.u_max = u_max;
    s.u_points = nu;
    return s;
  }

  double u_at(std::size_t k) const {
    if (u_points < 2) return u_min;
    return u_min + (u_max - u_min) * static_cast<double>(k) / static_cast<double>(u_points - 1);
  }
};

struct ConsistencyReport {
  double max_deviation = 0.0;  // max |F(x,u,u) - f(x,u)| / (1 + |f(x,u)|)
  double x = 0.0;
  double u = 0.0;
};

inline ConsistencyReport check_consistency(NumericalFlux const& nf, FluxModel const& model,
                                           SampleSpec const& samples) {
  ConsistencyReport r;
  for (double x : samples.x) {
    for (std::size_t k = 0; k < samples.u_points; ++k) {
      double const u = samples.u_at(k);
      double const f = model.value(x, u);
      double const dev = std::abs(nf(x, u, u) - f) / (1.0 + std::abs(f));
      if (dev > r.max_deviation) r = {dev, x, u};
    }
  }
  return r;
}

struct MonotonicityReport {
  std::size_t violations = 0;
  /// Most negative signed divided difference seen (0 when none).
  double worst = 0.0;
  double x = 0.0;
  double u = 0.0;
  double v = 0.0;
  bool ok() const noexcept { return violations == 0; }
};

/// Checks u -> F(x,u,v) nondecreasing and v -> F(x,u,v) nonincreasing between
/// adjacent lattice points, allowing `tolerance` of rounding.
inline MonotonicityReport check_monotonicity(NumericalFlux const& nf, SampleSpec const& samples,
                                             double tolerance = 1e-13) {
  MonotonicityReport r;
  auto record = [&](double diff, double x, double u, double v) {
    if (diff < -tolerance) {
      ++r.violations;
      if (diff < r.worst) {
        r.worst = diff;
        r.x = x;
        r.u = u;
        r.v = v;
      }
    }
  };
  std::size_t const n = samples.u_points;
  std::vector<double> row(n * n);
  for (double x : samples.x) {
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) row[a * n + b] = nf(x, samples.u_at(a), samples.u_at(b));
    for (std::size_t a = 0; a + 1 < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        // increasing in u: F(u_{a+1}, v_b) - F(u_a, v_b) >= 0
        record(row[(a + 1) * n + b] - row[a * n + b], x, samples.u_at(a), samples.u_at(b));
        // decreasing in v: F(u_b, v_a) - F(u_b, v_{a+1}) >= 0
        record(row[b * n + a] - row[b * n + a + 1], x, samples.u_at(b), samples.u_at(a));
      }
    }
  }
  return r;
}

}  // namespace ohflux
