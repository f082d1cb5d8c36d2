#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ohflux/errors.hpp"
#include "ohflux/grid.hpp"

namespace ohflux {

/// Cell averages u_1..u_N at time t (stored 0-based).
struct State {
  Grid grid;
  double t = 0.0;
  std::vector<double> u;

  explicit State(Grid g, double time = 0.0) : grid(g), t(time), u(g.size(), 0.0) {}
  State(Grid g, double time, std::vector<double> values) : grid(g), t(time), u(std::move(values)) {
    if (u.size() != grid.size())
      throw InputError("state has " + std::to_string(u.size()) + " values for a grid of " +
                       std::to_string(grid.size()) + " cells");
  }

  std::size_t size() const noexcept { return u.size(); }
  double dx() const noexcept { return grid.dx(); }

  bool all_finite() const {
    return std::all_of(u.begin(), u.end(), [](double v) { return std::isfinite(v); });
  }
};

/// Periodic initial datum u0 on [0,1] with zero mean.
struct InitialProfile {
  std::string name;
  std::function<double(double)> eval;
  /// (1/(b-a)) * int_a^b u0, when a closed form is available.
  std::function<double(double a, double b)> exact_cell_average;
};

namespace detail {

// 5-point Gauss-Legendre nodes/weights on [-1,1].
inline constexpr std::array<double, 5> gl5_nodes = {
    -0.906179845938663992797626878299, -0.538469310105683091036314420700, 0.0,
    0.538469310105683091036314420700, 0.906179845938663992797626878299};
inline constexpr std::array<double, 5> gl5_weights = {
    0.236926885056189087514264040720, 0.478628670499366468041291514836,
    0.568888888888888888888888888889, 0.478628670499366468041291514836,
    0.236926885056189087514264040720};

inline double gauss5_average(std::function<double(double)> const& f, double a, double b) {
  double const mid = 0.5 * (a + b);
  double const half = 0.5 * (b - a);
  double sum = 0.0;
  for (std::size_t q = 0; q < 5; ++q) sum += gl5_weights[q] * f(mid + half * gl5_nodes[q]);
  return 0.5 * sum;
}

}  // namespace detail

/// u0_j = (1/dx) * int over cell j of u0. Uses the profile's exact average
/// when present, else 5-point Gauss-Legendre per cell.
inline State cell_average_init(InitialProfile const& profile, Grid const& grid) {
  State s(grid, 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double const a = grid.face(i);
    double const b = grid.face(i + 1);
    double const avg = profile.exact_cell_average ? profile.exact_cell_average(a, b)
                                                  : detail::gauss5_average(profile.eval, a, b);
    if (!std::isfinite(avg))
      throw InputError("profile '" + profile.name + "' is not finite on cell " +
                       std::to_string(i));
    s.u[i] = avg;
  }
  return s;
}

inline double l1_norm(State const& s) {
  double sum = 0.0;
  for (double v : s.u) sum += std::abs(v);
  return s.dx() * sum;
}

inline double linf_norm(std::span<double const> u) {
  double m = 0.0;
  for (double v : u) m = std::max(m, std::abs(v));
  return m;
}

inline double linf_norm(State const& s) { return linf_norm(std::span<double const>(s.u)); }

/// Periodic total variation sum_j |u_j - u_{j-1}| with u_0 = u_N.
inline double bv_seminorm(std::span<double const> u) {
  if (u.empty()) return 0.0;
  double sum = std::abs(u.front() - u.back());
  for (std::size_t i = 1; i < u.size(); ++i) sum += std::abs(u[i] - u[i - 1]);
  return sum;
}

inline double bv_seminorm(State const& s) { return bv_seminorm(std::span<double const>(s.u)); }

/// dx * sum_j u_j.
inline double mean_value(State const& s) {
  double sum = 0.0;
  for (double v : s.u) sum += v;
  return s.dx() * sum;
}

/// Block-average a fine state onto a coarser grid.
inline State restrict(State const& fine, Grid const& coarse) {
  std::size_t const nf = fine.size();
  std::size_t const nc = coarse.size();
  if (nf % nc != 0)
    throw InputError("cannot restrict " + std::to_string(nf) + " cells onto " +
                     std::to_string(nc) + ": not divisible");
  std::size_t const ratio = nf / nc;
  State out(coarse, fine.t);
  for (std::size_t i = 0; i < nc; ++i) {
    double sum = 0.0;
    for (std::size_t k = 0; k < ratio; ++k) sum += fine.u[i * ratio + k];
    out.u[i] = sum / static_cast<double>(ratio);
  }
  return out;
}

/// Shortest round-trip-exact text with 17 significant digits.
inline std::string format_real(double v) {
  std::array<char, 64> buf{};
  auto const res = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                 std::chars_format::general, 17);
  return std::string(buf.data(), res.ptr);
}

/// Snapshot CSV: header `x,u`, one row per cell center, LF endings.
inline void write_snapshot_csv(State const& s, std::filesystem::path const& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  out << "x,u\n";
  for (std::size_t i = 0; i < s.size(); ++i)
    out << format_real(s.grid.center(i)) << ',' << format_real(s.u[i]) << '\n';
  if (!out) throw InputError("write failed for '" + path.string() + "'");
}

}  // namespace ohflux
