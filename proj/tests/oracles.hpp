#pragma once

// Independent reference implementations used only by tests. They follow the
// defining formulas literally (1-based indices, O(N^2) sums, extended
// precision) and share no code with the library's update path.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

/// P_j = dx (sum_{i=1}^{j-1} u_i + u_j/2) - dx^2 sum_{l=1}^N (sum_{i=1}^{l-1} u_i + u_l/2),
/// evaluated by literal double summation in long double.
inline std::vector<double> brute_force_source(std::vector<double> const& u0based, double dx) {
  std::size_t const n = u0based.size();
  auto u = [&](std::size_t j) { return static_cast<long double>(u0based[j - 1]); };
  auto inner = [&](std::size_t j) {
    long double s = 0.0L;
    for (std::size_t i = 1; i <= j - 1; ++i) s += u(i);
    return s + 0.5L * u(j);
  };
  long double outer = 0.0L;
  for (std::size_t l = 1; l <= n; ++l) outer += inner(l);
  long double const ldx = dx;
  std::vector<double> p(n);
  for (std::size_t j = 1; j <= n; ++j) p[j - 1] = static_cast<double>(ldx * inner(j) - ldx * ldx * outer);
  return p;
}

/// Closed-form Engquist-Osher flux for f = u^2/2 exp(sin 2 pi x).
inline double eo_flux(double x, double u, double v) {
  double const a = u > 0.0 ? u : 0.0;
  double const b = v < 0.0 ? v : 0.0;
  return 0.5 * std::exp(std::sin(2.0 * std::numbers::pi * x)) * (a * a + b * b);
}

/// One step of u_j - lambda (F_{j+1/2} - F_{j-1/2}) + dt P_j written out with
/// ghost cells u_0 = u_N, u_{N+1} = u_1 and faces x_{j+1/2} = j dx.
inline std::vector<double> straight_line_step(std::vector<double> const& u0based, double dt) {
  std::size_t const n = u0based.size();
  double const dx = 1.0 / static_cast<double>(n);
  std::vector<double> ext(n + 2);
  for (std::size_t j = 1; j <= n; ++j) ext[j] = u0based[j - 1];
  ext[0] = ext[n];
  ext[n + 1] = ext[1];
  std::vector<double> const p = brute_force_source(u0based, dx);
  std::vector<double> out(n);
  double const lambda = dt / dx;
  for (std::size_t j = 1; j <= n; ++j) {
    double const f_right = eo_flux(static_cast<double>(j) * dx, ext[j], ext[j + 1]);
    double const f_left = eo_flux(static_cast<double>(j - 1) * dx, ext[j - 1], ext[j]);
    out[j - 1] = ext[j] - lambda * (f_right - f_left) + dt * p[j - 1];
  }
  return out;
}

/// Uniform random values in [-amp, amp] shifted to exact-as-possible zero mean.
inline std::vector<double> random_zero_mean(std::size_t n, std::mt19937_64& rng, double amp = 1.0) {
  std::uniform_real_distribution<double> dist(-amp, amp);
  std::vector<double> u(n);
  long double sum = 0.0L;
  for (auto& v : u) {
    v = dist(rng);
    sum += v;
  }
  double const mean = static_cast<double>(sum / static_cast<long double>(n));
  for (auto& v : u) v -= mean;
  return u;
}

}  // namespace oracle
