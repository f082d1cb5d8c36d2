#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ohflux/mesh_state.hpp"

namespace ohflux {

/// Above this size partial sums use Kahan compensation.
inline constexpr std::size_t kCompensatedSumThreshold = std::size_t{1} << 12;

namespace detail {

/// Left-to-right running sum, optionally compensated.
class RunningSum {
 public:
  explicit RunningSum(bool compensated) : compensated_(compensated) {}

  void add(double v) {
    if (!compensated_) {
      sum_ += v;
      return;
    }
    double const y = v - carry_;
    double const t = sum_ + y;
    carry_ = (t - sum_) - y;
    sum_ = t;
  }

  double value() const noexcept { return sum_; }

 private:
  bool compensated_;
  double sum_ = 0.0;
  double carry_ = 0.0;
};

}  // namespace detail

/// P_j = dx (sum_{i<j} u_i + u_j/2) - dx^2 sum_l (sum_{i<l} u_i + u_l/2),
/// written into `out` (same indexing as `u`). O(N).
inline void compute_source(std::span<double const> u, double dx, std::span<double> out) {
  std::size_t const n = u.size();
  bool const compensated = n >= kCompensatedSumThreshold;
  detail::RunningSum prefix(compensated);
  detail::RunningSum total(compensated);
  for (std::size_t j = 0; j < n; ++j) {
    double const raw = prefix.value() + 0.5 * u[j];
    out[j] = raw;
    total.add(raw);
    prefix.add(u[j]);
  }
  double const shift = dx * dx * total.value();
  for (std::size_t j = 0; j < n; ++j) out[j] = dx * out[j] - shift;
}

inline std::vector<double> compute_source(State const& s) {
  std::vector<double> p(s.size());
  compute_source(s.u, s.dx(), p);
  return p;
}

struct SourceIdentityReport {
  /// max_j |(P_j - P_{j-1})/dx - (u_j + u_{j-1})/2| over j = 2..N.
  double interior_residual = 0.0;
  /// The same residual at the periodic wrap j = 1 (needs zero mean).
  double wrap_residual = 0.0;
  /// |sum_j P_j|
  double sum_residual = 0.0;
  /// max_j |P_j| / max(linf(u), tiny); at most 2.
  double bound_ratio = 0.0;
};

inline SourceIdentityReport source_identities(std::span<double const> u, std::span<double const> p,
                                              double dx) {
  SourceIdentityReport r;
  std::size_t const n = u.size();
  auto const residual = [&](std::size_t j, std::size_t jm) {
    return std::abs((p[j] - p[jm]) / dx - 0.5 * (u[j] + u[jm]));
  };
  for (std::size_t j = 1; j < n; ++j) r.interior_residual = std::max(r.interior_residual, residual(j, j - 1));
  if (n > 0) r.wrap_residual = residual(0, n - 1);
  double sum = 0.0;
  for (double v : p) sum += v;
  r.sum_residual = std::abs(sum);
  double const umax = linf_norm(u);
  r.bound_ratio = umax > 0.0 ? linf_norm(p) / umax : 0.0;
  return r;
}

inline SourceIdentityReport source_identities(State const& s, std::span<double const> p) {
  return source_identities(s.u, p, s.dx());
}

}  // namespace ohflux
