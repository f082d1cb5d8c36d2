#pragma once

#include <cstddef>

#include "ohflux/errors.hpp"

namespace ohflux {

/// Uniform periodic mesh on [0,1] with N cells of width 1/N.
///
/// Cells are indexed 0..N-1; cell i covers [i*dx, (i+1)*dx). Face f sits at
/// f*dx for f = 0..N, so face i is the left face of cell i and faces 0 and N
/// coincide under periodicity.
class Grid {
 public:
  explicit Grid(std::size_t n) : n_(n), dx_(n > 0 ? 1.0 / static_cast<double>(n) : 0.0) {
    if (n < 2) throw InputError("grid needs at least 2 cells, got " + std::to_string(n));
  }

  std::size_t size() const noexcept { return n_; }
  double dx() const noexcept { return dx_; }
  double center(std::size_t i) const noexcept { return (static_cast<double>(i) + 0.5) * dx_; }
  double face(std::size_t f) const noexcept { return static_cast<double>(f) * dx_; }

  friend bool operator==(Grid const&, Grid const&) = default;

 private:
  std::size_t n_;
  double dx_;
};

}  // namespace ohflux
