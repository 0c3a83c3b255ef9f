#pragma once

// Brute-force evaluation of the coin inequality on a uniform grid.

#include <cmath>

#include "mdiqkd/phase_error.hpp"

namespace mdiqkd::validation {

/// Both sides of the coin inequality, written out independently of the solver.
inline double coin_gap(const CoinInputs& in, double e) {
  const double lhs = in.p_Zac * (1.0 - in.dev_sb / in.n_sb) * (1.0 - 2.0 * in.delta_coin);
  const double a = (in.err_X + in.dev_err_X) / in.n_X;
  const double b = (in.n_X - in.err_X + in.dev_ok_X) / in.n_X;
  const double first = a * (e + in.dev_err_Z / in.n_Z);
  const double second = (b > 0.0 ? b : 0.0) * (1.0 - e + in.dev_ok_Z / in.n_Z);
  return std::sqrt(first > 0.0 ? first : 0.0) + std::sqrt(second > 0.0 ? second : 0.0) - lhs;
}

struct GridBound {
  double e = 1.0;
  bool vacuous = true;
};

/// Largest grid point in [0, 1] with a non-negative gap; vacuous when the whole grid is feasible or none is.
inline GridBound coin_grid_bound(const CoinInputs& in, int points) {
  GridBound out;
  int last = -1, feasible = 0;
  for (int k = 0; k < points; ++k) {
    const double e = static_cast<double>(k) / (points - 1);
    if (coin_gap(in, e) >= 0.0) {
      last = k;
      ++feasible;
    }
  }
  if (last < 0 || feasible == points) return out;
  out.e = static_cast<double>(last) / (points - 1);
  out.vacuous = false;
  return out;
}

}  // namespace mdiqkd::validation
