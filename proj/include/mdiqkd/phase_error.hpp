#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mdiqkd/channel_sim.hpp"
#include "mdiqkd/decoy_lp.hpp"
#include "mdiqkd/model_core.hpp"
#include "mdiqkd/tha_distance.hpp"

namespace mdiqkd {

enum class PhasePath { Serfling, QuantumCoin };

inline const char* to_string(PhasePath p) { return p == PhasePath::Serfling ? "serfling" : "coin"; }

struct PhaseErrorEstimate {
  double e_ph_U = 1.0;
  double eps_ph11 = 0.0;
  PhasePath path = PhasePath::Serfling;
  bool vacuous = false;
  /// Phase-error count bound N^U_{X-error,11,ss|Z}.
  double x_U = 0.0;
  double delta_coin = 0.0;
};

/// Coin path applies only when the PM reflection carries phase information.
inline PhasePath phase_path(const ThaConfig& tha) {
  return tha.pm_leaks() ? PhasePath::QuantumCoin : PhasePath::Serfling;
}

inline int phase_invocations(PhasePath path) { return path == PhasePath::Serfling ? 1 : 5; }

inline PhaseErrorEstimate eph_serfling(double n11_Z_L, double n11_X_L, double err11_X_U, double eps_prime) {
  if (!(n11_Z_L > 0.0) || !(n11_X_L > 0.0)) throw std::domain_error("eph_serfling: single-photon counts must be positive");
  PhaseErrorEstimate out;
  out.path = PhasePath::Serfling;
  const double ups = eps_prime >= 1.0 ? 0.0 : serfling_upsilon(n11_Z_L, n11_X_L, eps_prime);
  const double e = err11_X_U / n11_X_L + (n11_Z_L + n11_X_L) / n11_Z_L * ups;
  out.e_ph_U = std::min(e, 1.0);
  out.x_U = out.e_ph_U * n11_Z_L;
  return out;
}

/// Inputs of the coin inequality, all counts.
struct CoinInputs {
  double n_sb = 0.0;      // same-basis single-photon clicks
  double n_Z = 0.0;       // key-basis single-photon clicks
  double n_X = 0.0;       // test-basis single-photon clicks
  double err_X = 0.0;     // test-basis single-photon errors
  double delta_coin = 0.0;
  double p_Zac = 1.0;
  double dev_sb = 0.0;
  double dev_err_X = 0.0;
  double dev_err_Z = 0.0;
  double dev_ok_X = 0.0;
  double dev_ok_Z = 0.0;
};

namespace detail {

inline double coin_lhs(const CoinInputs& in) {
  return in.p_Zac * (1.0 - in.dev_sb / in.n_sb) * (1.0 - 2.0 * in.delta_coin);
}

/// Right-hand side at phase-error rate e = x / n_Z.
inline double coin_rhs(const CoinInputs& in, double e) {
  const double a = (in.err_X + in.dev_err_X) / in.n_X;
  const double b = std::max(0.0, (in.n_X - in.err_X + in.dev_ok_X) / in.n_X);
  const double t1 = a * (e + in.dev_err_Z / in.n_Z);
  const double t2 = b * (1.0 - e + in.dev_ok_Z / in.n_Z);
  return std::sqrt(std::max(t1, 0.0)) + std::sqrt(std::max(t2, 0.0));
}

}  // namespace detail

/// Whether phase-error rate e is consistent with the coin inequality.
inline bool coin_feasible(const CoinInputs& in, double e) {
  return detail::coin_rhs(in, e) >= detail::coin_lhs(in);
}

/// Largest e in [0,1] with LHS <= RHS(e): dense scan, then bisection on the last sign change.
inline PhaseErrorEstimate solve_coin(const CoinInputs& in) {
  if (!(in.n_Z > 0.0) || !(in.n_X > 0.0) || !(in.n_sb > 0.0))
    throw std::domain_error("solve_coin: single-photon counts must be positive");
  PhaseErrorEstimate out;
  out.path = PhasePath::QuantumCoin;
  out.delta_coin = in.delta_coin;
  const double lhs = detail::coin_lhs(in);
  auto g = [&](double e) { return detail::coin_rhs(in, e) - lhs; };
  if (lhs <= 0.0) {
    out.vacuous = true;
    out.e_ph_U = 1.0;
    out.x_U = in.n_Z;
    return out;
  }
  constexpr int kScan = 1024;
  int last = -1;
  for (int k = 0; k < kScan; ++k)
    if (g(static_cast<double>(k) / (kScan - 1)) >= 0.0) last = k;
  double lo = static_cast<double>(last) / (kScan - 1);
  double hi = static_cast<double>(last + 1) / (kScan - 1);
  if (last < 0) {
    // The right-hand side is concave in e: a feasible set narrower than the scan step sits around its peak.
    double a = 0.0, b = 1.0;
    for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
      const double m1 = a + (b - a) / 3.0, m2 = b - (b - a) / 3.0;
      if (g(m1) < g(m2))
        a = m1;
      else
        b = m2;
    }
    const double peak = 0.5 * (a + b);
    if (g(peak) >= 0.0) {
      lo = peak;
      hi = std::min(1.0, (std::floor(peak * (kScan - 1)) + 1.0) / (kScan - 1));
      last = 0;
    }
  }
  if (last == kScan - 1 || last < 0) {
    // Whole range feasible, or no point feasible: nothing better than the trivial bound.
    out.vacuous = true;
    out.e_ph_U = 1.0;
    out.x_U = in.n_Z;
    return out;
  }
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) >= 0.0)
      lo = mid;
    else
      hi = mid;
  }
  out.e_ph_U = lo;
  out.x_U = lo * in.n_Z;
  return out;
}

/// Phase-error bound for one evaluation, choosing the path from the leakage model.
inline PhaseErrorEstimate eph_dispatch(const ThaConfig& tha, const DecoyEstimates& est, const ObservedStats& stats,
                                       const ProtocolConfig& config, const EpsilonBudget& budget) {
  const PhasePath path = phase_path(tha);
  if (!(est.n11_L > 0.0) || !(est.n11_X_L > 0.0)) {
    PhaseErrorEstimate out;
    out.path = path;
    out.vacuous = true;
    out.eps_ph11 = budget.eps_ph11;
    return out;
  }
  if (path == PhasePath::Serfling) {
    auto out = eph_serfling(est.n11_L, est.n11_X_L, est.err11_X_U, budget.eps_prime);
    out.eps_ph11 = budget.eps_ph11;
    return out;
  }
  CoinInputs in;
  in.n_Z = est.n11_L;
  in.n_X = est.n11_X_L;
  in.err_X = std::min(est.err11_X_U, est.n11_X_L);
  in.n_sb = est.n11_L + est.n11_X_L;
  in.p_Zac = config.p_Zac;
  in.delta_coin = coin_imbalance(config.pZ(), config.pX(), overlap_ZX(tha, config));
  const double dev = azuma_bound(stats.total_clicks, budget.per_invocation());
  in.dev_sb = in.dev_err_X = in.dev_err_Z = in.dev_ok_X = in.dev_ok_Z = dev;
  auto out = solve_coin(in);
  out.eps_ph11 = budget.eps_ph11;
  return out;
}

}  // namespace mdiqkd
