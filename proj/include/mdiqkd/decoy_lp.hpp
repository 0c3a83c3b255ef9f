#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdiqkd/channel_sim.hpp"
#include "mdiqkd/lp.hpp"
#include "mdiqkd/model_core.hpp"
#include "mdiqkd/tha_distance.hpp"

namespace mdiqkd {

enum class DecoyTarget { Min00, Min11, MaxErr11 };

/// Three-intensity objectives, named by basis.
enum class Objective3 { Min00Z, Min11Z, Min11X, MaxErr11X };

/// `Collapsed` bounds the expected photon-pair counts of the reference cell
/// directly, with a single deviation on the objective cell. `PerCell` keeps an
/// actual count and an Azuma deviation for every photon-pair cell.
enum class LpForm { Collapsed, PerCell };

/// Trial count fed to the concentration bound. `Auto` picks detected events unless the IM leaks.
enum class AzumaTrials { Auto, Rounds, Detections };

inline const char* to_string(AzumaTrials t) {
  return t == AzumaTrials::Auto ? "auto" : t == AzumaTrials::Rounds ? "rounds" : "detections";
}

struct DecoyLpOptions {
  LpForm form = LpForm::PerCell;
  /// Drop every Azuma deviation: the asymptotic decoy system.
  bool zero_deviations = false;
  AzumaTrials trials = AzumaTrials::Auto;
};

/// Replaces `Auto` with the concrete trial count for this leakage model.
inline DecoyLpOptions resolve_trials(DecoyLpOptions options, const ThaConfig& tha) {
  if (options.trials == AzumaTrials::Auto) options.trials = tha.active() ? AzumaTrials::Rounds : AzumaTrials::Detections;
  return options;
}

/// Detected events of one basis, summed over intensity pairs.
inline double detected_in_basis(const ObservedStats& stats, Basis basis) {
  double total = 0.0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      if (stats.present[a][b][static_cast<int>(basis)]) total += stats.N_click[a][b][static_cast<int>(basis)];
  return total;
}

/// Number of concentration-bound invocations consumed by the decoy estimators.
inline int decoy_invocations(Variant variant, LpForm form, int S_cut) {
  const int cells = (S_cut + 1) * (S_cut + 1);
  const int family = 9 * 2;
  if (variant == Variant::ThreeIntensity) {
    if (form == LpForm::Collapsed) return (family + 2) + (family + 1) + (family + 1);
    return 3 * (family + 2 * cells);
  }
  const int x_click = form == LpForm::Collapsed ? family + 2 : family + 2 * cells;
  const int x_error = form == LpForm::Collapsed ? family + 1 : family + 2 * cells;
  return x_click + x_error + 4;
}

/// Splits eps_total uniformly and fills the per-estimator failure probabilities.
inline EpsilonBudget plan_budget(EpsilonBudget base, Variant variant, LpForm form, int S_cut, int phase_invocations) {
  base.validate();
  const int decoy = decoy_invocations(variant, form, S_cut);
  base.invocations = decoy + phase_invocations;
  const double u = base.per_invocation();
  const int cells = (S_cut + 1) * (S_cut + 1);
  const int family = 18;
  if (form == LpForm::Collapsed) {
    if (variant == Variant::ThreeIntensity) {
      base.eps_Z00 = (family + 1) * u;
      base.eps_Z11 = (family + 1) * u;
    } else {
      base.eps_Z00 = (family + 1 + 2) * u;
      base.eps_Z11 = (family + 1 + 2) * u;
    }
    base.eps_X11 = (family + 1) * u;
    base.eps_EX11 = (family + 1) * u;
  } else {
    const double lp = (family + 2 * cells) * u;
    base.eps_Z00 = variant == Variant::ThreeIntensity ? lp : lp + 2 * u;
    base.eps_Z11 = base.eps_Z00;
    base.eps_X11 = lp;
    base.eps_EX11 = lp;
  }
  base.eps_prime = u;
  base.eps_ph11 = phase_invocations * u + base.eps_X11 + base.eps_EX11;
  base.eps_other = 0.0;
  return base;
}

namespace detail {

inline void require_cells(const ObservedStats& stats, Basis basis, const ProtocolConfig& config) {
  for (Intensity a : config.intensities(basis))
    for (Intensity b : config.intensities(basis))
      if (!stats.has(a, b, basis))
        throw std::invalid_argument(std::string("missing observed cell ") + to_string(a) + to_string(b) + "|" +
                                    to_string(basis));
}

inline std::string cell_name(const char* prefix, int n, int m) {
  return std::string(prefix) + "_" + std::to_string(n) + "_" + std::to_string(m);
}

}  // namespace detail

/// Leakage-perturbed decoy LP for one basis, normalized by N_chi.
///
/// Rows, for every intensity pair (a, b):
///   obs_ab - q_a q_b T_ab <= sum_nm r_nm E_nm + Lambda_ab - delta_ab <= obs_ab
/// with r_nm = q_a q_b p_n^a p_m^b / (q_r^2 p_n^r p_m^r), |Lambda_ab| <= q_a q_b D_ab,
/// |delta_ab| <= f(N_chi, eps)/N_chi and E_nm in [0, q_r^2 p_n^r p_m^r].
inline LpInstance build_decoy_lp(const ObservedStats& stats, Basis basis, const TraceDistanceSet& D,
                                 const ProtocolConfig& config, double eps_each, DecoyTarget target,
                                 const DecoyLpOptions& options = {}) {
  detail::require_cells(stats, basis, config);
  const double Nchi = stats.N_chi[static_cast<int>(basis)];
  if (!(Nchi > 0.0)) throw std::invalid_argument("decoy LP needs a positive basis-matched round count");
  const Intensity ref = D.ref;
  const double q_ref = config.prob_in_basis(ref, basis);
  if (!(q_ref > 0.0)) throw std::invalid_argument(std::string("reference intensity ") + to_string(ref) + " has zero probability");
  const bool errors = target == DecoyTarget::MaxErr11;
  const double trials = options.trials == AzumaTrials::Detections ? detected_in_basis(stats, basis) : Nchi;
  const double dev = options.zero_deviations ? 0.0 : azuma_bound(trials, eps_each) / Nchi;
  const int S = config.S_cut;
  const int obj_n = target == DecoyTarget::Min00 ? 0 : 1;

  LpInstance lp;
  lp.sense = errors ? LpSense::Maximize : LpSense::Minimize;

  std::vector<double> pref(S + 1);
  for (int n = 0; n <= S; ++n) pref[n] = poisson_pmf(n, config.gamma(ref));

  // Expected reference-cell terms E_nm = N_nm + delta_nm.
  std::vector<std::vector<std::pair<int, double>>> cell_terms(static_cast<std::size_t>(S + 1) * (S + 1));
  for (int n = 0; n <= S; ++n)
    for (int m = 0; m <= S; ++m) {
      const double box = q_ref * q_ref * pref[n] * pref[m];
      auto& terms = cell_terms[n * (S + 1) + m];
      const bool is_obj = n == obj_n && m == obj_n;
      if (options.form == LpForm::Collapsed) {
        terms.push_back({lp.add_var(detail::cell_name("E", n, m), 0.0, box, is_obj ? 1.0 : 0.0), 1.0});
      } else {
        terms.push_back({lp.add_var(detail::cell_name("N", n, m), 0.0, box, is_obj ? 1.0 : 0.0), 1.0});
        terms.push_back({lp.add_var(detail::cell_name("dcell", n, m), -dev, dev), 1.0});
      }
    }
  if (options.form == LpForm::Collapsed) {
    // Actual objective-cell count: E - delta for a lower bound, E + delta for an upper bound.
    lp.add_var("dobj", -dev, dev, errors ? 1.0 : -1.0);
  }

  for (Intensity a : config.intensities(basis))
    for (Intensity b : config.intensities(basis)) {
      const double qa = config.prob_in_basis(a, basis), qb = config.prob_in_basis(b, basis);
      if (qa * qb == 0.0) continue;
      const std::string pair = std::string(to_string(a)) + to_string(b);
      LpInstance::Row row;
      row.name = "pair_" + pair;
      for (int n = 0; n <= S; ++n) {
        const double pa = poisson_pmf(n, config.gamma(a));
        if (pa == 0.0) continue;
        for (int m = 0; m <= S; ++m) {
          const double pb = poisson_pmf(m, config.gamma(b));
          if (pb == 0.0) continue;
          const double r = (qa * qb * pa * pb) / (q_ref * q_ref * pref[n] * pref[m]);
          for (auto [j, c] : cell_terms[n * (S + 1) + m]) row.terms.push_back({j, r * c});
        }
      }
      row.terms.push_back({lp.add_var("d_" + pair, -dev, dev), -1.0});
      const double Dab = (a == ref && b == ref) ? 0.0 : D.at(a, b);
      if (Dab > 0.0) {
        const double lam = qa * qb * Dab;
        row.terms.push_back({lp.add_var("L_" + pair, -lam, lam), 1.0});
      }
      const double obs = (errors ? stats.error(a, b, basis) : stats.click(a, b, basis)) / Nchi;
      const double tail = qa * qb * tail_term(config.gamma(a), config.gamma(b), S);
      row.hi = obs;
      row.lo = obs - tail;
      lp.rows.push_back(std::move(row));
    }
  return lp;
}

inline LpInstance build_lp_3int(const ObservedStats& stats, const TraceDistanceSet& D, const ProtocolConfig& config,
                                const EpsilonBudget& budget, Objective3 objective, const DecoyLpOptions& options = {}) {
  if (config.variant != Variant::ThreeIntensity) throw std::invalid_argument("build_lp_3int needs a three-intensity config");
  const Basis basis = (objective == Objective3::Min00Z || objective == Objective3::Min11Z) ? Basis::Z : Basis::X;
  const DecoyTarget target = objective == Objective3::Min00Z    ? DecoyTarget::Min00
                             : objective == Objective3::MaxErr11X ? DecoyTarget::MaxErr11
                                                                  : DecoyTarget::Min11;
  return build_decoy_lp(stats, basis, D, config, budget.per_invocation(), target, options);
}

struct LpSolve {
  double value = 0.0;  // counts, rescaled by N_chi
  LpStatus status = LpStatus::Optimal;
};

inline LpSolve solve_decoy_lp(const LpInstance& lp, double Nchi) {
  const auto r = solve_lp(lp);
  LpSolve out;
  out.status = r.status;
  if (r.status == LpStatus::Optimal) out.value = r.objective * Nchi;
  return out;
}

struct DecoyEstimates {
  Variant variant = Variant::ThreeIntensity;
  /// Key-basis vacuum and single-photon lower bounds for the ss pair.
  double n00_L = 0.0;
  double n11_L = 0.0;
  /// Test-basis single-photon clicks and errors: ss pair (three-intensity) or vv pair (four-intensity).
  double n11_X_L = 0.0;
  double err11_X_U = 0.0;
  double n00_vv_L = 0.0;
  LpStatus status = LpStatus::Optimal;
  double eps_Z00 = 0.0;
  double eps_Z11 = 0.0;
  double eps_X11 = 0.0;
  double eps_EX11 = 0.0;

  bool ok() const { return status == LpStatus::Optimal; }
};

namespace detail {

inline void merge_status(DecoyEstimates& est, LpStatus s) {
  if (est.status == LpStatus::Optimal) est.status = s;
}

inline double clamp_lower(double v, double cap) { return std::clamp(v, 0.0, cap); }

}  // namespace detail

inline DecoyEstimates estimate_3int(const ObservedStats& stats, const ThaConfig& tha, const ProtocolConfig& config,
                                    const EpsilonBudget& budget, const DecoyLpOptions& options = {}) {
  if (config.variant != Variant::ThreeIntensity) throw std::invalid_argument("estimate_3int needs a three-intensity config");
  const auto opts = resolve_trials(options, tha);
  DecoyEstimates est;
  est.variant = config.variant;
  est.eps_Z00 = budget.eps_Z00;
  est.eps_Z11 = budget.eps_Z11;
  est.eps_X11 = budget.eps_X11;
  est.eps_EX11 = budget.eps_EX11;
  if (stats.N == 0.0) return est;
  const double u = budget.per_invocation();
  const double NZ = stats.N_chi[0], NX = stats.N_chi[1];
  const auto DZ = trace_distances(Basis::Z, tha, config);
  const auto DX = trace_distances(Basis::X, tha, config);

  auto run = [&](Basis b, const TraceDistanceSet& D, DecoyTarget t, double Nchi) {
    if (!(Nchi > 0.0)) return LpSolve{};
    const auto s = solve_decoy_lp(build_decoy_lp(stats, b, D, config, u, t, opts), Nchi);
    detail::merge_status(est, s.status);
    return s;
  };
  est.n00_L = detail::clamp_lower(run(Basis::Z, DZ, DecoyTarget::Min00, NZ).value, NZ);
  est.n11_L = detail::clamp_lower(run(Basis::Z, DZ, DecoyTarget::Min11, NZ).value, NZ);
  est.n11_X_L = detail::clamp_lower(run(Basis::X, DX, DecoyTarget::Min11, NX).value, NX);
  est.err11_X_U = detail::clamp_lower(run(Basis::X, DX, DecoyTarget::MaxErr11, NX).value, NX);
  return est;
}

/// Ratio p_s^2 (p_n^s p_m^s) / (p_v^2 (p_n^v p_m^v)) relating ss and vv single-cell expectations.
inline double scaling_ratio_4int(int n, int m, const ProtocolConfig& config) {
  if (!(config.p_v > 0.0)) throw std::invalid_argument("four-intensity scaling needs p_v > 0");
  const double num = config.p_s * config.p_s * poisson_pmf(n, config.gamma_s) * poisson_pmf(m, config.gamma_s);
  const double den = config.p_v * config.p_v * poisson_pmf(n, config.gamma_v) * poisson_pmf(m, config.gamma_v);
  return num / den;
}

/// N^L_ss = R (N^L_vv - f) - f - p_s^2 p_n^s p_m^s N_eff D^{ss,vv}, with f = f(trials, eps).
/// `trials` defaults to N_eff = N p_Zac.
inline double scale_vv_to_ss(double n_vv_L, int n, const ProtocolConfig& config, double D_ss_vv, double eps_each,
                             bool zero_deviations, double trials = -1.0) {
  const double Neff = config.N * config.p_Zac;
  if (trials < 0.0) trials = Neff;
  const double f = zero_deviations ? 0.0 : azuma_bound(trials, eps_each);
  const double R = scaling_ratio_4int(n, n, config);
  const double ps = poisson_pmf(n, config.gamma_s);
  const double leak = config.p_s * config.p_s * ps * ps * Neff * D_ss_vv;
  return R * (n_vv_L - f) - f - leak;
}

inline DecoyEstimates estimate_4int(const ObservedStats& stats, const ThaConfig& tha, const ProtocolConfig& config,
                                    const EpsilonBudget& budget, const DecoyLpOptions& options = {}) {
  if (config.variant != Variant::FourIntensity) throw std::invalid_argument("estimate_4int needs a four-intensity config");
  if (!(config.p_v > 0.0)) throw std::invalid_argument("four-intensity scaling needs p_v > 0");
  const auto opts = resolve_trials(options, tha);
  DecoyEstimates est;
  est.variant = config.variant;
  est.eps_Z00 = budget.eps_Z00;
  est.eps_Z11 = budget.eps_Z11;
  est.eps_X11 = budget.eps_X11;
  est.eps_EX11 = budget.eps_EX11;
  if (stats.N == 0.0) return est;
  const double u = budget.per_invocation();
  const double NX = stats.N_chi[1];
  if (!(NX > 0.0)) return est;
  const auto DX = trace_distances(Basis::X, tha, config);

  auto run = [&](DecoyTarget t) {
    const auto s = solve_decoy_lp(build_decoy_lp(stats, Basis::X, DX, config, u, t, opts), NX);
    detail::merge_status(est, s.status);
    return s.value;
  };
  est.n00_vv_L = detail::clamp_lower(run(DecoyTarget::Min00), NX);
  est.n11_X_L = detail::clamp_lower(run(DecoyTarget::Min11), NX);
  est.err11_X_U = detail::clamp_lower(run(DecoyTarget::MaxErr11), NX);

  const double D = trace_distance_pair(Intensity::s, Intensity::s, Intensity::v, Intensity::v, tha, config);
  const double NZ = stats.N_chi[0];
  const double trials = opts.trials == AzumaTrials::Detections
                            ? detected_in_basis(stats, Basis::Z) + detected_in_basis(stats, Basis::X)
                            : config.N * config.p_Zac;
  est.n00_L = detail::clamp_lower(scale_vv_to_ss(est.n00_vv_L, 0, config, D, u, opts.zero_deviations, trials), NZ);
  est.n11_L = detail::clamp_lower(scale_vv_to_ss(est.n11_X_L, 1, config, D, u, opts.zero_deviations, trials), NZ);
  return est;
}

inline DecoyEstimates estimate_decoy(const ObservedStats& stats, const ThaConfig& tha, const ProtocolConfig& config,
                                     const EpsilonBudget& budget, const DecoyLpOptions& options = {}) {
  return config.variant == Variant::ThreeIntensity ? estimate_3int(stats, tha, config, budget, options)
                                                   : estimate_4int(stats, tha, config, budget, options);
}

struct NamedLp {
  std::string name;
  double Nchi = 0.0;
  LpInstance lp;
};

/// Every decoy LP one evaluation solves, in solve order.
inline std::vector<NamedLp> decoy_lp_set(const ObservedStats& stats, const ThaConfig& tha, const ProtocolConfig& config,
                                         const EpsilonBudget& budget, const DecoyLpOptions& options = {}) {
  const auto opts = resolve_trials(options, tha);
  const double u = budget.per_invocation();
  std::vector<NamedLp> out;
  auto add = [&](const char* name, Basis b, DecoyTarget t) {
    const double Nchi = stats.N_chi[static_cast<int>(b)];
    if (!(Nchi > 0.0)) return;
    out.push_back({name, Nchi, build_decoy_lp(stats, b, trace_distances(b, tha, config), config, u, t, opts)});
  };
  if (config.variant == Variant::ThreeIntensity) {
    add("Z_min00", Basis::Z, DecoyTarget::Min00);
    add("Z_min11", Basis::Z, DecoyTarget::Min11);
  } else {
    add("X_min00", Basis::X, DecoyTarget::Min00);
  }
  add("X_min11", Basis::X, DecoyTarget::Min11);
  add("X_maxerr11", Basis::X, DecoyTarget::MaxErr11);
  return out;
}

}  // namespace mdiqkd
