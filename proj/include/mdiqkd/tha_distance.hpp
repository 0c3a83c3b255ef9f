#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "mdiqkd/model_core.hpp"

namespace mdiqkd {

enum class ThaCase : int { Case1 = 1, Case2 = 2, Case3 = 3 };

/// Which modulators Eve probes. `None` disables leakage regardless of I_max.
enum class ThaMode { None, ImOnly, ImAndPm };

inline const char* to_string(ThaMode m) {
  switch (m) {
    case ThaMode::None: return "none";
    case ThaMode::ImOnly: return "im-only";
    case ThaMode::ImAndPm: return "im-and-pm";
  }
  return "?";
}

/// Eve's free phases. theta_s and theta_0 are pinned to zero and theta_X is the
/// PM reference, so only theta_v, theta_w and theta_Z - theta_X remain.
struct EveAngles {
  double theta_v = 0.0;
  double theta_w = 0.0;
  double theta_zx = 0.0;
};

struct ThaConfig {
  ThaCase leak_case = ThaCase::Case1;
  double I_max = 0.0;
  ThaMode mode = ThaMode::ImAndPm;
  EveAngles angles;

  bool active() const { return mode != ThaMode::None && I_max > 0.0; }

  /// True when the PM reflection carries basis information Eve can use.
  bool pm_leaks() const { return active() && mode == ThaMode::ImAndPm && leak_case != ThaCase::Case3; }

  double beta(Intensity j, const ProtocolConfig& config) const {
    if (leak_case == ThaCase::Case1) return std::sqrt(I_max);
    if (config.gamma_s <= 0.0) return 0.0;
    return std::sqrt(I_max * config.gamma(j) / config.gamma_s);
  }

  double theta_im(Intensity j) const {
    switch (j) {
      case Intensity::v: return angles.theta_v;
      case Intensity::w: return angles.theta_w;
      default: return 0.0;
    }
  }

  double theta_pm(Basis b) const { return b == Basis::Z ? angles.theta_zx : 0.0; }

  void validate() const {
    if (!(I_max >= 0.0) || !std::isfinite(I_max)) throw std::invalid_argument("I_max must be non-negative");
  }
};

/// <amp1 e^{i phase1} | amp2 e^{i phase2}> for coherent states.
inline std::complex<double> coherent_overlap(double amp1, double phase1, double amp2, double phase2) {
  const std::complex<double> cross = std::polar(amp1 * amp2, phase2 - phase1);
  return std::exp(-(amp1 * amp1 + amp2 * amp2) / 2.0 + cross);
}

/// |a1 e^{i p1} - a2 e^{i p2}|^2 without cancellation for nearby states.
inline double coherent_distance_sq(double a1, double p1, double a2, double p2) {
  const double s = std::sin(0.5 * (p2 - p1));
  return (a1 - a2) * (a1 - a2) + 4.0 * a1 * a2 * s * s;
}

namespace detail {

/// One sender's back-reflected light as seen by Eve.
struct Reflection {
  double im_amp = 0.0;
  double im_phase = 0.0;
  double pm_amp = 0.0;
  double pm_phase = 0.0;
  double mean = 0.0;  // photon-number mean after phase randomization
};

inline Reflection reflection(Intensity j, const ThaConfig& tha, const ProtocolConfig& config) {
  Reflection r;
  const double beta = tha.beta(j, config);
  if (config.variant == Variant::ThreeIntensity) {
    r.im_amp = beta;
    r.im_phase = tha.theta_im(j);
    r.mean = beta * beta;
    return r;
  }
  r.im_amp = beta / std::sqrt(2.0);
  r.im_phase = tha.theta_im(j);
  if (tha.mode == ThaMode::ImAndPm) {
    r.pm_amp = std::sqrt(tha.I_max / 2.0);
    r.pm_phase = tha.theta_pm(config.basis_of(j));
  }
  r.mean = (beta * beta + tha.I_max) / 2.0;
  return r;
}

inline double pure_trace_distance(const Reflection& a1, const Reflection& b1, const Reflection& a2,
                                  const Reflection& b2) {
  const double x = coherent_distance_sq(a1.im_amp, a1.im_phase, a2.im_amp, a2.im_phase) +
                   coherent_distance_sq(a1.pm_amp, a1.pm_phase, a2.pm_amp, a2.pm_phase) +
                   coherent_distance_sq(b1.im_amp, b1.im_phase, b2.im_amp, b2.im_phase) +
                   coherent_distance_sq(b1.pm_amp, b1.pm_phase, b2.pm_amp, b2.pm_phase);
  return std::sqrt(-std::expm1(-x));
}

inline double log_ratio(int n, double mean, double ref) {
  // log of Pois(n; mean) / Pois(n; ref)
  if (mean == ref) return 0.0;
  if (mean == 0.0) return n == 0 ? ref : -std::numeric_limits<double>::infinity();
  return (ref - mean) + n * std::log(mean / ref);
}

}  // namespace detail

/// Truncated upper bound on the trace distance between two phase-randomized
/// product states, Pois(mA) x Pois(mB) versus Pois(rA) x Pois(rB):
/// 1 - sum_{n,m<=P} min(p_nm, q_nm), accumulated as the positive parts of q - p
/// plus the reference tail so that tiny distances keep full precision.
inline double diagonal_trace_distance_bound(double mean_a, double mean_b, double ref_a, double ref_b, int P_cut) {
  double total = 0.0;
  for (int n = 0; n <= P_cut; ++n) {
    const double qa = poisson_pmf(n, ref_a);
    if (qa == 0.0) continue;
    const double la = detail::log_ratio(n, mean_a, ref_a);
    for (int m = 0; m <= P_cut; ++m) {
      const double qb = poisson_pmf(m, ref_b);
      if (qb == 0.0) continue;
      const double l = la + detail::log_ratio(m, mean_b, ref_b);
      if (l < 0.0) total += -qa * qb * std::expm1(l);
    }
  }
  total += tail_term(ref_a, ref_b, P_cut);
  return std::clamp(total, 0.0, 1.0);
}

inline void check_case3(const ThaConfig& tha, const ProtocolConfig& config) {
  if (tha.leak_case != ThaCase::Case3) return;
  if (tha.I_max > std::log(2.0))
    throw std::invalid_argument("case 3 bound requires I_max <= log 2");
  if (!(config.gamma_w <= config.gamma_v && config.gamma_v <= config.gamma_s))
    throw std::invalid_argument("case 3 bound requires gamma_w <= gamma_v <= gamma_s");
}

/// Trace distance between Eve's reflections for intensity pair (a_A, a_B) and
/// reference pair (r_A, r_B).
inline double trace_distance_pair(Intensity a_A, Intensity a_B, Intensity r_A, Intensity r_B, const ThaConfig& tha,
                                  const ProtocolConfig& config) {
  if (!tha.active()) return 0.0;
  const auto a1 = detail::reflection(a_A, tha, config);
  const auto b1 = detail::reflection(a_B, tha, config);
  const auto a2 = detail::reflection(r_A, tha, config);
  const auto b2 = detail::reflection(r_B, tha, config);
  if (tha.leak_case == ThaCase::Case3) {
    check_case3(tha, config);
    return diagonal_trace_distance_bound(a1.mean, b1.mean, a2.mean, b2.mean, config.P_cut);
  }
  return detail::pure_trace_distance(a1, b1, a2, b2);
}

/// D^{jA jB, ss} for the three-intensity protocol.
inline double trace_distance_3int(Intensity j_A, Intensity j_B, const ThaConfig& tha, ProtocolConfig config) {
  config.variant = Variant::ThreeIntensity;
  return trace_distance_pair(j_A, j_B, Intensity::s, Intensity::s, tha, config);
}

/// D^{jA jB, ss} for the four-intensity protocol, with split reflections and PM phases.
inline double trace_distance_4int(Intensity j_A, Intensity j_B, const ThaConfig& tha, ProtocolConfig config) {
  config.variant = Variant::FourIntensity;
  return trace_distance_pair(j_A, j_B, Intensity::s, Intensity::s, tha, config);
}

/// Leakage quantifiers used by one decoy LP: D[jA][jB] against the reference pair (ref, ref).
struct TraceDistanceSet {
  Intensity ref = Intensity::s;
  std::array<std::array<double, 4>, 4> D{};

  double at(Intensity a, Intensity b) const {
    return D[static_cast<int>(a)][static_cast<int>(b)];
  }
  void set(Intensity a, Intensity b, double value) { D[static_cast<int>(a)][static_cast<int>(b)] = value; }
};

/// Distances for the LP of basis `basis`: reference ss in the three-intensity
/// protocol, reference vv for the four-intensity X basis.
inline TraceDistanceSet trace_distances(Basis basis, const ThaConfig& tha, const ProtocolConfig& config) {
  TraceDistanceSet set;
  const auto ints = config.intensities(basis);
  set.ref = config.variant == Variant::ThreeIntensity ? Intensity::s : ints.front();
  for (Intensity a : ints)
    for (Intensity b : ints)
      set.set(a, b, (a == set.ref && b == set.ref) ? 0.0
                                                   : trace_distance_pair(a, b, set.ref, set.ref, tha, config));
  return set;
}

/// Delta_{X_Ac = -} = 1/2 [1 - 2 pZ pX / (pZ^2 + pX^2) Re<Psi_Z|Psi_X>_A <Psi_Z|Psi_X>_B].
inline double coin_imbalance(double p_Z, double p_X, double re_overlap) {
  return 0.5 * (1.0 - 2.0 * p_Z * p_X / (p_Z * p_Z + p_X * p_X) * re_overlap);
}

/// Per-sender overlap <Psi_Z|Psi_X> of the states Eve can probe.
inline std::complex<double> sender_overlap_ZX(const ThaConfig& tha, const ProtocolConfig& config) {
  if (!tha.active()) return 1.0;
  const bool pm = tha.mode == ThaMode::ImAndPm;
  if (config.variant == Variant::ThreeIntensity) {
    if (!pm || tha.leak_case == ThaCase::Case3) return 1.0;
    const double a = std::sqrt(tha.I_max);
    return coherent_overlap(a, tha.theta_pm(Basis::Z), a, tha.theta_pm(Basis::X));
  }
  const double pv = config.p_v;
  const double pw = config.p_w;
  if (pv + pw <= 0.0) throw std::invalid_argument("four-intensity overlap needs p_v + p_w > 0");
  if (tha.leak_case == ThaCase::Case3) {
    // Phase-randomized reflections: overlap of the photon-number distributions.
    const double ms = detail::reflection(Intensity::s, tha, config).mean;
    auto fid = [&](Intensity j) {
      const double mj = detail::reflection(j, tha, config).mean;
      const double d = std::sqrt(ms) - std::sqrt(mj);
      return std::exp(-d * d / 2.0);
    };
    return (pv * fid(Intensity::v) + pw * fid(Intensity::w)) / (pv + pw);
  }
  const auto rs = detail::reflection(Intensity::s, tha, config);
  const auto rv = detail::reflection(Intensity::v, tha, config);
  const auto rw = detail::reflection(Intensity::w, tha, config);
  const std::complex<double> im =
      (pv * coherent_overlap(rs.im_amp, rs.im_phase, rv.im_amp, rv.im_phase) +
       pw * coherent_overlap(rs.im_amp, rs.im_phase, rw.im_amp, rw.im_phase)) /
      (pv + pw);
  if (!pm) return im;
  return im * coherent_overlap(rs.pm_amp, rs.pm_phase, rv.pm_amp, rv.pm_phase);
}

/// Re(<Psi_Z|Psi_X>_{A,E} <Psi_Z|Psi_X>_{B,E}) with identical sender models.
inline double overlap_ZX(const ThaConfig& tha, const ProtocolConfig& config) {
  const auto o = sender_overlap_ZX(tha, config);
  return (o * o).real();
}

}  // namespace mdiqkd
