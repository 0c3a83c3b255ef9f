#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdiqkd {

enum class Variant { ThreeIntensity, FourIntensity };
enum class Basis : int { Z = 0, X = 1 };
enum class Intensity : int { s = 0, v = 1, w = 2, zero = 3 };

inline constexpr std::array<Intensity, 4> kAllIntensities = {Intensity::s, Intensity::v, Intensity::w,
                                                             Intensity::zero};

inline const char* to_string(Intensity j) {
  switch (j) {
    case Intensity::s: return "s";
    case Intensity::v: return "v";
    case Intensity::w: return "w";
    case Intensity::zero: return "0";
  }
  return "?";
}

inline const char* to_string(Basis b) { return b == Basis::Z ? "Z" : "X"; }

inline const char* to_string(Variant v) {
  return v == Variant::ThreeIntensity ? "three-intensity" : "four-intensity";
}

/// Protocol-level parameters controlled by Alice and Bob.
///
/// For the four-intensity variant the basis is implied by the intensity:
/// s is sent only in Z, while v, w and 0 are sent only in X.
struct ProtocolConfig {
  Variant variant = Variant::ThreeIntensity;
  double N = 1e14;
  double gamma_s = 0.4;
  double gamma_v = 0.1;
  double gamma_w = 5e-4;
  double p_s = 0.5;
  double p_v = 0.3;
  double p_w = 0.2;
  double p_0 = 0.0;
  double p_Z = 0.5;
  double p_Zac = 1.0;
  int S_cut = 10;
  int P_cut = 20;

  double gamma(Intensity j) const {
    switch (j) {
      case Intensity::s: return gamma_s;
      case Intensity::v: return gamma_v;
      case Intensity::w: return gamma_w;
      case Intensity::zero: return 0.0;
    }
    return 0.0;
  }

  double prob(Intensity j) const {
    switch (j) {
      case Intensity::s: return p_s;
      case Intensity::v: return p_v;
      case Intensity::w: return p_w;
      case Intensity::zero: return variant == Variant::FourIntensity ? p_0 : 0.0;
    }
    return 0.0;
  }

  double pZ() const { return variant == Variant::FourIntensity ? p_s : p_Z; }
  double pX() const { return variant == Variant::FourIntensity ? p_v + p_w + p_0 : 1.0 - p_Z; }
  double basis_prob(Basis b) const { return b == Basis::Z ? pZ() : pX(); }

  /// Intensities that can occur in basis `b`.
  std::vector<Intensity> intensities(Basis b) const {
    if (variant == Variant::ThreeIntensity) return {Intensity::s, Intensity::v, Intensity::w};
    if (b == Basis::Z) return {Intensity::s};
    return {Intensity::v, Intensity::w, Intensity::zero};
  }

  /// Probability of intensity `j` conditioned on basis `b` having been chosen.
  double prob_in_basis(Intensity j, Basis b) const {
    if (variant == Variant::ThreeIntensity) return prob(j);
    const double pb = basis_prob(b);
    if (pb <= 0.0) return 0.0;
    for (Intensity k : intensities(b))
      if (k == j) return prob(j) / pb;
    return 0.0;
  }

  Basis basis_of(Intensity j) const {
    return j == Intensity::s ? Basis::Z : Basis::X;
  }

  void validate() const {
    auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!(N >= 0.0) || !std::isfinite(N)) throw std::invalid_argument("N must be a finite non-negative number");
    if (!(gamma_w >= 0.0 && gamma_w < gamma_v && gamma_v < gamma_s))
      throw std::invalid_argument("intensities must satisfy 0 <= gamma_w < gamma_v < gamma_s");
    if (!in_unit(p_s) || !in_unit(p_v) || !in_unit(p_w) || !in_unit(p_0) || !in_unit(p_Z))
      throw std::invalid_argument("selection probabilities must lie in [0,1]");
    if (!(p_Zac > 0.0 && p_Zac <= 1.0)) throw std::invalid_argument("p_Zac must lie in (0,1]");
    const double total = p_s + p_v + p_w + (variant == Variant::FourIntensity ? p_0 : 0.0);
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("intensity probabilities must sum to 1");
    if (variant == Variant::ThreeIntensity && p_0 != 0.0)
      throw std::invalid_argument("p_0 is only used by the four-intensity protocol");
    if (S_cut < 0) throw std::invalid_argument("S_cut must be non-negative");
    if (P_cut < 1) throw std::invalid_argument("P_cut must be positive");
  }
};

/// Channel and detector parameters; L is the Alice-Bob distance with the relay in the middle.
struct ChannelParams {
  double e_d = 0.01;
  double p_d = 5e-6;
  double eta_det = 0.25;
  double alpha = 0.2;
  double f_EC = 1.2;
  double L = 0.0;

  void validate() const {
    if (!(e_d >= 0.0 && e_d <= 1.0)) throw std::invalid_argument("e_d must lie in [0,1]");
    if (!(p_d >= 0.0 && p_d <= 1.0)) throw std::invalid_argument("p_d must lie in [0,1]");
    if (!(eta_det >= 0.0 && eta_det <= 1.0)) throw std::invalid_argument("eta_det must lie in [0,1]");
    if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be non-negative");
    if (!(f_EC >= 1.0)) throw std::invalid_argument("f_EC must be at least 1");
    if (!(L >= 0.0)) throw std::invalid_argument("L must be non-negative");
  }
};

/// Failure-probability bookkeeping for one key-rate evaluation.
///
/// A single estimation budget `eps_total` is split uniformly over every
/// concentration-inequality invocation of the run. Estimator failure
/// probabilities are sums of the invocations they consume.
struct EpsilonBudget {
  double eps_total = 1e-10;
  double eps_cor = 1e-15;
  double eps_overhead = 0.0;
  std::optional<double> eps_sec_override;

  int invocations = 1;
  double eps_Z00 = 0.0;
  double eps_Z11 = 0.0;
  double eps_X11 = 0.0;
  double eps_EX11 = 0.0;
  double eps_prime = 0.0;
  double eps_ph11 = 0.0;
  double eps_other = 0.0;

  double per_invocation() const { return eps_total / static_cast<double>(invocations); }

  double eps_sec() const {
    if (eps_sec_override) return *eps_sec_override;
    return std::sqrt(2.0 * (eps_total + eps_overhead));
  }

  /// Aggregate estimation failure probability.
  double eps() const { return eps_total; }

  void validate() const {
    if (!(eps_total > 0.0 && eps_total < 1.0)) throw std::invalid_argument("eps_total must lie in (0,1)");
    if (!(eps_cor > 0.0 && eps_cor < 1.0)) throw std::invalid_argument("eps_cor must lie in (0,1)");
    if (!(eps_overhead >= 0.0 && eps_overhead < 1.0)) throw std::invalid_argument("eps_overhead must lie in [0,1)");
    if (eps_sec_override && !(*eps_sec_override > 0.0 && *eps_sec_override < 1.0))
      throw std::invalid_argument("eps_sec must lie in (0,1)");
  }
};

inline double binary_entropy(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("binary_entropy: argument outside [0,1]");
  if (x == 0.0 || x == 1.0) return 0.0;
  return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

/// Poisson probability gamma^n e^{-gamma} / n!, evaluated in the log domain.
inline double poisson_pmf(int n, double gamma) {
  if (n < 0) return 0.0;
  if (gamma == 0.0) return n == 0 ? 1.0 : 0.0;
  return std::exp(n * std::log(gamma) - gamma - std::lgamma(n + 1.0));
}

/// Azuma deviation f(x, y) = sqrt(2 x ln(1/y)).
inline double azuma_bound(double x, double y) {
  if (!(y > 0.0) || y > 1.0) throw std::domain_error("azuma_bound: failure probability outside (0,1]");
  if (x < 0.0) throw std::domain_error("azuma_bound: negative trial count");
  return std::sqrt(2.0 * x * -std::log(y));
}

/// Serfling term sqrt((x+1) ln(1/z) / (2 y (x+y))).
inline double serfling_upsilon(double x, double y, double z) {
  if (!(y > 0.0)) throw std::domain_error("serfling_upsilon: y must be positive");
  if (!(z > 0.0) || z > 1.0) throw std::domain_error("serfling_upsilon: failure probability outside (0,1]");
  if (x < 0.0) throw std::domain_error("serfling_upsilon: negative count");
  return std::sqrt((x + 1.0) * -std::log(z) / (2.0 * y * (x + y)));
}

/// Poisson mass above `cut` for mean gamma, summed directly so that tiny tails keep full precision.
inline double poisson_tail(int cut, double gamma) {
  if (gamma == 0.0) return 0.0;
  double total = 0.0;
  for (int n = cut + 1; n < cut + 4000; ++n) {
    const double p = poisson_pmf(n, gamma);
    total += p;
    if (n > gamma && p <= total * 1e-18) break;
  }
  return std::min(total, 1.0);
}

/// Two-dimensional truncation tail 1 - sum_{n,m<=cut} p_n p_m for intensities gA and gB.
inline double tail_term(double gamma_a, double gamma_b, int cut) {
  const double ta = poisson_tail(cut, gamma_a);
  const double tb = poisson_tail(cut, gamma_b);
  return ta + tb - ta * tb;
}

inline double tail_term(Intensity j_a, Intensity j_b, int S_cut, const ProtocolConfig& config) {
  return tail_term(config.gamma(j_a), config.gamma(j_b), S_cut);
}

}  // namespace mdiqkd
