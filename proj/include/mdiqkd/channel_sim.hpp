#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "mdiqkd/model_core.hpp"

namespace mdiqkd {

/// Largest photon number per sender kept in yield tables and count sums.
inline constexpr int kPhotonBand = 24;

inline double arm_transmittance(const ChannelParams& channel) {
  return channel.eta_det * std::pow(10.0, -channel.alpha * (channel.L / 2.0) / 10.0);
}

/// Outcome probabilities of the relay for one pair of input Fock states.
struct BsmOutcome {
  double psi_minus = 0.0;
  double psi_plus = 0.0;
};

namespace detail {

struct FactorialTable {
  std::vector<double> f;
  explicit FactorialTable(int n) : f(n + 1, 1.0) {
    for (int i = 1; i <= n; ++i) f[i] = f[i - 1] * i;
  }
  double operator[](int i) const { return f[i]; }
  double binom(int n, int k) const { return (k < 0 || k > n) ? 0.0 : f[n] / (f[k] * f[n - k]); }
};

inline const FactorialTable& factorials() {
  static const FactorialTable table(4 * kPhotonBand + 8);
  return table;
}

/// Click-set probabilities once dark counts are added. Detector bits:
/// 1 = c_H, 2 = c_V, 4 = d_H, 8 = d_V.
inline double dark_transition(int occupied, int target, double p_d) {
  if ((occupied & ~target) != 0) return 0.0;
  const int extra = std::popcount(static_cast<unsigned>(target & ~occupied));
  const int fired = std::popcount(static_cast<unsigned>(target));
  return std::pow(p_d, extra) * std::pow(1.0 - p_d, 4 - fired);
}

}  // namespace detail

/// Bell-state measurement with a 50:50 beam splitter followed by polarization
/// (encoding-mode) splitting on both outputs and four threshold detection slots.
///
/// Alice's n photons occupy a single mode of linear polarization `angle_a`,
/// Bob's m photons a mode of polarization `angle_b`. The output state is
/// expanded exactly in the Fock basis of the four output modes. Success is
/// exactly two clicks: {c_H, d_V} or {c_V, d_H} announce psi-minus, {c_H, c_V}
/// or {d_H, d_V} announce psi-plus.
inline BsmOutcome bsm_outcome(int n, int m, double angle_a, double angle_b, double p_d) {
  const auto& fact = detail::factorials();
  const int T = n + m;
  const double phi = angle_b - angle_a;
  const double cphi = std::cos(phi), sphi = std::sin(phi);
  const double cpsi = std::cos(angle_a), spsi = std::sin(angle_a);

  // conv[a][kA]: Alice's photons and Bob's a co-polarized photons landing kA in port c.
  std::vector<std::vector<double>> conv(m + 1);
  for (int a = 0; a <= m; ++a) {
    conv[a].assign(n + a + 1, 0.0);
    for (int kA = 0; kA <= n + a; ++kA) {
      double acc = 0.0;
      for (int i = std::max(0, kA - n); i <= std::min(a, kA); ++i) {
        const double sign = ((a - i) % 2 == 0) ? 1.0 : -1.0;
        acc += sign * fact.binom(n, kA - i) / (fact[i] * fact[a - i]);
      }
      conv[a][kA] = acc;
    }
  }
  const double K = fact[m] / (std::pow(2.0, 0.5 * T) * std::sqrt(fact[n] * fact[m]));

  std::vector<double> pow_c(m + 1, 1.0), pow_s(m + 1, 1.0);
  for (int i = 1; i <= m; ++i) {
    pow_c[i] = pow_c[i - 1] * cphi;
    pow_s[i] = pow_s[i - 1] * sphi;
  }

  // Classes per output port: 0 empty, 1 H only, 2 V only, 3 both.
  double P[4][4] = {};
  std::vector<double> M;
  for (int k = 0; k <= T; ++k) {
    const int l = T - k;
    const int rows = k + 1, cols = l + 1;
    M.assign(static_cast<std::size_t>(rows) * cols, 0.0);
    double norm = 0.0;
    for (int j = 0; j <= k; ++j) {
      for (int lp = 0; lp <= l; ++lp) {
        const int b = j + lp;
        if (b > m) break;
        const int a = m - b;
        const int kA = k - j;
        if (kA > n + a) continue;
        const int lA = l - lp;
        const double sign = (lp % 2 == 0) ? 1.0 : -1.0;
        const double amp = K * conv[a][kA] * sign / (fact[j] * fact[lp]) * pow_c[a] * pow_s[b] *
                           std::sqrt(fact[kA] * fact[j] * fact[lA] * fact[lp]);
        M[static_cast<std::size_t>(j) * cols + lp] = amp;
        norm += amp * amp;
      }
    }
    if (norm == 0.0) continue;

    auto proj = [&](int total, int ortho, bool horizontal) {
      const int along = total - ortho;
      const double root = std::sqrt(fact[total] / (fact[along] * fact[ortho]));
      if (horizontal) return root * std::pow(cpsi, along) * std::pow(-spsi, ortho);
      return root * std::pow(spsi, along) * std::pow(cpsi, ortho);
    };
    std::vector<double> hc[2], hd[2];
    for (int x = 0; x < 2; ++x) {
      hc[x].resize(rows);
      hd[x].resize(cols);
      for (int j = 0; j < rows; ++j) hc[x][j] = proj(k, j, x == 0);
      for (int lp = 0; lp < cols; ++lp) hd[x][lp] = proj(l, lp, x == 0);
    }

    // cM[x][lp] = sum_j hc_x[j] M[j][lp]; Md[y][j] = sum_lp M[j][lp] hd_y[lp].
    double pc[2] = {0.0, 0.0}, pd[2] = {0.0, 0.0}, s[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
    for (int x = 0; x < 2; ++x) {
      for (int lp = 0; lp < cols; ++lp) {
        double acc = 0.0;
        for (int j = 0; j < rows; ++j) acc += hc[x][j] * M[static_cast<std::size_t>(j) * cols + lp];
        pc[x] += acc * acc;
        for (int y = 0; y < 2; ++y) s[x][y] += acc * hd[y][lp];
      }
    }
    for (int y = 0; y < 2; ++y) {
      for (int j = 0; j < rows; ++j) {
        double acc = 0.0;
        for (int lp = 0; lp < cols; ++lp) acc += M[static_cast<std::size_t>(j) * cols + lp] * hd[y][lp];
        pd[y] += acc * acc;
      }
    }
    auto pos = [](double x) { return x > 0.0 ? x : 0.0; };
    if (k == 0 && l == 0) {
      P[0][0] += norm;
    } else if (k == 0) {
      P[0][1] += pd[0];
      P[0][2] += pd[1];
      P[0][3] += pos(norm - pd[0] - pd[1]);
    } else if (l == 0) {
      P[1][0] += pc[0];
      P[2][0] += pc[1];
      P[3][0] += pos(norm - pc[0] - pc[1]);
    } else {
      double used = 0.0;
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) {
          P[1 + x][1 + y] += s[x][y] * s[x][y];
          used += s[x][y] * s[x][y];
        }
      double rest = norm - used;
      for (int x = 0; x < 2; ++x) {
        const double v = pos(pc[x] - s[x][0] * s[x][0] - s[x][1] * s[x][1]);
        P[1 + x][3] += v;
        rest -= v;
      }
      for (int y = 0; y < 2; ++y) {
        const double v = pos(pd[y] - s[0][y] * s[0][y] - s[1][y] * s[1][y]);
        P[3][1 + y] += v;
        rest -= v;
      }
      P[3][3] += pos(rest);
    }
  }

  static constexpr int kPortBits[2][4] = {{0, 1, 2, 3}, {0, 4, 8, 12}};
  BsmOutcome out;
  for (int c = 0; c < 4; ++c)
    for (int d = 0; d < 4; ++d) {
      if (P[c][d] == 0.0) continue;
      const int occ = kPortBits[0][c] | kPortBits[1][d];
      out.psi_minus += P[c][d] * (detail::dark_transition(occ, 1 | 8, p_d) + detail::dark_transition(occ, 2 | 4, p_d));
      out.psi_plus += P[c][d] * (detail::dark_transition(occ, 1 | 2, p_d) + detail::dark_transition(occ, 4 | 8, p_d));
    }
  return out;
}

/// Polarization angle encoding `bit` in basis `b`: H/V for Z, D/A for X.
inline double encoding_angle(Basis b, int bit) {
  const double quarter = std::numbers::pi / 4.0;
  if (b == Basis::Z) return bit == 0 ? 0.0 : 2.0 * quarter;
  return bit == 0 ? quarter : 3.0 * quarter;
}

/// Bit-averaged click and error probabilities for exactly (n, m) photons reaching the relay.
class BsmModel {
 public:
  struct Table {
    std::vector<double> click;
    std::vector<double> error;
  };

  BsmModel(double e_d, double p_d, int n_max) : e_d_(e_d), p_d_(p_d), n_max_(n_max) {
    const double mis = std::asin(std::sqrt(e_d));
    const int size = (n_max + 1) * (n_max + 1);
    for (int ab = 0; ab < 4; ++ab) {
      const Basis ba = (ab & 1) ? Basis::X : Basis::Z;
      const Basis bb = (ab & 2) ? Basis::X : Basis::Z;
      Table& t = tables_[ab];
      t.click.assign(size, 0.0);
      t.error.assign(size, 0.0);
      for (int n = 0; n <= n_max; ++n)
        for (int m = 0; m <= n_max; ++m) {
          double click = 0.0, error = 0.0;
          for (int x = 0; x < 2; ++x)
            for (int y = 0; y < 2; ++y) {
              const auto o = bsm_outcome(n, m, encoding_angle(ba, x), encoding_angle(bb, y) + mis, p_d);
              click += 0.25 * (o.psi_minus + o.psi_plus);
              if (ba != bb) continue;
              if (ba == Basis::Z) {
                if (x == y) error += 0.25 * (o.psi_minus + o.psi_plus);
              } else {
                error += 0.25 * (x == y ? o.psi_minus : o.psi_plus);
              }
            }
          t.click[n * (n_max + 1) + m] = click;
          t.error[n * (n_max + 1) + m] = error;
        }
    }
  }

  int n_max() const { return n_max_; }
  double e_d() const { return e_d_; }
  double p_d() const { return p_d_; }

  const Table& arrived(Basis alice, Basis bob) const {
    return tables_[(alice == Basis::X ? 1 : 0) | (bob == Basis::X ? 2 : 0)];
  }

  /// Shared instance for a detector model; construction is done once per key.
  static std::shared_ptr<const BsmModel> get(double e_d, double p_d, int n_max = kPhotonBand) {
    static std::mutex mutex;
    static std::map<std::tuple<double, double, int>, std::shared_ptr<const BsmModel>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto& slot = cache[{e_d, p_d, n_max}];
    if (!slot) slot = std::make_shared<const BsmModel>(e_d, p_d, n_max);
    return slot;
  }

 private:
  double e_d_, p_d_;
  int n_max_;
  std::array<Table, 4> tables_;
};

/// Photon-number resolved yields at the relay after channel loss.
struct YieldTable {
  int n_max = 0;
  std::array<std::vector<double>, 2> Y;    // matched bases, indexed by Basis
  std::array<std::vector<double>, 2> EY;   // joint click-and-error probability
  std::array<std::vector<double>, 2> Ymix; // [0]: Alice Z Bob X, [1]: Alice X Bob Z

  double y(int n, int m, Basis b) const { return Y[static_cast<int>(b)][n * (n_max + 1) + m]; }
  double ey(int n, int m, Basis b) const { return EY[static_cast<int>(b)][n * (n_max + 1) + m]; }
  double y_mixed(int n, int m, Basis alice) const {
    return Ymix[alice == Basis::Z ? 0 : 1][n * (n_max + 1) + m];
  }
};

namespace detail {

/// out = B_a * in * B_b^T with B[n][k] = C(n,k) eta^k (1-eta)^(n-k).
inline std::vector<double> apply_loss(const std::vector<double>& in, int n_max, double eta_a, double eta_b) {
  const int d = n_max + 1;
  auto loss_matrix = [&](double eta) {
    std::vector<double> B(static_cast<std::size_t>(d) * d, 0.0);
    for (int n = 0; n < d; ++n)
      for (int k = 0; k <= n; ++k)
        B[n * d + k] = factorials().binom(n, k) * std::pow(eta, k) * std::pow(1.0 - eta, n - k);
    return B;
  };
  const auto Ba = loss_matrix(eta_a);
  const auto Bb = loss_matrix(eta_b);
  std::vector<double> tmp(static_cast<std::size_t>(d) * d, 0.0), out(static_cast<std::size_t>(d) * d, 0.0);
  for (int n = 0; n < d; ++n)
    for (int k = 0; k <= n; ++k) {
      const double w = Ba[n * d + k];
      if (w == 0.0) continue;
      for (int m = 0; m < d; ++m) tmp[n * d + m] += w * in[k * d + m];
    }
  for (int n = 0; n < d; ++n)
    for (int m = 0; m < d; ++m) {
      double acc = 0.0;
      for (int k = 0; k <= m; ++k) acc += Bb[m * d + k] * tmp[n * d + k];
      out[n * d + m] = acc;
    }
  return out;
}

}  // namespace detail

inline YieldTable yield_table(const BsmModel& model, double eta_a, double eta_b) {
  YieldTable t;
  t.n_max = model.n_max();
  for (Basis b : {Basis::Z, Basis::X}) {
    const auto& arr = model.arrived(b, b);
    t.Y[static_cast<int>(b)] = detail::apply_loss(arr.click, t.n_max, eta_a, eta_b);
    t.EY[static_cast<int>(b)] = detail::apply_loss(arr.error, t.n_max, eta_a, eta_b);
  }
  t.Ymix[0] = detail::apply_loss(model.arrived(Basis::Z, Basis::X).click, t.n_max, eta_a, eta_b);
  t.Ymix[1] = detail::apply_loss(model.arrived(Basis::X, Basis::Z).click, t.n_max, eta_a, eta_b);
  return t;
}

struct FockYield {
  std::array<double, 2> Y{};
  std::array<double, 2> EY{};
};

/// Yields for n and m photons emitted, indexed by basis.
inline FockYield fock_yields(int n, int m, double eta_A, double eta_B, const ChannelParams& channel) {
  if (n < 0 || m < 0) throw std::invalid_argument("fock_yields: negative photon number");
  if (n > kPhotonBand || m > kPhotonBand) throw std::out_of_range("fock_yields: photon number beyond the enumeration band");
  const auto model = BsmModel::get(channel.e_d, channel.p_d);
  const int d = model->n_max() + 1;
  FockYield out;
  for (Basis b : {Basis::Z, Basis::X}) {
    const auto& arr = model->arrived(b, b);
    double y = 0.0, ey = 0.0;
    for (int k = 0; k <= n; ++k)
      for (int l = 0; l <= m; ++l) {
        const double w = detail::factorials().binom(n, k) * std::pow(eta_A, k) * std::pow(1.0 - eta_A, n - k) *
                         detail::factorials().binom(m, l) * std::pow(eta_B, l) * std::pow(1.0 - eta_B, m - l);
        y += w * arr.click[k * d + l];
        ey += w * arr.error[k * d + l];
      }
    out.Y[static_cast<int>(b)] = y;
    out.EY[static_cast<int>(b)] = ey;
  }
  return out;
}

/// Statistics announced in one run, plus the hidden photon-number split when requested.
struct ObservedStats {
  Variant variant = Variant::ThreeIntensity;
  double N = 0.0;
  double p_Zac = 1.0;
  // [jA][jB][basis]
  std::array<std::array<std::array<double, 2>, 4>, 4> N_click{};
  std::array<std::array<std::array<double, 2>, 4>, 4> N_error{};
  std::array<std::array<std::array<bool, 2>, 4>, 4> present{};
  std::array<double, 2> N_chi{};
  double Z_ss_size = 0.0;
  double E_Z_ss = 0.0;
  /// Every click of the run, kept or not, used as the trial count of the coin estimates.
  double total_clicks = 0.0;

  // Oracle-only: expected or sampled counts per (jA, jB, basis, n, m).
  int truth_n_max = -1;
  std::vector<double> truth_click;
  std::vector<double> truth_error;

  double click(Intensity a, Intensity b, Basis x) const {
    return N_click[static_cast<int>(a)][static_cast<int>(b)][static_cast<int>(x)];
  }
  double error(Intensity a, Intensity b, Basis x) const {
    return N_error[static_cast<int>(a)][static_cast<int>(b)][static_cast<int>(x)];
  }
  bool has(Intensity a, Intensity b, Basis x) const {
    return present[static_cast<int>(a)][static_cast<int>(b)][static_cast<int>(x)];
  }
  bool has_truth() const { return truth_n_max >= 0; }

  std::size_t truth_index(Intensity a, Intensity b, Basis x, int n, int m) const {
    const std::size_t d = truth_n_max + 1;
    return ((((static_cast<std::size_t>(a) * 4 + static_cast<std::size_t>(b)) * 2 + static_cast<std::size_t>(x)) * d +
             n) *
                d +
            m);
  }
  double truth(Intensity a, Intensity b, Basis x, int n, int m) const {
    return truth_click[truth_index(a, b, x, n, m)];
  }
  double truth_err(Intensity a, Intensity b, Basis x, int n, int m) const {
    return truth_error[truth_index(a, b, x, n, m)];
  }
};

inline void refresh_summary(ObservedStats& stats) {
  stats.Z_ss_size = stats.click(Intensity::s, Intensity::s, Basis::Z);
  stats.E_Z_ss = stats.Z_ss_size > 0.0 ? stats.error(Intensity::s, Intensity::s, Basis::Z) / stats.Z_ss_size : 0.0;
}

/// Honest-channel expected statistics.
inline ObservedStats expected_counts(const ProtocolConfig& config, const ChannelParams& channel, const YieldTable& yields,
                                     bool with_truth = false) {
  config.validate();
  const int nm = yields.n_max;
  if (poisson_tail(nm, config.gamma_s) > 1e-14)
    throw std::out_of_range("expected_counts: gamma_s too large for the photon-number band");

  ObservedStats stats;
  stats.variant = config.variant;
  stats.N = config.N;
  stats.p_Zac = config.p_Zac;
  (void)channel;

  std::array<std::vector<double>, 4> pmf;
  for (Intensity j : kAllIntensities) {
    pmf[static_cast<int>(j)].resize(nm + 1);
    for (int n = 0; n <= nm; ++n) pmf[static_cast<int>(j)][n] = poisson_pmf(n, config.gamma(j));
  }
  if (with_truth) {
    stats.truth_n_max = nm;
    stats.truth_click.assign(static_cast<std::size_t>(4 * 4 * 2) * (nm + 1) * (nm + 1), 0.0);
    stats.truth_error.assign(stats.truth_click.size(), 0.0);
  }

  for (Basis b : {Basis::Z, Basis::X}) {
    const double pb = config.basis_prob(b);
    const double Nchi = config.N * config.p_Zac * pb * pb;
    stats.N_chi[static_cast<int>(b)] = Nchi;
    for (Intensity ja : config.intensities(b))
      for (Intensity jb : config.intensities(b)) {
        const double w = Nchi * config.prob_in_basis(ja, b) * config.prob_in_basis(jb, b);
        const auto& pa = pmf[static_cast<int>(ja)];
        const auto& pbm = pmf[static_cast<int>(jb)];
        double click = 0.0, error = 0.0;
        for (int n = 0; n <= nm; ++n) {
          if (pa[n] == 0.0) continue;
          for (int m = 0; m <= nm; ++m) {
            const double q = w * pa[n] * pbm[m];
            if (q == 0.0) continue;
            const double c = q * yields.y(n, m, b);
            const double e = q * yields.ey(n, m, b);
            click += c;
            error += e;
            if (with_truth) {
              stats.truth_click[stats.truth_index(ja, jb, b, n, m)] = c;
              stats.truth_error[stats.truth_index(ja, jb, b, n, m)] = e;
            }
          }
        }
        auto& cell = stats.N_click[static_cast<int>(ja)][static_cast<int>(jb)][static_cast<int>(b)];
        cell = click;
        stats.N_error[static_cast<int>(ja)][static_cast<int>(jb)][static_cast<int>(b)] = error;
        stats.present[static_cast<int>(ja)][static_cast<int>(jb)][static_cast<int>(b)] = true;
      }
  }

  // All clicks of the run: every basis combination, before fictitious-basis discarding.
  double total = 0.0;
  for (Basis ba : {Basis::Z, Basis::X})
    for (Basis bb : {Basis::Z, Basis::X})
      for (Intensity ja : config.intensities(ba))
        for (Intensity jb : config.intensities(bb)) {
          const double w = config.N * config.basis_prob(ba) * config.prob_in_basis(ja, ba) * config.basis_prob(bb) *
                           config.prob_in_basis(jb, bb);
          if (w == 0.0) continue;
          double acc = 0.0;
          for (int n = 0; n <= nm; ++n)
            for (int m = 0; m <= nm; ++m) {
              const double q = pmf[static_cast<int>(ja)][n] * pmf[static_cast<int>(jb)][m];
              if (q == 0.0) continue;
              acc += q * (ba == bb ? yields.y(n, m, ba) : yields.y_mixed(n, m, ba));
            }
          total += w * acc;
        }
  stats.total_clicks = total;
  refresh_summary(stats);
  return stats;
}

inline ObservedStats expected_counts(const ProtocolConfig& config, const ChannelParams& channel, bool with_truth = false) {
  channel.validate();
  const auto model = BsmModel::get(channel.e_d, channel.p_d);
  const double eta = arm_transmittance(channel);
  return expected_counts(config, channel, yield_table(*model, eta, eta), with_truth);
}

/// Event-level resampling: within each basis, the basis-matched rounds are
/// distributed multinomially over (intensity pair, photon pair, click, error)
/// with the probabilities implied by the expected truth table.
inline ObservedStats sample_counts(const ObservedStats& stats, std::uint64_t seed) {
  if (!stats.has_truth()) throw std::invalid_argument("sample_counts needs a truth table");
  std::mt19937_64 rng(seed);
  ObservedStats out = stats;
  const int nm = stats.truth_n_max;
  for (auto& plane : out.N_click)
    for (auto& row : plane) row.fill(0.0);
  for (auto& plane : out.N_error)
    for (auto& row : plane) row.fill(0.0);
  std::fill(out.truth_click.begin(), out.truth_click.end(), 0.0);
  std::fill(out.truth_error.begin(), out.truth_error.end(), 0.0);

  auto draw = [&rng](std::int64_t trials, double p) -> std::int64_t {
    if (trials <= 0 || p <= 0.0) return 0;
    if (p >= 1.0) return trials;
    std::binomial_distribution<std::int64_t> dist(trials, p);
    return dist(rng);
  };

  for (Basis b : {Basis::Z, Basis::X}) {
    const double Nchi = stats.N_chi[static_cast<int>(b)];
    std::int64_t remaining = static_cast<std::int64_t>(std::llround(Nchi));
    double mass = 1.0;
    for (Intensity ja : kAllIntensities)
      for (Intensity jb : kAllIntensities) {
        if (!stats.has(ja, jb, b)) continue;
        for (int n = 0; n <= nm; ++n)
          for (int m = 0; m <= nm; ++m) {
            const std::size_t idx = stats.truth_index(ja, jb, b, n, m);
            const double pe = Nchi > 0.0 ? stats.truth_error[idx] / Nchi : 0.0;
            const double pc = Nchi > 0.0 ? (stats.truth_click[idx] - stats.truth_error[idx]) / Nchi : 0.0;
            std::int64_t errors = 0, correct = 0;
            if (pe > 0.0 && mass > 0.0) {
              errors = draw(remaining, pe / mass);
              remaining -= errors;
              mass -= pe;
            }
            if (pc > 0.0 && mass > 0.0) {
              correct = draw(remaining, pc / mass);
              remaining -= correct;
              mass -= pc;
            }
            const double clicks = static_cast<double>(errors + correct);
            out.truth_click[idx] = clicks;
            out.truth_error[idx] = static_cast<double>(errors);
            out.N_click[static_cast<int>(ja)][static_cast<int>(jb)][static_cast<int>(b)] += clicks;
            out.N_error[static_cast<int>(ja)][static_cast<int>(jb)][static_cast<int>(b)] += static_cast<double>(errors);
          }
      }
  }
  refresh_summary(out);
  return out;
}

}  // namespace mdiqkd
