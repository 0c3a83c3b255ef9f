#pragma once

// Event-level Monte Carlo of the polarization Bell-state relay. Output photon
// patterns are drawn from permanent amplitudes of the linear-optics network.

#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <tuple>
#include <vector>

#include "mdiqkd/model_core.hpp"

namespace mdiqkd::validation {

using cplx = std::complex<double>;

/// Ryser's formula with Gray-code subset updates.
inline cplx permanent(const std::vector<std::vector<cplx>>& a) {
  const int n = static_cast<int>(a.size());
  if (n == 0) return 1.0;
  std::vector<cplx> row_sum(n, 0.0);
  cplx total = 0.0;
  std::uint64_t gray_prev = 0;
  for (std::uint64_t s = 1; s < (std::uint64_t{1} << n); ++s) {
    const std::uint64_t gray = s ^ (s >> 1);
    const std::uint64_t diff = gray ^ gray_prev;
    const int col = std::countr_zero(diff);
    const double sign_add = (gray & diff) ? 1.0 : -1.0;
    for (int i = 0; i < n; ++i) row_sum[i] += sign_add * a[i][col];
    gray_prev = gray;
    cplx prod = 1.0;
    for (int i = 0; i < n; ++i) prod *= row_sum[i];
    const int bits = std::popcount(gray);
    total += ((n - bits) % 2 == 0 ? 1.0 : -1.0) * prod;
  }
  return total;
}

/// Output slots: 0 c_H, 1 c_V, 2 d_H, 3 d_V.
struct PatternTable {
  std::vector<std::array<int, 4>> patterns;
  std::vector<double> prob;
};

/// Exact output-pattern law for k photons polarized at `angle_a` entering one
/// beam-splitter port and l photons at `angle_b` entering the other.
inline PatternTable bsm_patterns(int k, int l, double angle_a, double angle_b) {
  const double r = 1.0 / std::sqrt(2.0);
  const std::array<cplx, 4> ua{r * std::cos(angle_a), r * std::sin(angle_a), r * std::cos(angle_a), r * std::sin(angle_a)};
  const std::array<cplx, 4> ub{r * std::cos(angle_b), r * std::sin(angle_b), -r * std::cos(angle_b), -r * std::sin(angle_b)};
  const int T = k + l;
  auto fact = [](int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
  };
  PatternTable out;
  for (int s0 = 0; s0 <= T; ++s0)
    for (int s1 = 0; s0 + s1 <= T; ++s1)
      for (int s2 = 0; s0 + s1 + s2 <= T; ++s2) {
        const std::array<int, 4> s{s0, s1, s2, T - s0 - s1 - s2};
        std::vector<int> cols;
        for (int o = 0; o < 4; ++o)
          for (int c = 0; c < s[o]; ++c) cols.push_back(o);
        std::vector<std::vector<cplx>> M(T, std::vector<cplx>(T));
        for (int i = 0; i < T; ++i)
          for (int j = 0; j < T; ++j) M[i][j] = (i < k ? ua : ub)[cols[j]];
        const double denom = fact(k) * fact(l) * fact(s[0]) * fact(s[1]) * fact(s[2]) * fact(s[3]);
        const double p = std::norm(permanent(M)) / denom;
        if (p > 0.0) {
          out.patterns.push_back(s);
          out.prob.push_back(p);
        }
      }
  return out;
}

struct McEstimate {
  double click = 0.0;
  double error = 0.0;
  long shots = 0;
};

/// Shot-by-shot simulation: random bits, binomial loss per photon, a pattern
/// drawn from the permanent law, dark counts on empty slots, threshold clicks.
class BsmMonteCarlo {
 public:
  BsmMonteCarlo(double e_d, double p_d, std::uint64_t seed) : mis_(std::asin(std::sqrt(e_d))), p_d_(p_d), rng_(seed) {}

  /// Expectation of the same event model, summed exactly over bits, losses, patterns and dark counts.
  McEstimate exact(int n, int m, double eta_a, double eta_b, Basis basis) {
    McEstimate est;
    auto binom = [](int N, int k, double p) {
      double c = 1.0;
      for (int i = 1; i <= k; ++i) c = c * (N - k + i) / i;
      return c * std::pow(p, k) * std::pow(1.0 - p, N - k);
    };
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y)
        for (int k = 0; k <= n; ++k)
          for (int l = 0; l <= m; ++l) {
            const double w = 0.25 * binom(n, k, eta_a) * binom(m, l, eta_b);
            if (w == 0.0) continue;
            const auto& table = cached(k, l, basis, x, y);
            for (std::size_t i = 0; i < table.prob.size(); ++i) {
              int occupied = 0;
              for (int o = 0; o < 4; ++o)
                if (table.patterns[i][o] > 0) occupied |= 1 << o;
              for (int mask = 0; mask < 16; ++mask) {
                if ((occupied & ~mask) != 0) continue;
                double p = w * table.prob[i];
                for (int o = 0; o < 4; ++o) {
                  if (occupied & (1 << o)) continue;
                  p *= (mask & (1 << o)) ? p_d_ : 1.0 - p_d_;
                }
                const bool minus = mask == (1 | 8) || mask == (2 | 4);
                const bool plus = mask == (1 | 2) || mask == (4 | 8);
                if (!minus && !plus) continue;
                est.click += p;
                if (basis == Basis::Z ? (x == y) : (x == y ? minus : plus)) est.error += p;
              }
            }
          }
    return est;
  }

  McEstimate run(int n, int m, double eta_a, double eta_b, Basis basis, long shots) {
    McEstimate est;
    est.shots = shots;
    std::bernoulli_distribution coin(0.5), dark(p_d_);
    std::binomial_distribution<int> loss_a(n, eta_a), loss_b(m, eta_b);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    long clicks = 0, errors = 0;
    for (long s = 0; s < shots; ++s) {
      const int x = coin(rng_), y = coin(rng_);
      const int k = n > 0 ? loss_a(rng_) : 0;
      const int l = m > 0 ? loss_b(rng_) : 0;
      const auto& table = cached(k, l, basis, x, y);
      double u = U(rng_);
      std::size_t pick = table.prob.size() - 1;
      for (std::size_t i = 0; i < table.prob.size(); ++i) {
        if (u < table.prob[i]) {
          pick = i;
          break;
        }
        u -= table.prob[i];
      }
      int mask = 0;
      for (int o = 0; o < 4; ++o)
        if ((!table.patterns.empty() && table.patterns[pick][o] > 0) || dark(rng_)) mask |= 1 << o;
      const bool minus = mask == (1 | 8) || mask == (2 | 4);
      const bool plus = mask == (1 | 2) || mask == (4 | 8);
      if (!minus && !plus) continue;
      ++clicks;
      const bool err = basis == Basis::Z ? (x == y) : (x == y ? minus : plus);
      if (err) ++errors;
    }
    est.click = static_cast<double>(clicks) / shots;
    est.error = static_cast<double>(errors) / shots;
    return est;
  }

 private:
  double angle(Basis b, int bit) const {
    const double q = std::numbers::pi / 4.0;
    return b == Basis::Z ? (bit == 0 ? 0.0 : 2.0 * q) : (bit == 0 ? q : 3.0 * q);
  }

  const PatternTable& cached(int k, int l, Basis b, int x, int y) {
    const auto key = std::make_tuple(k, l, static_cast<int>(b), x, y);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    auto table = bsm_patterns(k, l, angle(b, x), angle(b, y) + mis_);
    if (table.patterns.empty()) {
      table.patterns.push_back({0, 0, 0, 0});
      table.prob.push_back(1.0);
    }
    return cache_.emplace(key, std::move(table)).first->second;
  }

  double mis_;
  double p_d_;
  std::mt19937_64 rng_;
  std::map<std::tuple<int, int, int, int, int>, PatternTable> cache_;
};

}  // namespace mdiqkd::validation
