#include <gtest/gtest.h>

#include <cmath>

#include "mdiqkd/channel_sim.hpp"
#include "mdiqkd/validation/bsm_monte_carlo.hpp"

using namespace mdiqkd;
namespace val = mdiqkd::validation;

TEST(Channel, ArmTransmittance) {
  ChannelParams ch;
  EXPECT_DOUBLE_EQ(arm_transmittance(ch), ch.eta_det);
  ch.L = 50.0;
  EXPECT_NEAR(arm_transmittance(ch), 0.079056941504209483, 1e-16);
}

TEST(Channel, NoLightNoDarkCountsNoClicks) {
  ChannelParams ch;
  ch.p_d = 0.0;
  const auto y = fock_yields(0, 0, 0.3, 0.3, ch);
  EXPECT_EQ(y.Y[0], 0.0);
  EXPECT_EQ(y.Y[1], 0.0);
  // A single photon can never fire two detectors without dark counts.
  const auto one = fock_yields(1, 0, 0.9, 0.9, ch);
  EXPECT_EQ(one.Y[0], 0.0);
  EXPECT_THROW(fock_yields(-1, 0, 0.5, 0.5, ch), std::invalid_argument);
  EXPECT_THROW(fock_yields(kPhotonBand + 1, 0, 0.5, 0.5, ch), std::out_of_range);
}

TEST(Channel, SinglePhotonPairIdealRelay) {
  ChannelParams ch;
  ch.e_d = 0.0;
  ch.p_d = 0.0;
  const auto y = fock_yields(1, 1, 1.0, 1.0, ch);
  // H,V always announce a Bell state and H,H never do; in X each of D,D and D,A succeeds half the time.
  EXPECT_NEAR(y.Y[static_cast<int>(Basis::Z)], 0.5, 1e-14);
  EXPECT_NEAR(y.EY[static_cast<int>(Basis::Z)], 0.0, 1e-14);
  EXPECT_NEAR(y.Y[static_cast<int>(Basis::X)], 0.5, 1e-14);
  EXPECT_NEAR(y.EY[static_cast<int>(Basis::X)], 0.0, 1e-14);
}

TEST(Channel, YieldsMatchMonteCarlo) {
  struct Setting {
    double e_d, p_d, eta_a, eta_b;
  };
  constexpr long kShots = 20000;
  int checks = 0, outliers = 0;
  for (const Setting s : {Setting{0.01, 1e-3, 0.3, 0.6}, Setting{0.05, 1e-2, 0.9, 0.8}}) {
    ChannelParams ch;
    ch.e_d = s.e_d;
    ch.p_d = s.p_d;
    val::BsmMonteCarlo mc(s.e_d, s.p_d, 1234);
    for (int n = 0; n < 6; ++n)
      for (int m = 0; m < 6; ++m) {
        const auto lib = fock_yields(n, m, s.eta_a, s.eta_b, ch);
        for (Basis b : {Basis::Z, Basis::X}) {
          const auto est = mc.run(n, m, s.eta_a, s.eta_b, b, kShots);
          const double want[2] = {lib.Y[static_cast<int>(b)], lib.EY[static_cast<int>(b)]};
          const double got[2] = {est.click, est.error};
          for (int k = 0; k < 2; ++k) {
            const double sigma = std::sqrt(want[k] * (1.0 - want[k]) / kShots);
            ++checks;
            if (std::abs(got[k] - want[k]) > 3.0 * sigma + 1e-12) ++outliers;
          }
        }
      }
  }
  EXPECT_LE(outliers, 0.02 * checks) << outliers << " of " << checks << " beyond 3 sigma";
}

TEST(Channel, YieldsMatchPermanentExpansion) {
  ChannelParams ch;
  ch.e_d = 0.03;
  ch.p_d = 1e-4;
  val::BsmMonteCarlo oracle(ch.e_d, ch.p_d, 1);
  for (int n = 0; n <= 4; ++n)
    for (int m = 0; m <= 4; ++m) {
      const auto lib = fock_yields(n, m, 0.7, 0.4, ch);
      for (Basis b : {Basis::Z, Basis::X}) {
        const auto ex = oracle.exact(n, m, 0.7, 0.4, b);
        EXPECT_NEAR(lib.Y[static_cast<int>(b)], ex.click, 1e-12 + 1e-10 * ex.click) << n << "," << m;
        EXPECT_NEAR(lib.EY[static_cast<int>(b)], ex.error, 1e-12 + 1e-10 * ex.error) << n << "," << m;
      }
    }
}

TEST(Channel, ErrorsBoundedByClicksAndLossMonotone) {
  ChannelParams ch;
  for (int n = 0; n <= 8; ++n)
    for (int m = 0; m <= 8; ++m) {
      const auto lo = fock_yields(n, m, 0.01, 0.01, ch);
      const auto hi = fock_yields(n, m, 0.05, 0.05, ch);
      for (int b = 0; b < 2; ++b) {
        EXPECT_LE(lo.EY[b], lo.Y[b] + 1e-18);
        EXPECT_LE(hi.EY[b], hi.Y[b] + 1e-18);
        EXPECT_GE(lo.Y[b], 0.0);
        EXPECT_LE(hi.Y[b], 1.0);
        // Low transmittance: more transmission can only add clicks.
        if (n + m > 0) {
          EXPECT_GE(hi.Y[b], lo.Y[b]) << n << "," << m;
        }
      }
    }
}

TEST(ExpectedCounts, MatchesDirectSum) {
  ProtocolConfig c;
  c.N = 1e12;
  ChannelParams ch;
  ch.L = 10.0;
  const auto st = expected_counts(c, ch);
  const double eta = arm_transmittance(ch);
  for (Basis b : {Basis::Z, Basis::X}) {
    const double pb = c.basis_prob(b);
    for (Intensity ja : c.intensities(b))
      for (Intensity jb : c.intensities(b)) {
        double click = 0.0, error = 0.0;
        for (int n = 0; n <= kPhotonBand; ++n)
          for (int m = 0; m <= kPhotonBand; ++m) {
            const double q = poisson_pmf(n, c.gamma(ja)) * poisson_pmf(m, c.gamma(jb));
            if (q < 1e-30) continue;
            const auto y = fock_yields(n, m, eta, eta, ch);
            click += q * y.Y[static_cast<int>(b)];
            error += q * y.EY[static_cast<int>(b)];
          }
        const double w = c.N * c.p_Zac * pb * pb * c.prob_in_basis(ja, b) * c.prob_in_basis(jb, b);
        EXPECT_NEAR(st.click(ja, jb, b), w * click, 1e-10 * w * click);
        EXPECT_NEAR(st.error(ja, jb, b), w * error, 1e-10 * w * error);
      }
  }
  EXPECT_DOUBLE_EQ(st.Z_ss_size, st.click(Intensity::s, Intensity::s, Basis::Z));
  EXPECT_GT(st.total_clicks, st.Z_ss_size);
}

TEST(ExpectedCounts, LinearInRoundsAndEmptyRun) {
  ProtocolConfig c;
  ChannelParams ch;
  ch.L = 30.0;
  c.N = 1e10;
  const auto a = expected_counts(c, ch);
  c.N = 3e10;
  const auto b = expected_counts(c, ch);
  EXPECT_NEAR(b.total_clicks, 3.0 * a.total_clicks, 1e-12 * b.total_clicks);
  EXPECT_NEAR(b.click(Intensity::v, Intensity::w, Basis::X), 3.0 * a.click(Intensity::v, Intensity::w, Basis::X),
              1e-12 * b.click(Intensity::v, Intensity::w, Basis::X));
  c.N = 0.0;
  const auto z = expected_counts(c, ch);
  EXPECT_EQ(z.total_clicks, 0.0);
  EXPECT_EQ(z.Z_ss_size, 0.0);
  EXPECT_EQ(z.E_Z_ss, 0.0);
}

TEST(ExpectedCounts, TruthTableSumsToCells) {
  ProtocolConfig c;
  c.N = 1e11;
  ChannelParams ch;
  ch.L = 20.0;
  const auto st = expected_counts(c, ch, true);
  ASSERT_TRUE(st.has_truth());
  double sum = 0.0;
  for (int n = 0; n <= st.truth_n_max; ++n)
    for (int m = 0; m <= st.truth_n_max; ++m) sum += st.truth(Intensity::s, Intensity::v, Basis::Z, n, m);
  EXPECT_NEAR(sum, st.click(Intensity::s, Intensity::v, Basis::Z), 1e-12 * sum);
}

TEST(SampleCounts, DeterministicAndConsistent) {
  ProtocolConfig c;
  c.N = 1e9;
  ChannelParams ch;
  ch.L = 20.0;
  const auto expected = expected_counts(c, ch, true);
  const auto a = sample_counts(expected, 42);
  const auto b = sample_counts(expected, 42);
  const auto d = sample_counts(expected, 43);
  EXPECT_EQ(a.N_click, b.N_click);
  EXPECT_EQ(a.N_error, b.N_error);
  EXPECT_NE(a.N_click, d.N_click);
  for (Basis x : {Basis::Z, Basis::X})
    for (Intensity ja : c.intensities(x))
      for (Intensity jb : c.intensities(x)) {
        const double mean = expected.click(ja, jb, x);
        EXPECT_NEAR(a.click(ja, jb, x), mean, 6.0 * std::sqrt(mean) + 1.0);
        EXPECT_LE(a.error(ja, jb, x), a.click(ja, jb, x));
        EXPECT_EQ(a.click(ja, jb, x), std::floor(a.click(ja, jb, x)));
      }
  EXPECT_THROW(sample_counts(expected_counts(c, ch), 1), std::invalid_argument);
}

TEST(SampleCounts, EmptyRunStaysEmpty) {
  ProtocolConfig c;
  c.N = 0.0;
  ChannelParams ch;
  const auto s = sample_counts(expected_counts(c, ch, true), 7);
  for (Basis x : {Basis::Z, Basis::X})
    for (Intensity ja : c.intensities(x))
      for (Intensity jb : c.intensities(x)) EXPECT_EQ(s.click(ja, jb, x), 0.0);
}
