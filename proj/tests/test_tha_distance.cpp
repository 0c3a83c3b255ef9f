#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mdiqkd/tha_distance.hpp"
#include "mdiqkd/validation/fock_oracle.hpp"

using namespace mdiqkd;
namespace val = mdiqkd::validation;

namespace {

constexpr double kPi = std::numbers::pi;

ThaConfig tha(ThaCase c, double I, ThaMode mode = ThaMode::ImAndPm, EveAngles a = {}) {
  ThaConfig t;
  t.leak_case = c;
  t.I_max = I;
  t.mode = mode;
  t.angles = a;
  return t;
}

ProtocolConfig four_int() {
  ProtocolConfig c;
  c.variant = Variant::FourIntensity;
  c.gamma_s = 0.5;
  c.gamma_v = 0.15;
  c.gamma_w = 0.02;
  c.p_s = 0.4;
  c.p_v = 0.25;
  c.p_w = 0.25;
  c.p_0 = 0.1;
  return c;
}

}  // namespace

TEST(CoherentOverlap, Examples) {
  const auto same = coherent_overlap(0.7, 1.1, 0.7, 1.1);
  EXPECT_NEAR(same.real(), 1.0, 1e-15);
  EXPECT_NEAR(same.imag(), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(coherent_overlap(0.0, 0.3, 0.9, 2.0)), std::exp(-0.81 / 2.0), 1e-15);
  EXPECT_NEAR(std::abs(coherent_overlap(0.4, 0.0, 0.4, kPi)), std::exp(-2.0 * 0.16), 1e-15);
}

TEST(TraceDistance3, NoLeakageAndAlignedPhases) {
  ProtocolConfig c;
  for (ThaCase k : {ThaCase::Case1, ThaCase::Case2, ThaCase::Case3})
    for (Intensity a : {Intensity::v, Intensity::w})
      EXPECT_EQ(trace_distance_3int(a, Intensity::s, tha(k, 0.0), c), 0.0);
  EXPECT_EQ(trace_distance_3int(Intensity::v, Intensity::w, tha(ThaCase::Case1, 1e-3), c), 0.0);
}

TEST(TraceDistance3, CaseOneMatchesFockOracle) {
  ProtocolConfig c;
  const double I = 1e-3;
  const auto t = tha(ThaCase::Case1, I, ThaMode::ImOnly, {kPi, kPi, 0.0});
  const double lib = trace_distance_3int(Intensity::v, Intensity::w, t, c);
  const double a = std::sqrt(I);
  const val::ReflectedModes flipped{a, kPi}, ref{a, 0.0};
  const double oracle = val::joint_trace_distance(flipped, flipped, ref, ref, 10);
  EXPECT_NEAR(lib, oracle, 1e-9);
  EXPECT_NEAR(lib, std::sqrt(1.0 - std::exp(2.0 * I * (std::cos(kPi) + std::cos(kPi) - 2.0))), 1e-12);
}

TEST(TraceDistance3, CaseOneClosedFormOverRandomPhases) {
  ProtocolConfig c;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.0, 2.0 * kPi);
  for (int i = 0; i < 200; ++i) {
    const double I = std::pow(10.0, -14.0 + 12.0 * U(rng) / (2.0 * kPi));
    const EveAngles ang{U(rng), U(rng), 0.0};
    const auto t = tha(ThaCase::Case1, I, ThaMode::ImOnly, ang);
    const double got = trace_distance_3int(Intensity::v, Intensity::w, t, c);
    const double want =
        std::sqrt(-std::expm1(2.0 * I * (std::cos(ang.theta_v) + std::cos(ang.theta_w) - 2.0)));
    EXPECT_NEAR(got, want, 1e-12 * std::max(1.0, want));
  }
}

TEST(TraceDistance, PureStatesEqualOverlapForm) {
  ProtocolConfig c;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(0.0, 2.0 * kPi);
  for (int i = 0; i < 100; ++i) {
    const double I = 1e-3 * U(rng);
    const auto t = tha(ThaCase::Case2, I, ThaMode::ImOnly, {U(rng), U(rng), 0.0});
    const double bs = std::sqrt(I), bv = std::sqrt(I * c.gamma_v / c.gamma_s), bw = std::sqrt(I * c.gamma_w / c.gamma_s);
    const auto ov = coherent_overlap(bv, t.angles.theta_v, bs, 0.0) * coherent_overlap(bw, t.angles.theta_w, bs, 0.0);
    EXPECT_NEAR(trace_distance_3int(Intensity::v, Intensity::w, t, c), std::sqrt(1.0 - std::norm(ov)), 1e-12);
  }
}

TEST(TraceDistance, BoundedAndNonDecreasingInIntensity) {
  ProtocolConfig c3;
  const auto c4 = four_int();
  for (ThaCase k : {ThaCase::Case1, ThaCase::Case2, ThaCase::Case3}) {
    double prev3 = 0.0, prev4 = 0.0;
    for (double I = 1e-16; I < 0.6; I *= 10.0) {
      const auto t = tha(k, I, ThaMode::ImAndPm, {2.0, 4.0, 1.0});
      const double d3 = trace_distance_3int(Intensity::v, Intensity::w, t, c3);
      const double d4 = trace_distance_4int(Intensity::w, Intensity::zero, t, c4);
      for (double d : {d3, d4}) {
        EXPECT_GE(d, 0.0);
        EXPECT_LE(d, 1.0);
      }
      EXPECT_GE(d3, prev3);
      EXPECT_GE(d4, prev4);
      prev3 = d3;
      prev4 = d4;
    }
  }
}

TEST(TraceDistance4, CaseOneSplitReflectionForm) {
  const auto c = four_int();
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(0.0, 2.0 * kPi);
  for (int i = 0; i < 100; ++i) {
    const double I = std::pow(10.0, -12.0 + 9.0 * U(rng) / (2.0 * kPi));
    const EveAngles ang{U(rng), U(rng), U(rng)};
    const auto t = tha(ThaCase::Case1, I, ThaMode::ImAndPm, ang);
    const double got = trace_distance_4int(Intensity::v, Intensity::w, t, c);
    const double want = std::sqrt(
        -std::expm1(I * (std::cos(ang.theta_v) + std::cos(ang.theta_w) + 2.0 * std::cos(ang.theta_zx) - 4.0)));
    EXPECT_NEAR(got, want, 1e-12 * std::max(1.0, want));
  }
}

TEST(TraceDistance4, CaseTwoMatchesFockOracle) {
  const auto c = four_int();
  const double I = 1e-6;
  const auto t = tha(ThaCase::Case2, I, ThaMode::ImAndPm, {kPi, 0.0, kPi});
  const double lib = trace_distance_4int(Intensity::v, Intensity::v, t, c);
  const double bs = std::sqrt(I / 2.0), bv = std::sqrt(I * c.gamma_v / c.gamma_s / 2.0), pm = std::sqrt(I / 2.0);
  const val::ReflectedModes s{bs, 0.0, true, pm, kPi}, v{bv, kPi, true, pm, 0.0};
  EXPECT_NEAR(lib, val::joint_trace_distance(v, v, s, s, 6), 1e-9);
}

TEST(TraceDistance, CaseThreeBoundDominatesSeries) {
  ProtocolConfig c;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const double I = std::log(2.0) * std::pow(U(rng), 4.0);
    const auto t = tha(ThaCase::Case3, I);
    const double bound = trace_distance_3int(Intensity::v, Intensity::w, t, c);
    const double exact = val::poisson_product_distance(I * c.gamma_v / c.gamma_s, I * c.gamma_w / c.gamma_s, I, I);
    EXPECT_GE(bound, exact - 1e-14);
  }
  EXPECT_THROW(trace_distance_3int(Intensity::v, Intensity::w, tha(ThaCase::Case3, 0.8), c), std::invalid_argument);
}

TEST(CoinImbalance, ExamplesAndStateVectorOracle) {
  EXPECT_EQ(coin_imbalance(0.5, 0.5, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(coin_imbalance(0.3, 0.7, 0.0), 0.5);
  EXPECT_NEAR(coin_imbalance(0.7, 0.3, 0.95), 0.15603448275862069, 1e-16);

  val::cvec z(2), x(2);
  z << 1.0, 0.0;
  x << std::sqrt(0.95), std::sqrt(0.05);
  const val::cvec one = val::cvec::Ones(1);
  EXPECT_NEAR(val::coin_minus_probability(0.7, 0.3, z, x, one, one), coin_imbalance(0.7, 0.3, std::sqrt(0.95)), 1e-15);

  for (double r = 0.0; r <= 1.0; r += 0.05) {
    const double d = coin_imbalance(0.5, 0.5, r);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 0.5);
  }
}

TEST(OverlapZX, ThreeIntensity) {
  ProtocolConfig c;
  EXPECT_EQ(overlap_ZX(tha(ThaCase::Case1, 0.0), c), 1.0);
  EXPECT_NEAR(overlap_ZX(tha(ThaCase::Case1, 1e-3, ThaMode::ImAndPm, {1.0, 2.0, 0.0}), c), 1.0, 1e-15);
  const double I = 1e-3;
  const auto o = coherent_overlap(std::sqrt(I), kPi, std::sqrt(I), 0.0);
  EXPECT_NEAR(overlap_ZX(tha(ThaCase::Case1, I, ThaMode::ImAndPm, {0.0, 0.0, kPi}), c), (o * o).real(), 1e-15);
}

TEST(OverlapZX, FourIntensityMatchesStateVector) {
  auto c = four_int();
  c.p_v = c.p_w = 0.25;
  const double I = 1e-6;
  const auto t = tha(ThaCase::Case1, I, ThaMode::ImAndPm, {0.0, 0.0, kPi});
  const double a = std::sqrt(I / 2.0);
  const val::ReflectedModes s{a, 0.0, true, a, kPi}, v{a, 0.0, true, a, 0.0}, w{a, 0.0, true, a, 0.0};
  const auto sender = val::four_intensity_sender({0.5, 0.5}, {v, w}, s, 6);
  const std::complex<double> ov = sender.z.dot(sender.x);
  EXPECT_NEAR(overlap_ZX(t, c), (ov * ov).real(), 1e-12);
  EXPECT_LE(std::abs(overlap_ZX(t, c)), 1.0);
  EXPECT_NEAR(overlap_ZX(t, c), std::exp(2.0 * (I / 2.0) * (std::cos(kPi) - 1.0)), 1e-12);
}
