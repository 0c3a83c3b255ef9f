#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mdiqkd/keyrate.hpp"

using namespace mdiqkd;

namespace {

struct HandInputs {
  DecoyEstimates est;
  PhaseErrorEstimate phase;
  ObservedStats stats;
  ChannelParams channel;
  EpsilonBudget budget;
};

HandInputs hand_inputs(double eps_total) {
  HandInputs h;
  h.est.n00_L = 1e4;
  h.est.n11_L = 5e5;
  h.phase.e_ph_U = 0.03;
  h.stats.N = 1e10;
  h.stats.Z_ss_size = 6e5;
  h.stats.E_Z_ss = 0.02;
  h.budget.eps_total = eps_total;
  h.budget.eps_sec_override = 1e-10;
  return h;
}

ThaConfig case1_im(double I) {
  ThaConfig t;
  t.leak_case = ThaCase::Case1;
  t.I_max = I;
  t.mode = ThaMode::ImOnly;
  return t;
}

EvalOptions detections(int grid = 8, int sweeps = 2) {
  EvalOptions o;
  o.lp.trials = AzumaTrials::Detections;
  o.grid = grid;
  o.sweeps = sweeps;
  return o;
}

}  // namespace

// Reference evaluated at 40 digits.
TEST(KeyLength, HandAssembledExample) {
  auto h = hand_inputs(1e-21);
  const auto r = key_length(h.est, h.phase, h.stats, h.channel, h.budget);
  EXPECT_EQ(r.status, kStatusOk);
  EXPECT_NEAR(r.ell, 310848.46096768655, 1e-6);
  EXPECT_NEAR(r.leak_EC, 101837.19063011086, 1e-7);
  EXPECT_NEAR(r.rate, r.ell / 1e10, 1e-20);
  EXPECT_NEAR(reassemble_ell(r), r.ell, 1e-9 * r.ell);
}

TEST(KeyLength, SecrecyGapMustBePositive) {
  auto h = hand_inputs(2e-20);
  const auto r = key_length(h.est, h.phase, h.stats, h.channel, h.budget);
  EXPECT_TRUE(r.status & kStatusEpsInfeasible);
  EXPECT_EQ(r.ell, 0.0);
  EXPECT_TRUE(std::isinf(r.pen_sec));
  EXPECT_EQ(status_string(r.status), "eps-infeasible");
}

TEST(KeyLength, PhaseErrorClampedAtHalf) {
  auto h = hand_inputs(1e-21);
  h.est.n00_L = 1e6;
  h.phase.e_ph_U = 0.5;
  const auto half = key_length(h.est, h.phase, h.stats, h.channel, h.budget);
  h.phase.e_ph_U = 0.8;
  const auto big = key_length(h.est, h.phase, h.stats, h.channel, h.budget);
  EXPECT_EQ(half.ell_raw, big.ell_raw);
  EXPECT_NEAR(half.ell_raw, 1e6 - half.leak_EC - half.pen_sec - half.pen_cor, 1e-6);
}

TEST(KeyLength, ZeroEstimatesGiveNoKey) {
  auto h = hand_inputs(1e-21);
  h.est = DecoyEstimates{};
  const auto r = key_length(h.est, h.phase, h.stats, h.channel, h.budget);
  EXPECT_EQ(r.ell, 0.0);
  EXPECT_LT(r.ell_raw, 0.0);
  h.est.status = LpStatus::Infeasible;
  h.est.n00_L = 1e9;
  const auto f = key_length(h.est, h.phase, h.stats, h.channel, h.budget);
  EXPECT_TRUE(f.status & kStatusLpFailure);
  EXPECT_EQ(f.ell, 0.0);
}

TEST(Evaluate, ReassemblyMatchesAndNoLeakKeyAtShortRange) {
  ProtocolConfig c;
  ChannelParams ch;
  ch.L = 10.0;
  ThaConfig none;
  none.mode = ThaMode::None;
  const auto r = evaluate(c, ch, none);
  EXPECT_EQ(r.status, kStatusOk);
  EXPECT_GT(r.ell, 0.0);
  EXPECT_NEAR(reassemble_ell(r), r.ell, 1e-9 * r.ell);
  EXPECT_EQ(r.path, PhasePath::Serfling);
  EXPECT_EQ(r.evaluations, 1);
}

TEST(Evaluate, AnglesIrrelevantWithoutLeakage) {
  ProtocolConfig c;
  ChannelParams ch;
  ch.L = 20.0;
  auto t = case1_im(0.0);
  t.mode = ThaMode::ImAndPm;
  const auto base = evaluate(c, ch, t);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(0.0, 6.28);
  for (int i = 0; i < 5; ++i) {
    t.angles = {U(rng), U(rng), U(rng)};
    EXPECT_EQ(evaluate(c, ch, t).ell_raw, base.ell_raw);
  }
}

TEST(EveSearch, CaseThreeNeedsOneEvaluation) {
  ProtocolConfig c;
  ChannelParams ch;
  ch.L = 20.0;
  ThaConfig t;
  t.leak_case = ThaCase::Case3;
  t.I_max = 1e-7;
  const auto r = eve_worst_case(c, ch, t);
  EXPECT_EQ(r.evaluations, 1);
  EXPECT_EQ(r.path, PhasePath::Serfling);
}

TEST(EveSearch, WorstCaseDominatesRandomAngles) {
  ProtocolConfig c;
  ChannelParams ch;
  ch.L = 40.0;
  const auto t = case1_im(1e-16);
  const auto stats = expected_counts(c, ch);
  const auto opts = detections();
  const auto worst = eve_worst_case(stats, c, ch, t, opts);
  auto exhaustive_opts = opts;
  exhaustive_opts.search = EveSearch::Exhaustive;
  const auto exhaustive = eve_worst_case(stats, c, ch, t, exhaustive_opts);
  EXPECT_NEAR(worst.ell_raw, exhaustive.ell_raw, 1e-9 * std::abs(exhaustive.ell_raw));
  EXPECT_LE(worst.evaluations, exhaustive.evaluations);
  std::mt19937_64 rng(40);
  std::uniform_real_distribution<double> U(0.0, 2.0 * std::numbers::pi);
  for (int i = 0; i < 20; ++i) {
    auto probe = t;
    probe.angles = {U(rng), U(rng), 0.0};
    const auto r = evaluate_at(stats, c, ch, probe, opts);
    EXPECT_LE(worst.ell_raw, r.ell_raw + 1e-9 * std::abs(r.ell_raw));
  }
}

TEST(EveSearch, KeyNonIncreasingInLeakage) {
  ProtocolConfig c;
  ChannelParams ch;
  ch.L = 20.0;
  const auto stats = expected_counts(c, ch);
  double prev = std::numeric_limits<double>::infinity();
  for (double I : {0.0, 1e-18, 1e-17, 1e-16, 1e-15}) {
    const auto r = eve_worst_case(stats, c, ch, case1_im(I), detections());
    EXPECT_LE(r.ell_raw, prev + 1e-9 * std::abs(prev)) << I;
    prev = r.ell_raw;
  }
}

TEST(Optimizer, ImprovesOnSeedAndKeepsConstraints) {
  ProtocolConfig seed;
  seed.gamma_s = 0.2;
  ChannelParams ch;
  ch.L = 60.0;
  ThaConfig none;
  none.mode = ThaMode::None;
  OptimizeSettings s;
  s.restarts = 1;
  s.max_iterations = 60;
  const auto r = optimize_keyrate(seed, ch, none, EvalOptions{}, s);
  const auto at_seed = evaluate(seed, ch, none);
  EXPECT_GE(r.ell_raw, at_seed.ell_raw);
  EXPECT_NO_THROW(r.user.validate());
  EXPECT_GT(r.evaluations, 1);
  EXPECT_DOUBLE_EQ(r.user.gamma_w, seed.gamma_w);
}

TEST(Optimizer, ScoreOrdersPositiveAboveNonPositive) {
  KeyRateResult pos, neg, bad;
  pos.ell_raw = 1.0;
  neg.ell_raw = -1.0;
  neg.n11_L = 1e6;
  bad.ell_raw = -std::numeric_limits<double>::infinity();
  EXPECT_GT(optimizer_score(pos, 1e14), optimizer_score(neg, 1e14));
  EXPECT_GT(optimizer_score(neg, 1e14), optimizer_score(bad, 1e14));
}

TEST(Cutoff, BisectsMonotonePredicate) {
  EXPECT_NEAR(find_cutoff([](double L) { return L < 37.3; }, 0.0, 100.0, 0.01), 37.3, 0.01);
  EXPECT_EQ(find_cutoff([](double) { return false; }, 0.0, 100.0), 0.0);
  EXPECT_EQ(find_cutoff([](double) { return true; }, 0.0, 100.0), 100.0);
}
