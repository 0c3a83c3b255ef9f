#pragma once

// Cross-module oracle suites shared by the `validate` command, the unit tests
// and the acceptance runner.

#include <gsl/gsl_cdf.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mdiqkd/channel_sim.hpp"
#include "mdiqkd/decoy_lp.hpp"
#include "mdiqkd/lp.hpp"
#include "mdiqkd/phase_error.hpp"
#include "mdiqkd/tha_distance.hpp"
#include "mdiqkd/validation/coin_oracle.hpp"
#include "mdiqkd/validation/fock_oracle.hpp"
#include "mdiqkd/validation/simplex_oracle.hpp"

namespace mdiqkd::validation {

struct SuiteResult {
  std::string name;
  long checks = 0;
  long failures = 0;
  double worst = 0.0;  // largest observed discrepancy, suite-specific units
  std::string note;

  bool passed() const { return failures == 0 && checks > 0; }

  void check(bool ok) {
    ++checks;
    if (!ok) ++failures;
  }
  void track(double discrepancy) { worst = std::max(worst, discrepancy); }
};

inline std::string format_result(const SuiteResult& r) {
  std::ostringstream os;
  os.precision(3);
  os << (r.passed() ? "PASS " : "FAIL ") << r.name << ": checks=" << r.checks << " failures=" << r.failures
     << " worst=" << std::scientific << r.worst;
  if (!r.note.empty()) os << " (" << r.note << ")";
  return os.str();
}

namespace detail {

class Draw {
 public:
  explicit Draw(std::uint64_t seed) : rng_(seed) {}
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  double log_uniform(double lo_exp, double hi_exp) { return std::pow(10.0, uniform(lo_exp, hi_exp)); }
  double angle() { return uniform(0.0, 2.0 * std::numbers::pi); }
  int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng_); }
  bool coin() { return integer(0, 1) == 1; }
  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline ProtocolConfig random_protocol(Draw& d, Variant variant) {
  ProtocolConfig c;
  c.variant = variant;
  c.gamma_s = d.uniform(0.15, 0.9);
  c.gamma_v = c.gamma_s * d.uniform(0.05, 0.6);
  c.gamma_w = c.gamma_v * d.uniform(1e-3, 0.4);
  double w[4];
  double sum = 0.0;
  for (double& x : w) sum += (x = d.uniform(0.1, 1.0));
  if (variant == Variant::ThreeIntensity) {
    sum -= w[3];
    c.p_s = w[0] / sum;
    c.p_v = w[1] / sum;
    c.p_w = 1.0 - c.p_s - c.p_v;
    c.p_0 = 0.0;
    c.p_Z = d.uniform(0.2, 0.8);
  } else {
    c.p_s = w[0] / sum;
    c.p_v = w[1] / sum;
    c.p_w = w[2] / sum;
    c.p_0 = 1.0 - c.p_s - c.p_v - c.p_w;
  }
  c.p_Zac = d.uniform(0.5, 1.0);
  c.N = d.log_uniform(11.0, 15.0);
  return c;
}

/// Reflected light of one sender for intensity `j`, built from the physical model.
inline ReflectedModes modes_for(Intensity j, const ThaConfig& tha, const ProtocolConfig& c) {
  const double ratio = c.gamma_s > 0.0 ? c.gamma(j) / c.gamma_s : 0.0;
  const double beta_sq = tha.leak_case == ThaCase::Case1 ? tha.I_max : tha.I_max * ratio;
  const double theta = j == Intensity::v ? tha.angles.theta_v : j == Intensity::w ? tha.angles.theta_w : 0.0;
  ReflectedModes r;
  r.has_pm = true;
  const bool pm_on = tha.mode == ThaMode::ImAndPm;
  if (c.variant == Variant::ThreeIntensity) {
    // Comparisons are within one basis, so the PM mode is identical on both sides.
    r.im_amp = std::sqrt(beta_sq);
    r.im_phase = theta;
    r.pm_amp = pm_on ? std::sqrt(tha.I_max) : 0.0;
    r.pm_phase = 0.0;
  } else {
    r.im_amp = std::sqrt(beta_sq / 2.0);
    r.im_phase = theta;
    r.pm_amp = pm_on ? std::sqrt(tha.I_max / 2.0) : 0.0;
    r.pm_phase = j == Intensity::s ? tha.angles.theta_zx : 0.0;
  }
  return r;
}

/// Photon-number mean of one sender's phase-randomized reflection.
inline double case3_mean(Intensity j, const ThaConfig& tha, const ProtocolConfig& c) {
  const double beta_sq = tha.I_max * c.gamma(j) / c.gamma_s;
  return c.variant == Variant::ThreeIntensity ? beta_sq : 0.5 * (beta_sq + tha.I_max);
}

inline Intensity random_intensity(Draw& d, const ProtocolConfig& c) {
  const auto all = c.variant == Variant::ThreeIntensity
                       ? std::vector<Intensity>{Intensity::s, Intensity::v, Intensity::w}
                       : std::vector<Intensity>{Intensity::s, Intensity::v, Intensity::w, Intensity::zero};
  return all[d.integer(0, static_cast<int>(all.size()) - 1)];
}

}  // namespace detail

/// Cases 1-2 against the Fock-space trace norm, both protocols; Case 3 bound
/// against the exact diagonal series. `draws` of each.
inline SuiteResult trace_distance_suite(std::uint64_t seed, int draws = 200, double tol = 1e-9) {
  SuiteResult res;
  res.name = "trace-distance";
  detail::Draw d(seed);
  constexpr int kDim = 8;
  for (int i = 0; i < draws; ++i) {
    const Variant variant = i % 2 == 0 ? Variant::ThreeIntensity : Variant::FourIntensity;
    ProtocolConfig c = detail::random_protocol(d, variant);
    ThaConfig tha;
    tha.leak_case = d.coin() ? ThaCase::Case1 : ThaCase::Case2;
    tha.I_max = d.log_uniform(-8.0, -2.0);
    tha.mode = d.coin() ? ThaMode::ImAndPm : ThaMode::ImOnly;
    tha.angles = {d.angle(), d.angle(), d.angle()};
    const Intensity a1 = detail::random_intensity(d, c), b1 = detail::random_intensity(d, c);
    const Intensity a2 = detail::random_intensity(d, c), b2 = detail::random_intensity(d, c);
    const double lib = trace_distance_pair(a1, b1, a2, b2, tha, c);
    const double ref = joint_trace_distance(detail::modes_for(a1, tha, c), detail::modes_for(b1, tha, c),
                                            detail::modes_for(a2, tha, c), detail::modes_for(b2, tha, c), kDim);
    res.track(std::abs(lib - ref));
    res.check(std::abs(lib - ref) <= tol);
  }
  for (int i = 0; i < draws; ++i) {
    const Variant variant = i % 2 == 0 ? Variant::ThreeIntensity : Variant::FourIntensity;
    ProtocolConfig c = detail::random_protocol(d, variant);
    c.P_cut = d.integer(1, 20);
    ThaConfig tha;
    tha.leak_case = ThaCase::Case3;
    tha.I_max = d.log_uniform(-9.0, std::log10(std::log(2.0)));
    tha.mode = d.coin() ? ThaMode::ImAndPm : ThaMode::ImOnly;
    const Intensity a = detail::random_intensity(d, c), b = detail::random_intensity(d, c);
    const double bound = trace_distance_pair(a, b, Intensity::s, Intensity::s, tha, c);
    const double exact = poisson_product_distance(detail::case3_mean(a, tha, c), detail::case3_mean(b, tha, c),
                                                  detail::case3_mean(Intensity::s, tha, c),
                                                  detail::case3_mean(Intensity::s, tha, c));
    res.check(bound >= exact - 1e-15 && bound <= 1.0);
  }
  return res;
}

/// Truth-table reference for one decoy objective.
struct LpTarget {
  Basis basis;
  DecoyTarget target;
};

namespace detail {

inline double truth_value(const ObservedStats& st, const TraceDistanceSet& D, Basis b, DecoyTarget t) {
  const int n = t == DecoyTarget::Min00 ? 0 : 1;
  return t == DecoyTarget::MaxErr11 ? st.truth_err(D.ref, D.ref, b, n, n) : st.truth(D.ref, D.ref, b, n, n);
}

/// Point of the LP built from the truth table: every cell variable at its true value, deviations and leakage at 0.
inline std::vector<double> truth_point(const LpInstance& lp, const ObservedStats& st, const TraceDistanceSet& D, Basis b,
                                       DecoyTarget t) {
  std::vector<double> x(lp.num_vars(), 0.0);
  const double Nchi = st.N_chi[static_cast<int>(b)];
  for (int j = 0; j < lp.num_vars(); ++j) {
    const std::string& name = lp.names[j];
    int n = 0, m = 0;
    if (std::sscanf(name.c_str(), "E_%d_%d", &n, &m) == 2 || std::sscanf(name.c_str(), "N_%d_%d", &n, &m) == 2) {
      x[j] = (t == DecoyTarget::MaxErr11 ? st.truth_err(D.ref, D.ref, b, n, m) : st.truth(D.ref, D.ref, b, n, m)) / Nchi;
    }
  }
  return x;
}

/// Pins every leakage term at its negative extreme, as a wrong-sign leakage model would.
inline void corrupt_leakage(LpInstance& lp) {
  for (int j = 0; j < lp.num_vars(); ++j)
    if (lp.names[j].rfind("L_", 0) == 0) lp.hi[j] = lp.lo[j];
}

}  // namespace detail

struct LpSuiteOptions {
  int configs = 100;
  int oracle_instances = 50;
  double oracle_tol = 1e-8;
  bool corrupt_D = false;
};

/// Expected-value sandwich, asymptotic reduction and second-solver agreement
/// over random channel/protocol/leakage draws.
inline SuiteResult lp_sandwich_suite(std::uint64_t seed, const LpSuiteOptions& opt = {}) {
  SuiteResult res;
  res.name = opt.corrupt_D ? "lp-sandwich[corrupted-D]" : "lp-sandwich";
  detail::Draw d(seed);
  int oracle_done = 0;
  long sandwich_fail = 0, reduction_fail = 0, oracle_fail = 0;
  for (int i = 0; i < opt.configs; ++i) {
    const Variant variant = i % 2 == 0 ? Variant::ThreeIntensity : Variant::FourIntensity;
    ProtocolConfig c = detail::random_protocol(d, variant);
    ChannelParams ch;
    ch.L = d.uniform(0.0, 120.0);
    // Detector settings come from a small set so the relay model cache is reused.
    constexpr double kMisalignment[] = {0.005, 0.01, 0.02};
    constexpr double kDark[] = {1e-7, 1e-6, 5e-6};
    ch.e_d = kMisalignment[d.integer(0, 2)];
    ch.p_d = kDark[d.integer(0, 2)];
    ThaConfig tha;
    if (d.coin()) {
      tha.leak_case = d.coin() ? ThaCase::Case1 : ThaCase::Case2;
      tha.I_max = d.log_uniform(-14.0, -4.0);
      tha.mode = d.coin() ? ThaMode::ImAndPm : ThaMode::ImOnly;
      tha.angles = {d.angle(), d.angle(), d.angle()};
    } else {
      tha.mode = ThaMode::None;
    }
    DecoyLpOptions lpopt;
    lpopt.form = d.coin() ? LpForm::PerCell : LpForm::Collapsed;
    lpopt.trials = d.coin() ? AzumaTrials::Rounds : AzumaTrials::Detections;
    const double eps_each = d.log_uniform(-14.0, -8.0);
    const auto st = expected_counts(c, ch, true);

    std::vector<LpTarget> targets;
    if (variant == Variant::ThreeIntensity)
      targets = {{Basis::Z, DecoyTarget::Min00}, {Basis::Z, DecoyTarget::Min11}, {Basis::X, DecoyTarget::Min11},
                 {Basis::X, DecoyTarget::MaxErr11}};
    else
      targets = {{Basis::X, DecoyTarget::Min00}, {Basis::X, DecoyTarget::Min11}, {Basis::X, DecoyTarget::MaxErr11}};

    bool sandwich_ok = true;
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const auto [b, t] = targets[k];
      const double Nchi = st.N_chi[static_cast<int>(b)];
      TraceDistanceSet D = trace_distances(b, tha, c);
      if (opt.corrupt_D) {
        for (auto& row : D.D) row.fill(0.05);
      }
      LpInstance lp = build_decoy_lp(st, b, D, c, eps_each, t, lpopt);
      if (opt.corrupt_D) detail::corrupt_leakage(lp);
      const auto sol = solve_lp(lp);
      const double truth = detail::truth_value(st, D, b, t) / Nchi;
      const double slack = 1e-10 * std::max(truth, 1e-12);
      if (sol.status != LpStatus::Optimal) {
        sandwich_ok = false;
      } else if (t == DecoyTarget::MaxErr11) {
        sandwich_ok = sandwich_ok && sol.objective >= truth - slack;
      } else {
        sandwich_ok = sandwich_ok && sol.objective <= truth + slack;
      }

      if (sol.status == LpStatus::Optimal && oracle_done < opt.oracle_instances && k == static_cast<std::size_t>(i) % targets.size()) {
        const auto ref = oracle_solve(lp);
        const double scale = std::max({std::abs(ref.objective), std::abs(sol.objective), 1e-300});
        const double rel = ref.status == LpStatus::Optimal ? std::abs(ref.objective - sol.objective) / scale : 1.0;
        const bool tiny = std::abs(ref.objective) < 1e-15 && std::abs(sol.objective) < 1e-15;
        res.track(tiny ? 0.0 : rel);
        const bool ok = tiny || rel <= opt.oracle_tol;
        if (!ok) ++oracle_fail;
        res.check(ok);
        ++oracle_done;
      }
    }
    if (!sandwich_ok) ++sandwich_fail;
    res.check(sandwich_ok);

    // Asymptotic reduction: no leakage and no deviations.
    DecoyLpOptions asym = lpopt;
    asym.zero_deviations = true;
    ThaConfig none;
    none.mode = ThaMode::None;
    bool reduction_ok = true;
    for (const auto& [b, t] : targets) {
      const TraceDistanceSet D = trace_distances(b, none, c);
      const LpInstance lp = build_decoy_lp(st, b, D, c, eps_each, t, asym);
      const auto x = detail::truth_point(lp, st, D, b, t);
      const double viol = lp_max_violation(lp, x);
      const auto sol = solve_lp(lp);
      const double truth = detail::truth_value(st, D, b, t) / st.N_chi[static_cast<int>(b)];
      const double slack = 1e-10 * std::max(truth, 1e-12);
      reduction_ok = reduction_ok && viol <= 1e-12 && sol.status == LpStatus::Optimal &&
                     (t == DecoyTarget::MaxErr11 ? sol.objective >= truth - slack : sol.objective <= truth + slack);
    }
    if (variant == Variant::FourIntensity) {
      // The Poisson-ratio scaling maps the vv truth onto the ss truth exactly.
      for (int n : {0, 1}) {
        const double ss = st.truth(Intensity::s, Intensity::s, Basis::Z, n, n);
        const double vv = st.truth(Intensity::v, Intensity::v, Basis::X, n, n);
        const double scaled = scale_vv_to_ss(vv, n, c, 0.0, 1.0, true);
        reduction_ok = reduction_ok && std::abs(scaled - ss) <= 1e-10 * std::max(ss, 1e-300);
      }
      EpsilonBudget budget = plan_budget(EpsilonBudget{}, c.variant, asym.form, c.S_cut, 1);
      const auto est = estimate_4int(st, none, c, budget, asym);
      reduction_ok = reduction_ok && est.ok() &&
                     est.n00_L <= st.truth(Intensity::s, Intensity::s, Basis::Z, 0, 0) * (1.0 + 1e-10) &&
                     est.n11_L <= st.truth(Intensity::s, Intensity::s, Basis::Z, 1, 1) * (1.0 + 1e-10);
    }
    if (!reduction_ok) ++reduction_fail;
    res.check(reduction_ok);
  }
  std::ostringstream note;
  note << "sandwich failures " << sandwich_fail << "/" << opt.configs << ", reduction failures " << reduction_fail << "/"
       << opt.configs << ", oracle disagreements " << oracle_fail << "/" << oracle_done;
  res.note = note.str();
  return res;
}

/// Boundary certificates against a dense grid, vacuity at Delta = 1/2 and
/// monotonicity in Delta and the test-basis error count.
inline SuiteResult coin_suite(std::uint64_t seed, int inputs = 100) {
  SuiteResult res;
  res.name = "coin-grid";
  detail::Draw d(seed);
  constexpr int kGrid = 200001;
  const double grid_step = 1.0 / (kGrid - 1);
  auto random_input = [&d]() {
    CoinInputs in;
    in.n_Z = d.log_uniform(4.0, 10.0);
    in.n_X = in.n_Z * d.uniform(0.2, 5.0);
    in.err_X = in.n_X * d.uniform(0.0, 0.2);
    in.n_sb = (in.n_Z + in.n_X) * d.uniform(0.9, 1.0);
    in.delta_coin = d.uniform(0.0, 0.1);
    in.p_Zac = d.uniform(0.6, 1.0);
    const double dev = d.uniform(0.0, 1.0) * std::sqrt(2.0 * in.n_sb * std::log(1e12));
    in.dev_sb = in.dev_err_X = in.dev_err_Z = in.dev_ok_X = in.dev_ok_Z = dev;
    return in;
  };
  for (int i = 0; i < inputs; ++i) {
    const CoinInputs in = random_input();
    const auto r = solve_coin(in);
    const auto g = coin_grid_bound(in, kGrid);
    if (r.vacuous) {
      res.check(g.vacuous && r.e_ph_U == 1.0);
    } else {
      const double tol = 1e-6;
      const bool cert = coin_feasible(in, r.e_ph_U) && (r.e_ph_U + tol > 1.0 || !coin_feasible(in, r.e_ph_U + tol));
      res.check(cert);
      res.check(!g.vacuous && g.e <= r.e_ph_U + 1e-12 && r.e_ph_U - g.e <= grid_step + tol);
      res.track(std::abs(r.e_ph_U - g.e));
    }
    CoinInputs half = in;
    half.delta_coin = 0.5;
    const auto v = solve_coin(half);
    res.check(v.vacuous && v.e_ph_U == 1.0);
  }
  for (int i = 0; i < 10; ++i) {
    CoinInputs in = random_input();
    double prev = -1.0;
    bool mono = true;
    for (int k = 0; k <= 25; ++k) {
      in.delta_coin = 0.5 * k / 25.0;
      const double e = solve_coin(in).e_ph_U;
      mono = mono && e >= prev - 1e-9;
      prev = e;
    }
    res.check(mono);
    in = random_input();
    prev = -1.0;
    mono = true;
    for (int k = 0; k <= 25; ++k) {
      in.err_X = in.n_X * 0.5 * k / 25.0;
      const double e = solve_coin(in).e_ph_U;
      mono = mono && e >= prev - 1e-9;
      prev = e;
    }
    res.check(mono);
  }
  // Tightness with no deviations, no imbalance, no test-basis errors and p_Zac = 1.
  for (int i = 0; i < 10; ++i) {
    CoinInputs in = random_input();
    in.delta_coin = 0.0;
    in.p_Zac = 1.0;
    in.err_X = 0.0;
    in.dev_sb = in.dev_err_X = in.dev_err_Z = in.dev_ok_X = in.dev_ok_Z = 0.0;
    const auto r = solve_coin(in);
    if (r.vacuous) {
      res.check(false);
      continue;
    }
    const double gap = coin_gap(in, r.e_ph_U);
    res.track(std::abs(gap));
    res.check(std::abs(gap) <= 1e-9);
  }
  return res;
}

struct CoverageOptions {
  int resamples = 500;
  double L = 20.0;
  double N = 1e12;
  double eps_total = 1e-10;
  double confidence = 0.99;
};

/// Event-level resamples at one pinned three-intensity configuration: counts how
/// often any true photon-pair count leaves its Azuma-widened LP bound, then
/// tests that frequency against the failure budget.
inline SuiteResult coverage_suite(std::uint64_t seed, const CoverageOptions& opt = {}) {
  SuiteResult res;
  res.name = "coverage";
  ProtocolConfig c;
  c.N = opt.N;
  ChannelParams ch;
  ch.L = opt.L;
  ThaConfig none;
  none.mode = ThaMode::None;
  const auto expected = expected_counts(c, ch, true);
  EpsilonBudget base;
  base.eps_total = opt.eps_total;
  const DecoyLpOptions lpopt;
  const auto budget = plan_budget(base, c.variant, lpopt.form, c.S_cut, phase_invocations(PhasePath::Serfling));
  std::mt19937_64 seeder(seed);
  long escapes = 0;
  double tightest = 1.0;
  for (int i = 0; i < opt.resamples; ++i) {
    const auto st = sample_counts(expected, seeder());
    const auto est = estimate_3int(st, none, c, budget, lpopt);
    const double t00 = st.truth(Intensity::s, Intensity::s, Basis::Z, 0, 0);
    const double t11 = st.truth(Intensity::s, Intensity::s, Basis::Z, 1, 1);
    const double x11 = st.truth(Intensity::s, Intensity::s, Basis::X, 1, 1);
    const double xe11 = st.truth_err(Intensity::s, Intensity::s, Basis::X, 1, 1);
    const bool covered = est.ok() && est.n00_L <= t00 && est.n11_L <= t11 && est.n11_X_L <= x11 && est.err11_X_U >= xe11;
    if (!covered) ++escapes;
    if (t11 > 0.0) tightest = std::min(tightest, (t11 - est.n11_L) / t11);
  }
  const double p_value = escapes == 0 ? 1.0 : gsl_cdf_binomial_Q(static_cast<unsigned>(escapes - 1), opt.eps_total,
                                                                  static_cast<unsigned>(opt.resamples));
  res.check(p_value >= 1.0 - opt.confidence);
  res.worst = static_cast<double>(escapes);
  std::ostringstream note;
  note << "escapes " << escapes << "/" << opt.resamples << ", p-value " << p_value << ", min relative margin n11 "
       << tightest;
  res.note = note.str();
  return res;
}

struct ValidateOptions {
  std::uint64_t seed = 1;
  bool corrupt_D = false;
  int draws = 200;
  LpSuiteOptions lp;
  int coin_inputs = 100;
  CoverageOptions coverage{.resamples = 100};
};

inline std::vector<SuiteResult> run_validation(const ValidateOptions& opt) {
  std::seed_seq seq{opt.seed};
  std::vector<std::uint64_t> seeds(4);
  {
    std::vector<std::uint32_t> raw(8);
    seq.generate(raw.begin(), raw.end());
    for (int i = 0; i < 4; ++i) seeds[i] = (std::uint64_t{raw[2 * i]} << 32) | raw[2 * i + 1];
  }
  LpSuiteOptions lp = opt.lp;
  lp.corrupt_D = opt.corrupt_D;
  return {trace_distance_suite(seeds[0], opt.draws), lp_sandwich_suite(seeds[1], lp), coin_suite(seeds[2], opt.coin_inputs),
          coverage_suite(seeds[3], opt.coverage)};
}

}  // namespace mdiqkd::validation
