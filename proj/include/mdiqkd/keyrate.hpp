#pragma once

#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "mdiqkd/channel_sim.hpp"
#include "mdiqkd/decoy_lp.hpp"
#include "mdiqkd/model_core.hpp"
#include "mdiqkd/phase_error.hpp"
#include "mdiqkd/tha_distance.hpp"

namespace mdiqkd {

/// Status bits of a key-rate evaluation.
enum StatusFlag : unsigned {
  kStatusOk = 0,
  kStatusLpFailure = 1u << 0,
  kStatusEpsInfeasible = 1u << 1,
  kStatusVacuousPhase = 1u << 2,
  kStatusNotConverged = 1u << 3,
  kStatusError = 1u << 4,
};

inline std::string status_string(unsigned s) {
  if (s == kStatusOk) return "ok";
  std::string out;
  auto add = [&](const char* t) {
    if (!out.empty()) out += '|';
    out += t;
  };
  if (s & kStatusLpFailure) add("lp-failure");
  if (s & kStatusEpsInfeasible) add("eps-infeasible");
  if (s & kStatusVacuousPhase) add("vacuous-phase");
  if (s & kStatusNotConverged) add("not-converged");
  if (s & kStatusError) add("error");
  return out;
}

struct KeyRateResult {
  double ell = 0.0;
  double ell_raw = 0.0;
  double rate = 0.0;
  double n00_L = 0.0;
  double n11_L = 0.0;
  double n11_X_L = 0.0;
  double err11_X_U = 0.0;
  double e_ph_U = 1.0;
  double leak_EC = 0.0;
  double pen_sec = 0.0;
  double pen_cor = 0.0;
  double delta_coin = 0.0;
  PhasePath path = PhasePath::Serfling;
  ProtocolConfig user;
  EveAngles eve;
  EpsilonBudget budget;
  unsigned status = kStatusOk;
  long evaluations = 0;
};

/// ell = n00 + n11 [1 - H(e_ph)] - leak_EC - log2(2/(eps_sec^2 - eps)) - log2(2/eps_cor), clamped at 0.
/// The phase-error rate enters the entropy clamped at 1/2.
inline KeyRateResult key_length(const DecoyEstimates& est, const PhaseErrorEstimate& phase, const ObservedStats& stats,
                                const ChannelParams& channel, const EpsilonBudget& budget) {
  KeyRateResult r;
  r.n00_L = est.n00_L;
  r.n11_L = est.n11_L;
  r.n11_X_L = est.n11_X_L;
  r.err11_X_U = est.err11_X_U;
  r.e_ph_U = phase.e_ph_U;
  r.path = phase.path;
  r.delta_coin = phase.delta_coin;
  r.budget = budget;
  r.leak_EC = stats.Z_ss_size * channel.f_EC * binary_entropy(std::clamp(stats.E_Z_ss, 0.0, 0.5));
  const double es = budget.eps_sec();
  const double gap = es * es - budget.eps();
  r.pen_cor = std::log2(2.0 / budget.eps_cor);
  if (!est.ok()) r.status |= kStatusLpFailure;
  if (phase.vacuous) r.status |= kStatusVacuousPhase;
  if (!(gap > 0.0)) {
    r.status |= kStatusEpsInfeasible;
    r.pen_sec = std::numeric_limits<double>::infinity();
    r.ell_raw = -std::numeric_limits<double>::infinity();
    r.ell = 0.0;
    r.rate = 0.0;
    return r;
  }
  r.pen_sec = std::log2(2.0 / gap);
  const double h = binary_entropy(std::min(phase.e_ph_U, 0.5));
  r.ell_raw = est.n00_L + est.n11_L * (1.0 - h) - r.leak_EC - r.pen_sec - r.pen_cor;
  if (!est.ok()) r.ell_raw = std::min(r.ell_raw, 0.0);
  r.ell = std::max(0.0, r.ell_raw);
  r.rate = stats.N > 0.0 ? r.ell / stats.N : 0.0;
  return r;
}

/// Re-evaluates the key-length formula from stored components.
inline double reassemble_ell(const KeyRateResult& r) {
  const double raw = r.n00_L + r.n11_L * (1.0 - binary_entropy(std::min(r.e_ph_U, 0.5))) - r.leak_EC - r.pen_sec - r.pen_cor;
  return std::max(0.0, raw);
}

enum class EveSearch { Pruned, Exhaustive };

struct EvalOptions {
  EpsilonBudget base;
  DecoyLpOptions lp;
  EveSearch search = EveSearch::Pruned;
  int grid = 24;
  int sweeps = 3;
};

/// One key-length evaluation at fixed user parameters and fixed Eve angles.
inline KeyRateResult evaluate_at(const ObservedStats& stats, const ProtocolConfig& config, const ChannelParams& channel,
                                 const ThaConfig& tha, const EvalOptions& opts) {
  const PhasePath path = phase_path(tha);
  const EpsilonBudget budget = plan_budget(opts.base, config.variant, opts.lp.form, config.S_cut, phase_invocations(path));
  KeyRateResult r;
  try {
    const auto est = estimate_decoy(stats, tha, config, budget, opts.lp);
    const auto phase = eph_dispatch(tha, est, stats, config, budget);
    r = key_length(est, phase, stats, channel, budget);
  } catch (const std::exception&) {
    r = KeyRateResult{};
    r.status = kStatusError;
    r.ell_raw = -std::numeric_limits<double>::infinity();
    r.budget = budget;
  }
  r.user = config;
  r.eve = tha.angles;
  r.evaluations = 1;
  return r;
}

inline KeyRateResult evaluate(const ProtocolConfig& config, const ChannelParams& channel, const ThaConfig& tha,
                              const EvalOptions& opts = {}) {
  const auto stats = expected_counts(config, channel);
  return evaluate_at(stats, config, channel, tha, opts);
}

/// Every leakage quantity the estimators consume; the key length is non-increasing in each.
inline std::vector<double> leak_profile(const ThaConfig& tha, const ProtocolConfig& config) {
  std::vector<double> p;
  const Basis lp_basis = config.variant == Variant::ThreeIntensity ? Basis::Z : Basis::X;
  const auto D = trace_distances(lp_basis, tha, config);
  for (Intensity a : config.intensities(lp_basis))
    for (Intensity b : config.intensities(lp_basis)) p.push_back(D.at(a, b));
  if (config.variant == Variant::FourIntensity)
    p.push_back(trace_distance_pair(Intensity::s, Intensity::s, Intensity::v, Intensity::v, tha, config));
  if (phase_path(tha) == PhasePath::QuantumCoin) p.push_back(coin_imbalance(config.pZ(), config.pX(), overlap_ZX(tha, config)));
  return p;
}

namespace detail {

inline bool dominated_by(const std::vector<double>& a, const std::vector<double>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] > b[i]) return false;
  return true;
}

struct AngleAxes {
  bool v = false, w = false, zx = false;
  int count() const { return int(v) + int(w) + int(zx); }
};

inline AngleAxes free_axes(const ThaConfig& tha) {
  AngleAxes ax;
  if (!tha.active() || tha.leak_case == ThaCase::Case3) return ax;
  ax.v = ax.w = true;
  ax.zx = tha.pm_leaks();
  return ax;
}

inline double& axis_ref(EveAngles& a, int k) { return k == 0 ? a.theta_v : (k == 1 ? a.theta_w : a.theta_zx); }

}  // namespace detail

/// Worst case over Eve's free phases: grid search then coordinate descent.
///
/// In pruned mode only grid points whose leakage profile is not dominated by
/// another grid point are evaluated, and descent moves to dominated profiles are
/// skipped; both are exact consequences of the monotonicity of the key length.
inline KeyRateResult eve_worst_case(const ObservedStats& stats, const ProtocolConfig& config, const ChannelParams& channel,
                                    const ThaConfig& tha_template, const EvalOptions& opts = {}) {
  const auto axes = detail::free_axes(tha_template);
  ThaConfig tha = tha_template;
  if (axes.count() == 0) {
    tha.angles = EveAngles{};
    return evaluate_at(stats, config, channel, tha, opts);
  }
  const int G = std::max(1, opts.grid);
  const double step0 = 2.0 * std::numbers::pi / G;
  std::vector<EveAngles> points;
  for (int i = 0; i < (axes.v ? G : 1); ++i)
    for (int j = 0; j < (axes.w ? G : 1); ++j)
      for (int k = 0; k < (axes.zx ? G : 1); ++k) points.push_back({i * step0, j * step0, k * step0});

  long evals = 0;
  KeyRateResult best;
  best.ell_raw = std::numeric_limits<double>::infinity();
  std::vector<double> best_profile;
  auto consider = [&](const EveAngles& a, const std::vector<double>& prof) {
    tha.angles = a;
    auto r = evaluate_at(stats, config, channel, tha, opts);
    ++evals;
    if (r.ell_raw < best.ell_raw) {
      best = r;
      best_profile = prof;
      return true;
    }
    return false;
  };

  if (opts.search == EveSearch::Exhaustive) {
    for (const auto& a : points) {
      tha.angles = a;
      consider(a, leak_profile(tha, config));
    }
  } else {
    std::vector<std::vector<double>> prof(points.size());
    std::vector<std::size_t> order(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      tha.angles = points[i];
      prof[i] = leak_profile(tha, config);
      order[i] = i;
    }
    auto total = [&](std::size_t i) {
      double s = 0.0;
      for (double x : prof[i]) s += x;
      return s;
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return total(a) > total(b); });
    std::vector<std::size_t> frontier;
    for (std::size_t i : order) {
      bool dom = false;
      for (std::size_t f : frontier)
        if (detail::dominated_by(prof[i], prof[f])) {
          dom = true;
          break;
        }
      if (!dom) frontier.push_back(i);
    }
    for (std::size_t f : frontier) consider(points[f], prof[f]);
  }

  // Coordinate descent around the grid minimizer with a halving step.
  double step = step0;
  for (int sweep = 0; sweep < opts.sweeps; ++sweep) {
    step *= 0.5;
    for (int axis = 0; axis < 3; ++axis) {
      if ((axis == 0 && !axes.v) || (axis == 1 && !axes.w) || (axis == 2 && !axes.zx)) continue;
      for (double dir : {1.0, -1.0}) {
        EveAngles cand = best.eve;
        detail::axis_ref(cand, axis) += dir * step;
        tha.angles = cand;
        auto prof = leak_profile(tha, config);
        if (opts.search == EveSearch::Pruned && detail::dominated_by(prof, best_profile)) continue;
        consider(cand, prof);
      }
    }
  }
  best.evaluations = evals;
  return best;
}

inline KeyRateResult eve_worst_case(const ProtocolConfig& config, const ChannelParams& channel, const ThaConfig& tha,
                                    const EvalOptions& opts = {}) {
  return eve_worst_case(expected_counts(config, channel), config, channel, tha, opts);
}

/// Which user parameter groups the optimizer may move.
struct OptimizeSpace {
  bool gamma_s = true;
  bool gamma_v = true;
  bool gamma_w = false;  // four-intensity runs free it by default
  bool probs = true;
  bool p_Z = true;
  bool p_Zac = true;
  double gamma_s_max = 2.0;

  static OptimizeSpace defaults(Variant v) {
    OptimizeSpace s;
    if (v == Variant::FourIntensity) {
      s.gamma_w = true;
      s.p_Z = false;
    }
    return s;
  }
  bool empty() const { return !(gamma_s || gamma_v || gamma_w || probs || p_Z || p_Zac); }
};

struct OptimizeSettings {
  OptimizeSpace space;
  int restarts = 8;
  int max_iterations = 400;
  double simplex_tol = 1e-4;
  std::uint64_t seed = 1;
  /// Optional warm start appended ahead of the random restarts.
  std::vector<ProtocolConfig> starts;
};

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) {
  p = std::clamp(p, 1e-12, 1.0 - 1e-12);
  return std::log(p / (1.0 - p));
}

/// Unconstrained coordinates <-> protocol parameters.
class ParamMap {
 public:
  ParamMap(const ProtocolConfig& seed, const OptimizeSpace& space) : seed_(seed), space_(space) {
    const bool four = seed.variant == Variant::FourIntensity;
    n_probs_ = space.probs ? (four ? 3 : 2) : 0;
    dim_ = int(space.gamma_s) + int(space.gamma_v) + int(space.gamma_w) + n_probs_ + int(space.p_Z && !four) +
           int(space.p_Zac);
  }

  int dim() const { return dim_; }

  ProtocolConfig decode(const std::vector<double>& u) const {
    ProtocolConfig c = seed_;
    int k = 0;
    const bool four = c.variant == Variant::FourIntensity;
    if (space_.gamma_s) c.gamma_s = space_.gamma_s_max * sigmoid(u[k++]);
    if (space_.gamma_v) c.gamma_v = c.gamma_s * sigmoid(u[k++]);
    if (space_.gamma_w) c.gamma_w = c.gamma_v * sigmoid(u[k++]);
    if (n_probs_ > 0) {
      std::array<double, 4> z{0.0, 0.0, 0.0, 0.0};
      const int m = four ? 4 : 3;
      for (int i = 1; i < m; ++i) z[i] = u[k++];
      double mx = *std::max_element(z.begin(), z.begin() + m), sum = 0.0;
      std::array<double, 4> e{};
      for (int i = 0; i < m; ++i) sum += (e[i] = std::exp(z[i] - mx));
      c.p_s = e[0] / sum;
      c.p_v = e[1] / sum;
      c.p_w = e[2] / sum;
      c.p_0 = four ? e[3] / sum : 0.0;
      const double fix = 1.0 - (c.p_s + c.p_v + c.p_w + c.p_0);
      c.p_s += fix;
    }
    if (space_.p_Z && !four) c.p_Z = sigmoid(u[k++]);
    if (space_.p_Zac) c.p_Zac = std::min(1.0, sigmoid(u[k++]) * (1.0 + 1e-9));
    return c;
  }

  std::vector<double> encode(const ProtocolConfig& c) const {
    std::vector<double> u;
    const bool four = c.variant == Variant::FourIntensity;
    if (space_.gamma_s) u.push_back(logit(c.gamma_s / space_.gamma_s_max));
    if (space_.gamma_v) u.push_back(logit(c.gamma_v / c.gamma_s));
    if (space_.gamma_w) u.push_back(logit(c.gamma_w / c.gamma_v));
    if (n_probs_ > 0) {
      const double ps = std::max(c.p_s, 1e-12);
      u.push_back(std::log(std::max(c.p_v, 1e-12) / ps));
      u.push_back(std::log(std::max(c.p_w, 1e-12) / ps));
      if (four) u.push_back(std::log(std::max(c.p_0, 1e-12) / ps));
    }
    if (space_.p_Z && !four) u.push_back(logit(c.p_Z));
    if (space_.p_Zac) u.push_back(logit(c.p_Zac));
    return u;
  }

  std::vector<double> random_point(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    ProtocolConfig c = seed_;
    const bool four = c.variant == Variant::FourIntensity;
    c.gamma_s = 0.1 + 0.9 * U(rng);
    c.gamma_v = c.gamma_s * (0.05 + 0.5 * U(rng));
    if (space_.gamma_w) c.gamma_w = c.gamma_v * (0.01 + 0.5 * U(rng));
    if (!space_.gamma_v && seed_.gamma_v >= c.gamma_s) c.gamma_s = std::min(space_.gamma_s_max * 0.99, 2.0 * seed_.gamma_v);
    std::array<double, 4> w{};
    double sum = 0.0;
    for (int i = 0; i < (four ? 4 : 3); ++i) sum += (w[i] = 0.1 + U(rng));
    c.p_s = w[0] / sum;
    c.p_v = w[1] / sum;
    c.p_w = w[2] / sum;
    c.p_0 = four ? w[3] / sum : 0.0;
    c.p_Z = 0.2 + 0.6 * U(rng);
    c.p_Zac = 0.6 + 0.39 * U(rng);
    return encode(c);
  }

 private:
  ProtocolConfig seed_;
  OptimizeSpace space_;
  int n_probs_ = 0;
  int dim_ = 0;
};

struct NmContext {
  std::function<double(const std::vector<double>&)> f;
  int dim;
};

inline double nm_trampoline(const gsl_vector* x, void* params) {
  auto* ctx = static_cast<NmContext*>(params);
  std::vector<double> u(ctx->dim);
  for (int i = 0; i < ctx->dim; ++i) u[i] = gsl_vector_get(x, i);
  return ctx->f(u);
}

/// GSL Nelder-Mead run from `start`; returns the best point and whether it met the size tolerance.
inline std::pair<std::vector<double>, bool> nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                                        std::vector<double> start, double step, int max_iter,
                                                        double tol) {
  const int n = static_cast<int>(start.size());
  NmContext ctx{f, n};
  gsl_multimin_function fn{&nm_trampoline, static_cast<std::size_t>(n), &ctx};
  gsl_vector* x = gsl_vector_alloc(n);
  gsl_vector* ss = gsl_vector_alloc(n);
  for (int i = 0; i < n; ++i) {
    gsl_vector_set(x, i, start[i]);
    gsl_vector_set(ss, i, step);
  }
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
  gsl_multimin_fminimizer_set(s, &fn, x, ss);
  bool converged = false;
  for (int it = 0; it < max_iter; ++it) {
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), tol) == GSL_SUCCESS) {
      converged = true;
      break;
    }
  }
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = gsl_vector_get(s->x, i);
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(x);
  gsl_vector_free(ss);
  return {out, converged};
}

}  // namespace detail

/// Ranking used by the optimizer: the rate when positive, otherwise the
/// (negative) key length per sifted bit, so every positive point outranks every
/// non-positive one and shrinking the sifted key is never rewarded.
inline double optimizer_score(const KeyRateResult& r, double N) {
  if (!std::isfinite(r.ell_raw)) return -1e3;
  if (r.ell_raw > 0.0) return r.ell_raw / N;
  const double sifted = r.leak_EC > 0.0 || r.n11_L > 0.0 ? std::max(r.n11_L, 1.0) : 1.0;
  return r.ell_raw / (sifted + 1.0);
}

/// max over user parameters of min over Eve's phases of the key length.
inline KeyRateResult optimize_keyrate(const ProtocolConfig& seed, const ChannelParams& channel, const ThaConfig& tha,
                                      const EvalOptions& opts = {}, const OptimizeSettings& settings = {}) {
  channel.validate();
  const auto model = BsmModel::get(channel.e_d, channel.p_d);
  const double eta = arm_transmittance(channel);
  const YieldTable yields = yield_table(*model, eta, eta);
  long evals = 0;

  auto run_point = [&](const ProtocolConfig& c) {
    const auto stats = expected_counts(c, channel, yields);
    auto r = eve_worst_case(stats, c, channel, tha, opts);
    evals += r.evaluations;
    return r;
  };

  if (settings.space.empty()) {
    auto r = run_point(seed);
    r.evaluations = evals;
    return r;
  }

  detail::ParamMap map(seed, settings.space);
  const double scale = seed.N > 0.0 ? seed.N : 1.0;
  KeyRateResult best;
  best.ell_raw = -std::numeric_limits<double>::infinity();
  double best_score = -std::numeric_limits<double>::infinity();
  auto objective = [&](const std::vector<double>& u) {
    ProtocolConfig c = map.decode(u);
    try {
      c.validate();
    } catch (const std::exception&) {
      return 1e3;
    }
    auto r = run_point(c);
    const double score = optimizer_score(r, scale);
    if (score > best_score) {
      best = r;
      best_score = score;
    }
    return -score;
  };

  std::vector<std::vector<double>> starts;
  for (const auto& c : settings.starts) starts.push_back(map.encode(c));
  starts.push_back(map.encode(seed));
  std::mt19937_64 rng(settings.seed);
  for (int i = 0; i < settings.restarts; ++i) starts.push_back(map.random_point(rng));

  bool all_converged = true;
  for (const auto& s : starts) {
    auto [u, conv] = detail::nelder_mead(objective, s, 0.5, settings.max_iterations, settings.simplex_tol);
    all_converged = all_converged && conv;
  }
  if (!all_converged) best.status |= kStatusNotConverged;
  best.evaluations = evals;
  return best;
}

/// Largest distance in [lo, hi] with positive optimized rate, by bisection to `tol` km.
inline double find_cutoff(const std::function<bool(double)>& positive, double lo, double hi, double tol = 0.5) {
  if (!positive(lo)) return lo;
  if (positive(hi)) return hi;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (positive(mid))
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

}  // namespace mdiqkd
