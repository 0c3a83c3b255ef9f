#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdiqkd/decoy_lp.hpp"
#include "mdiqkd/keyrate.hpp"
#include "mdiqkd/model_core.hpp"
#include "mdiqkd/tha_distance.hpp"

namespace mdiqkd {

/// Malformed or inconsistent run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScanRange {
  double L_start = 0.0;
  double L_end = 100.0;
  double L_step = 2.0;

  std::vector<double> distances() const {
    std::vector<double> out;
    for (long k = 0;; ++k) {
      const double L = L_start + static_cast<double>(k) * L_step;
      if (L > L_end + 1e-9 * std::max(1.0, std::abs(L_end))) break;
      out.push_back(L);
    }
    if (out.empty()) out.push_back(L_start);
    return out;
  }
};

struct SearchSettings {
  int eve_grid = 24;
  int eve_sweeps = 3;
  EveSearch eve_search = EveSearch::Pruned;
  int restarts = 8;
  int max_iterations = 400;
  double simplex_tol = 1e-4;
};

struct RunConfig {
  ProtocolConfig protocol;
  OptimizeSpace optimize;
  ChannelParams channel;
  ThaConfig tha;
  ScanRange scan;
  EpsilonBudget budget;
  DecoyLpOptions lp;
  SearchSettings search;
  std::string output = "scan.csv";
  int parallelism = 0;  // 0: all available cores
  std::uint64_t seed = 1;

  EvalOptions eval_options() const {
    EvalOptions o;
    o.base = budget;
    o.lp = lp;
    o.search = search.eve_search;
    o.grid = search.eve_grid;
    o.sweeps = search.eve_sweeps;
    return o;
  }

  OptimizeSettings optimize_settings(std::uint64_t point_seed) const {
    OptimizeSettings s;
    s.space = optimize;
    s.restarts = search.restarts;
    s.max_iterations = search.max_iterations;
    s.simplex_tol = search.simplex_tol;
    s.seed = point_seed;
    return s;
  }
};

namespace detail {

using json = nlohmann::json;

inline void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

inline Variant parse_variant(const std::string& s) {
  if (s == "three-intensity") return Variant::ThreeIntensity;
  if (s == "four-intensity") return Variant::FourIntensity;
  throw ConfigError("protocol.variant: expected 'three-intensity' or 'four-intensity', got '" + s + "'");
}

inline ThaMode parse_mode(const std::string& s) {
  if (s == "none") return ThaMode::None;
  if (s == "im-only") return ThaMode::ImOnly;
  if (s == "im-and-pm") return ThaMode::ImAndPm;
  throw ConfigError("tha.mode: expected 'none', 'im-only' or 'im-and-pm', got '" + s + "'");
}

inline void parse_protocol(const json& j, RunConfig& rc) {
  const std::string w = "protocol";
  require_object(j, w);
  reject_unknown(j,
                 {"variant", "N", "gamma_s", "gamma_v", "gamma_w", "p_s", "p_v", "p_w", "p_0", "p_Z", "p_Zac", "S_cut",
                  "P_cut", "optimize"},
                 w);
  ProtocolConfig& p = rc.protocol;
  if (j.contains("variant")) {
    std::string v;
    read(j, "variant", v, w);
    p.variant = parse_variant(v);
  }
  read(j, "N", p.N, w);
  read(j, "gamma_s", p.gamma_s, w);
  read(j, "gamma_v", p.gamma_v, w);
  read(j, "gamma_w", p.gamma_w, w);
  read(j, "p_s", p.p_s, w);
  read(j, "p_v", p.p_v, w);
  read(j, "p_w", p.p_w, w);
  read(j, "p_0", p.p_0, w);
  read(j, "p_Z", p.p_Z, w);
  read(j, "p_Zac", p.p_Zac, w);
  read(j, "S_cut", p.S_cut, w);
  read(j, "P_cut", p.P_cut, w);

  rc.optimize = OptimizeSpace::defaults(p.variant);
  if (!j.contains("optimize")) return;
  const json& o = j.at("optimize");
  if (o.is_boolean()) {
    if (!o.get<bool>()) rc.optimize = OptimizeSpace{false, false, false, false, false, false, rc.optimize.gamma_s_max};
    return;
  }
  const std::string wo = "protocol.optimize";
  require_object(o, wo);
  reject_unknown(o, {"gamma_s", "gamma_v", "gamma_w", "probabilities", "p_Z", "p_Zac", "gamma_s_max"}, wo);
  read(o, "gamma_s", rc.optimize.gamma_s, wo);
  read(o, "gamma_v", rc.optimize.gamma_v, wo);
  read(o, "gamma_w", rc.optimize.gamma_w, wo);
  read(o, "probabilities", rc.optimize.probs, wo);
  read(o, "p_Z", rc.optimize.p_Z, wo);
  read(o, "p_Zac", rc.optimize.p_Zac, wo);
  read(o, "gamma_s_max", rc.optimize.gamma_s_max, wo);
  if (!(rc.optimize.gamma_s_max > 0.0)) throw ConfigError("protocol.optimize.gamma_s_max must be positive");
}

inline void parse_channel(const json& j, RunConfig& rc) {
  const std::string w = "channel";
  require_object(j, w);
  reject_unknown(j, {"e_d", "p_d", "eta_det", "alpha", "f_EC"}, w);
  read(j, "e_d", rc.channel.e_d, w);
  read(j, "p_d", rc.channel.p_d, w);
  read(j, "eta_det", rc.channel.eta_det, w);
  read(j, "alpha", rc.channel.alpha, w);
  read(j, "f_EC", rc.channel.f_EC, w);
}

inline void parse_tha(const json& j, RunConfig& rc) {
  const std::string w = "tha";
  require_object(j, w);
  reject_unknown(j, {"case", "I_max", "mode"}, w);
  int c = 1;
  read(j, "case", c, w);
  if (c < 1 || c > 3) throw ConfigError("tha.case must be 1, 2 or 3");
  rc.tha.leak_case = static_cast<ThaCase>(c);
  read(j, "I_max", rc.tha.I_max, w);
  if (j.contains("mode")) {
    std::string m;
    read(j, "mode", m, w);
    rc.tha.mode = parse_mode(m);
  }
}

inline void parse_scan(const json& j, RunConfig& rc) {
  const std::string w = "scan";
  require_object(j, w);
  reject_unknown(j, {"L_start", "L_end", "L_step"}, w);
  read(j, "L_start", rc.scan.L_start, w);
  read(j, "L_end", rc.scan.L_end, w);
  read(j, "L_step", rc.scan.L_step, w);
  if (!(rc.scan.L_start >= 0.0) || !(rc.scan.L_end >= rc.scan.L_start))
    throw ConfigError("scan: need 0 <= L_start <= L_end");
  if (!(rc.scan.L_step > 0.0)) throw ConfigError("scan.L_step must be positive");
}

inline void parse_budget(const json& j, RunConfig& rc) {
  const std::string w = "budget";
  require_object(j, w);
  reject_unknown(j, {"eps_total", "eps_cor", "eps_overhead", "eps_sec"}, w);
  read(j, "eps_total", rc.budget.eps_total, w);
  read(j, "eps_cor", rc.budget.eps_cor, w);
  read(j, "eps_overhead", rc.budget.eps_overhead, w);
  if (j.contains("eps_sec")) {
    double v = 0.0;
    read(j, "eps_sec", v, w);
    rc.budget.eps_sec_override = v;
  }
}

inline void parse_estimation(const json& j, RunConfig& rc) {
  const std::string w = "estimation";
  require_object(j, w);
  reject_unknown(j, {"lp_form", "azuma_trials"}, w);
  if (j.contains("lp_form")) {
    std::string f;
    read(j, "lp_form", f, w);
    if (f == "per-cell")
      rc.lp.form = LpForm::PerCell;
    else if (f == "collapsed")
      rc.lp.form = LpForm::Collapsed;
    else
      throw ConfigError("estimation.lp_form: expected 'per-cell' or 'collapsed'");
  }
  if (j.contains("azuma_trials")) {
    std::string t;
    read(j, "azuma_trials", t, w);
    if (t == "auto")
      rc.lp.trials = AzumaTrials::Auto;
    else if (t == "rounds")
      rc.lp.trials = AzumaTrials::Rounds;
    else if (t == "detections")
      rc.lp.trials = AzumaTrials::Detections;
    else
      throw ConfigError("estimation.azuma_trials: expected 'auto', 'rounds' or 'detections'");
  }
}

inline void parse_search(const json& j, RunConfig& rc) {
  const std::string w = "search";
  require_object(j, w);
  reject_unknown(j, {"eve_grid", "eve_sweeps", "eve_search", "restarts", "max_iterations", "simplex_tol"}, w);
  SearchSettings& s = rc.search;
  read(j, "eve_grid", s.eve_grid, w);
  read(j, "eve_sweeps", s.eve_sweeps, w);
  read(j, "restarts", s.restarts, w);
  read(j, "max_iterations", s.max_iterations, w);
  read(j, "simplex_tol", s.simplex_tol, w);
  if (j.contains("eve_search")) {
    std::string m;
    read(j, "eve_search", m, w);
    if (m == "pruned")
      s.eve_search = EveSearch::Pruned;
    else if (m == "exhaustive")
      s.eve_search = EveSearch::Exhaustive;
    else
      throw ConfigError("search.eve_search: expected 'pruned' or 'exhaustive'");
  }
  if (s.eve_grid < 1 || s.eve_sweeps < 0 || s.restarts < 0 || s.max_iterations < 1 || !(s.simplex_tol > 0.0))
    throw ConfigError("search: values out of range");
}

}  // namespace detail

/// Parses and validates a run configuration. Every block is optional; unknown keys are errors.
inline RunConfig parse_run_config(const nlohmann::json& j) {
  detail::require_object(j, "config");
  detail::reject_unknown(j,
                         {"protocol", "channel", "tha", "scan", "budget", "estimation", "search", "output",
                          "parallelism", "seed"},
                         "config");
  RunConfig rc;
  rc.optimize = OptimizeSpace::defaults(rc.protocol.variant);
  if (j.contains("protocol")) detail::parse_protocol(j.at("protocol"), rc);
  if (j.contains("channel")) detail::parse_channel(j.at("channel"), rc);
  if (j.contains("tha")) detail::parse_tha(j.at("tha"), rc);
  if (j.contains("scan")) detail::parse_scan(j.at("scan"), rc);
  if (j.contains("budget")) detail::parse_budget(j.at("budget"), rc);
  if (j.contains("estimation")) detail::parse_estimation(j.at("estimation"), rc);
  if (j.contains("search")) detail::parse_search(j.at("search"), rc);
  detail::read(j, "output", rc.output, "config");
  detail::read(j, "parallelism", rc.parallelism, "config");
  detail::read(j, "seed", rc.seed, "config");
  if (rc.parallelism < 0) throw ConfigError("parallelism must be non-negative");
  try {
    rc.protocol.validate();
    rc.channel.validate();
    rc.tha.validate();
    rc.budget.validate();
    check_case3(rc.tha, rc.protocol);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse_run_config(j);
}

}  // namespace mdiqkd
