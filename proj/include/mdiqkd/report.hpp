#pragma once

#include <json.hpp>

#include <array>
#include <charconv>
#include <cmath>
#include <string>
#include <vector>

#include "mdiqkd/decoy_lp.hpp"
#include "mdiqkd/keyrate.hpp"
#include "mdiqkd/run_config.hpp"

namespace mdiqkd {

inline constexpr std::array<const char*, 20> kCsvColumns = {
    "L_km",    "rate", "ell",  "n00_L", "n11_L", "e_ph_U", "path",  "gamma_s", "gamma_v", "gamma_w",
    "p_s",     "p_v",  "p_w",  "p_0",   "p_Z",   "p_Zac",  "theta_v", "theta_w", "theta_ZX", "status"};

/// Shortest decimal that parses back to the same double.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::string csv_header() {
  std::string out;
  for (std::size_t i = 0; i < kCsvColumns.size(); ++i) {
    if (i) out += ',';
    out += kCsvColumns[i];
  }
  return out;
}

inline std::string csv_row(double L, const KeyRateResult& r) {
  const ProtocolConfig& u = r.user;
  const std::vector<std::string> cells = {
      format_number(L),         format_number(r.rate),       format_number(r.ell),        format_number(r.n00_L),
      format_number(r.n11_L),   format_number(r.e_ph_U),     to_string(r.path),           format_number(u.gamma_s),
      format_number(u.gamma_v), format_number(u.gamma_w),    format_number(u.p_s),        format_number(u.p_v),
      format_number(u.p_w),     format_number(u.p_0),        format_number(u.pZ()),       format_number(u.p_Zac),
      format_number(r.eve.theta_v), format_number(r.eve.theta_w), format_number(r.eve.theta_zx), status_string(r.status)};
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  return out;
}

inline nlohmann::ordered_json budget_json(const EpsilonBudget& b) {
  nlohmann::ordered_json j;
  j["eps_total"] = b.eps_total;
  j["invocations"] = b.invocations;
  j["per_invocation"] = b.per_invocation();
  j["eps_Z00"] = b.eps_Z00;
  j["eps_Z11"] = b.eps_Z11;
  j["eps_X11"] = b.eps_X11;
  j["eps_EX11"] = b.eps_EX11;
  j["eps_prime"] = b.eps_prime;
  j["eps_ph11"] = b.eps_ph11;
  j["eps_other"] = b.eps_other;
  j["eps_overhead"] = b.eps_overhead;
  j["eps_sec"] = b.eps_sec();
  j["eps_cor"] = b.eps_cor;
  return j;
}

inline nlohmann::ordered_json protocol_json(const ProtocolConfig& c) {
  nlohmann::ordered_json j;
  j["variant"] = c.variant == Variant::ThreeIntensity ? "three-intensity" : "four-intensity";
  j["N"] = c.N;
  j["gamma_s"] = c.gamma_s;
  j["gamma_v"] = c.gamma_v;
  j["gamma_w"] = c.gamma_w;
  j["p_s"] = c.p_s;
  j["p_v"] = c.p_v;
  j["p_w"] = c.p_w;
  j["p_0"] = c.p_0;
  j["p_Z"] = c.pZ();
  j["p_Zac"] = c.p_Zac;
  j["S_cut"] = c.S_cut;
  j["P_cut"] = c.P_cut;
  return j;
}

/// Full diagnostic record of one optimized distance point.
inline nlohmann::ordered_json point_report(const RunConfig& rc, double L, const KeyRateResult& r) {
  nlohmann::ordered_json j;
  j["L_km"] = L;
  j["status"] = status_string(r.status);
  j["key"] = {{"ell", r.ell},           {"ell_raw", std::isfinite(r.ell_raw) ? nlohmann::ordered_json(r.ell_raw) : nullptr},
              {"rate", r.rate},         {"leak_EC", r.leak_EC},
              {"pen_sec", std::isfinite(r.pen_sec) ? nlohmann::ordered_json(r.pen_sec) : nullptr},
              {"pen_cor", r.pen_cor}};
  j["estimates"] = {{"n00_L", r.n00_L}, {"n11_L", r.n11_L}, {"n11_X_L", r.n11_X_L}, {"err11_X_U", r.err11_X_U}};
  j["phase_error"] = {{"e_ph_U", r.e_ph_U}, {"path", to_string(r.path)}, {"delta_coin", r.delta_coin}};
  j["user"] = protocol_json(r.user);
  j["eve"] = {{"theta_v", r.eve.theta_v}, {"theta_w", r.eve.theta_w}, {"theta_ZX", r.eve.theta_zx}};
  j["budget"] = budget_json(r.budget);
  j["evaluations"] = r.evaluations;

  ChannelParams ch = rc.channel;
  ch.L = L;
  ThaConfig tha = rc.tha;
  tha.angles = r.eve;
  nlohmann::ordered_json lps = nlohmann::ordered_json::array();
  if (!(r.status & kStatusError)) {
    const auto stats = expected_counts(r.user, ch);
    j["observed"] = {{"N_chi_Z", stats.N_chi[0]},
                     {"N_chi_X", stats.N_chi[1]},
                     {"Z_ss_size", stats.Z_ss_size},
                     {"E_Z_ss", stats.E_Z_ss},
                     {"total_clicks", stats.total_clicks}};
    for (const auto& item : decoy_lp_set(stats, tha, r.user, r.budget, rc.lp)) {
      const auto s = solve_decoy_lp(item.lp, item.Nchi);
      lps.push_back({{"name", item.name}, {"status", to_string(s.status)}, {"value", s.value}});
    }
  }
  j["lps"] = lps;
  return j;
}

}  // namespace mdiqkd
