// One PASS/FAIL line per acceptance criterion. Exit status 0 iff every line passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mdiqkd/keyrate.hpp"
#include "mdiqkd/validation/suites.hpp"

namespace {

using namespace mdiqkd;

constexpr double kDistanceTol = 10.0;  // km, model-mismatch allowance
constexpr double kCutoffHi = 160.0;
constexpr double kBisectTol = 0.5;
constexpr int kRestarts = 4;
constexpr std::uint64_t kSeed = 20240611;
constexpr double kIdentityRelTol = 4.0 * 2.220446049250313e-16;

struct Scenario {
  std::string name;
  ProtocolConfig protocol;
  ThaConfig tha;
};

struct CutoffRun {
  double cutoff = 0.0;
  std::vector<KeyRateResult> positives;
  double seconds = 0.0;
};

ProtocolConfig seed_3int(double N) {
  ProtocolConfig p;
  p.variant = Variant::ThreeIntensity;
  p.N = N;
  p.gamma_s = 0.4;
  p.gamma_v = 0.1;
  p.gamma_w = 5e-4;
  p.p_s = 0.5;
  p.p_v = 0.3;
  p.p_w = 0.2;
  p.p_Z = 0.5;
  return p;
}

ProtocolConfig seed_4int(double N) {
  ProtocolConfig p;
  p.variant = Variant::FourIntensity;
  p.N = N;
  p.gamma_s = 0.4;
  p.gamma_v = 0.1;
  p.gamma_w = 0.02;
  p.p_s = 0.5;
  p.p_v = 0.25;
  p.p_w = 0.2;
  p.p_0 = 0.05;
  return p;
}

ThaConfig leak(ThaCase c, double I, ThaMode mode) {
  ThaConfig t;
  t.leak_case = c;
  t.I_max = I;
  t.mode = mode;
  return t;
}

OptimizeSettings settings_for(const ProtocolConfig& p) {
  OptimizeSettings s;
  s.space = OptimizeSpace::defaults(p.variant);
  if (p.variant == Variant::ThreeIntensity) s.space.gamma_w = false;
  s.restarts = kRestarts;
  s.seed = kSeed;
  return s;
}

KeyRateResult optimize_at(const Scenario& sc, double L, const std::vector<ProtocolConfig>& starts = {}) {
  ChannelParams ch;
  ch.L = L;
  auto s = settings_for(sc.protocol);
  s.starts = starts;
  return optimize_keyrate(sc.protocol, ch, sc.tha, EvalOptions{}, s);
}

class Runner {
 public:
  const CutoffRun& cutoff(const Scenario& sc) {
    auto it = cache_.find(sc.name);
    if (it != cache_.end()) return it->second;
    const auto t0 = std::chrono::steady_clock::now();
    CutoffRun run;
    std::vector<ProtocolConfig> warm;
    auto positive = [&](double L) {
      const auto r = optimize_at(sc, L, warm);
      if (r.ell > 0.0) {
        run.positives.push_back(r);
        warm = {r.user};
      }
      return r.ell > 0.0;
    };
    run.cutoff = find_cutoff(positive, 0.0, kCutoffHi, kBisectTol);
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::fprintf(stderr, "  [%s] cutoff %.2f km (%.0f s, %zu positive points)\n", sc.name.c_str(), run.cutoff,
                 run.seconds, run.positives.size());
    return cache_.emplace(sc.name, std::move(run)).first->second;
  }

 private:
  std::map<std::string, CutoffRun> cache_;
};

bool report(int id, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  return ok;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

bool near(double got, double want) { return std::abs(got - want) <= kDistanceTol; }

std::string cut_text(const std::string& label, double got, double want) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s %.1f km (target %.0f +- %.0f)", label.c_str(), got, want, kDistanceTol);
  return buf;
}

struct CutCheck {
  bool ok = true;
  std::string text;
  void add(const std::string& label, double got, double want) {
    ok = near(got, want) && ok;
    if (!text.empty()) text += "; ";
    text += cut_text(label, got, want);
  }
};

bool p_zac_in(const CutoffRun& run, double lo, double hi, std::string& text, const std::string& label) {
  if (run.positives.empty()) {
    text += label + " no positive-rate point";
    return false;
  }
  double mn = 1.0, mx = 0.0;
  for (const auto& r : run.positives) {
    mn = std::min(mn, r.user.p_Zac);
    mx = std::max(mx, r.user.p_Zac);
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s p_Zac in [%.3f, %.3f] (allowed [%.2f, %.2f])", label.c_str(), mn, mx, lo, hi);
  text += buf;
  return mn >= lo && mx <= hi;
}

bool same(double a, double b) {
  return a == b || std::abs(a - b) <= kIdentityRelTol * std::max(std::abs(a), std::abs(b));
}

}  // namespace

int main() {
  Runner runner;
  bool all = true;

  const Scenario none3{"3int-none", seed_3int(1e14), leak(ThaCase::Case1, 0.0, ThaMode::None)};
  const Scenario c1_im{"3int-c1-im", seed_3int(1e14), leak(ThaCase::Case1, 1e-13, ThaMode::ImOnly)};
  const Scenario c1_pm{"3int-c1-impm", seed_3int(1e14), leak(ThaCase::Case1, 1e-13, ThaMode::ImAndPm)};
  const Scenario c2{"3int-c2", seed_3int(1e14), leak(ThaCase::Case2, 1e-13, ThaMode::ImAndPm)};
  const Scenario c3{"3int-c3-impm", seed_3int(1e14), leak(ThaCase::Case3, 1e-7, ThaMode::ImAndPm)};
  const Scenario c3_im{"3int-c3-im", seed_3int(1e14), leak(ThaCase::Case3, 1e-7, ThaMode::ImOnly)};
  const Scenario none4{"4int-none", seed_4int(1e14), leak(ThaCase::Case1, 0.0, ThaMode::None)};
  const Scenario c1_4{"4int-c1", seed_4int(1e14), leak(ThaCase::Case1, 1e-13, ThaMode::ImAndPm)};
  const Scenario c2_4{"4int-c2", seed_4int(1e14), leak(ThaCase::Case2, 1e-13, ThaMode::ImAndPm)};
  const Scenario c3_4{"4int-c3", seed_4int(1e14), leak(ThaCase::Case3, 1e-7, ThaMode::ImAndPm)};

  {
    const auto& r = runner.cutoff(none3);
    CutCheck c;
    c.add("3-int no leakage", r.cutoff, 88.0);
    all = report(1, c.ok, c.text + fmt(", %.0f s", r.seconds)) && all;
  }
  {
    CutCheck c;
    c.add("Case 1 IM-only", runner.cutoff(c1_im).cutoff, 48.0);
    c.add("Case 1 IM+PM", runner.cutoff(c1_pm).cutoff, 30.0);
    all = report(2, c.ok, c.text) && all;
  }
  {
    CutCheck c;
    std::vector<double> cuts;
    for (double N : {1e12, 1e13, 1e14, 1e15}) {
      const Scenario sc{"3int-c1-im-1e-16-N" + fmt("%.0e", N), seed_3int(N),
                        leak(ThaCase::Case1, 1e-16, ThaMode::ImOnly)};
      cuts.push_back(runner.cutoff(sc).cutoff);
    }
    c.add("N=1e15", cuts[3], 84.0);
    c.add("N=1e12", cuts[0], 32.0);
    bool increasing = true;
    for (std::size_t i = 1; i < cuts.size(); ++i) increasing = increasing && cuts[i] > cuts[i - 1];
    char buf[160];
    std::snprintf(buf, sizeof buf, "; cutoffs over N=1e12..1e15: %.1f %.1f %.1f %.1f (strictly increasing: %s)", cuts[0],
                  cuts[1], cuts[2], cuts[3], increasing ? "yes" : "no");
    all = report(3, c.ok && increasing, c.text + buf) && all;
  }
  {
    CutCheck c;
    c.add("Case 2", runner.cutoff(c2).cutoff, 54.0);
    c.add("Case 3", runner.cutoff(c3).cutoff, 62.0);
    bool identical = true;
    for (double L : {0.0, 20.0, 40.0, 60.0}) {
      const auto a = optimize_at(c3, L), b = optimize_at(c3_im, L);
      identical = identical && same(a.ell_raw, b.ell_raw) && same(a.n00_L, b.n00_L) && same(a.n11_L, b.n11_L) &&
                  same(a.e_ph_U, b.e_ph_U) && same(a.user.p_Zac, b.user.p_Zac) && a.path == b.path;
    }
    all = report(4, c.ok && identical,
                 c.text + "; Case 3 IM-only vs IM+PM at 0/20/40/60 km " + (identical ? "identical" : "differ")) &&
          all;
  }
  {
    CutCheck c;
    c.add("4-int no leakage", runner.cutoff(none4).cutoff, 96.0);
    c.add("Case 1", runner.cutoff(c1_4).cutoff, 52.0);
    c.add("Case 2", runner.cutoff(c2_4).cutoff, 57.0);
    c.add("Case 3", runner.cutoff(c3_4).cutoff, 66.0);
    all = report(5, c.ok, c.text) && all;
  }
  {
    std::string text;
    bool ok = p_zac_in(runner.cutoff(c1_pm), 0.60, 0.95, text, "3-int Case 1");
    text += "; ";
    ok = p_zac_in(runner.cutoff(c1_4), 0.70, 0.99, text, "4-int Case 1") && ok;
    text += "; ";
    ok = p_zac_in(runner.cutoff(c3), 0.66, 0.98, text, "3-int Case 3") && ok;
    all = report(6, ok, text) && all;
  }

  using namespace mdiqkd::validation;
  auto timed = [](auto&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    auto r = f();
    return std::make_pair(r, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  };
  {
    LpSuiteOptions opt;
    opt.configs = 100;
    opt.oracle_instances = 50;
    opt.oracle_tol = 1e-8;
    const auto [r, secs] = timed([&] { return lp_sandwich_suite(kSeed + 7, opt); });
    all = report(7, r.passed() && secs <= 300.0, format_result(r) + fmt(", %.0f s (limit 300)", secs)) && all;
  }
  {
    const auto [r, secs] = timed([&] { return trace_distance_suite(kSeed + 8, 200, 1e-9); });
    all = report(8, r.passed(), format_result(r) + fmt(", %.1f s", secs)) && all;
  }
  {
    const auto [r, secs] = timed([&] { return coin_suite(kSeed + 9, 100); });
    all = report(9, r.passed(), format_result(r) + fmt(", %.1f s", secs)) && all;
  }
  {
    CoverageOptions opt;
    opt.resamples = 500;
    const auto [r, secs] = timed([&] { return coverage_suite(kSeed + 10, opt); });
    all = report(10, r.passed() && secs <= 600.0, format_result(r) + fmt(", %.0f s (limit 600)", secs)) && all;
  }
  return all ? 0 : 1;
}
