#include "mdiqkd/commands.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <ostream>
#include <random>
#include <thread>

#include "mdiqkd/report.hpp"

namespace mdiqkd {

std::uint64_t point_seed(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

KeyRateResult run_point(const RunConfig& rc, double L, std::uint64_t seed) {
  ChannelParams ch = rc.channel;
  ch.L = L;
  return optimize_keyrate(rc.protocol, ch, rc.tha, rc.eval_options(), rc.optimize_settings(seed));
}

std::vector<ScanPoint> run_scan(const RunConfig& rc) {
  const auto distances = rc.scan.distances();
  std::vector<ScanPoint> rows(distances.size());
  std::size_t workers = rc.parallelism > 0 ? static_cast<std::size_t>(rc.parallelism) : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, distances.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < distances.size(); i = next++)
      rows[i] = {distances[i], run_point(rc, distances[i], point_seed(rc.seed, i))};
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
  }
  std::sort(rows.begin(), rows.end(), [](const ScanPoint& a, const ScanPoint& b) { return a.L < b.L; });
  return rows;
}

void write_csv(std::ostream& out, const std::vector<ScanPoint>& rows) {
  out << csv_header() << '\n';
  for (const auto& r : rows) out << csv_row(r.L, r.result) << '\n';
}

std::string resolve_output_path(const std::string& configured) {
  namespace fs = std::filesystem;
  const char* dir = std::getenv("MDIQKD_OUTPUT_DIR");
  if (dir == nullptr || *dir == '\0') return configured;
  return (fs::path(dir) / fs::path(configured).filename()).string();
}

void dump_lps(std::ostream& out, const RunConfig& rc, double L) {
  ChannelParams ch = rc.channel;
  ch.L = L;
  const auto stats = expected_counts(rc.protocol, ch);
  const auto path = phase_path(rc.tha);
  const auto budget =
      plan_budget(rc.budget, rc.protocol.variant, rc.lp.form, rc.protocol.S_cut, phase_invocations(path));
  for (const auto& item : decoy_lp_set(stats, rc.tha, rc.protocol, budget, rc.lp)) {
    out << "\\ " << item.name << " N_chi=" << format_number(item.Nchi) << '\n';
    out << to_lp_text(item.lp) << '\n';
  }
}

}  // namespace mdiqkd
