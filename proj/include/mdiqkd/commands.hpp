#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mdiqkd/keyrate.hpp"
#include "mdiqkd/run_config.hpp"

namespace mdiqkd {

struct ScanPoint {
  double L = 0.0;
  KeyRateResult result;
};

/// Restart seed of scan point `index`; independent of thread scheduling.
std::uint64_t point_seed(std::uint64_t seed, std::size_t index);

/// Optimized key rate at one distance.
KeyRateResult run_point(const RunConfig& rc, double L, std::uint64_t seed);

/// Every distance of the scan range, sorted by distance.
std::vector<ScanPoint> run_scan(const RunConfig& rc);

void write_csv(std::ostream& out, const std::vector<ScanPoint>& rows);

/// Output path after applying the MDIQKD_OUTPUT_DIR override.
std::string resolve_output_path(const std::string& configured);

/// Text dump of the decoy LPs solved at the configured (not optimized) parameters.
void dump_lps(std::ostream& out, const RunConfig& rc, double L);

}  // namespace mdiqkd
