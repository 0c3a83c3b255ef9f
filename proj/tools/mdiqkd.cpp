// Command-line front end: scan, point, validate, lp-dump.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "mdiqkd/commands.hpp"
#include "mdiqkd/report.hpp"
#include "mdiqkd/run_config.hpp"
#include "mdiqkd/validation/suites.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

int cmd_scan(const std::string& config_path) {
  const auto rc = mdiqkd::load_run_config(config_path);
  const auto rows = mdiqkd::run_scan(rc);
  const std::filesystem::path out_path = mdiqkd::resolve_output_path(rc.output);
  if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write '" + out_path.string() + "'");
  mdiqkd::write_csv(out, rows);
  out.close();
  if (!out) throw std::runtime_error("write to '" + out_path.string() + "' failed");
  std::cerr << "wrote " << rows.size() << " rows to " << out_path.string() << '\n';
  return 0;
}

int cmd_point(const std::string& config_path, double L) {
  const auto rc = mdiqkd::load_run_config(config_path);
  const auto r = mdiqkd::run_point(rc, L, mdiqkd::point_seed(rc.seed, 0));
  std::cout << mdiqkd::point_report(rc, L, r).dump(2) << '\n';
  return 0;
}

int cmd_validate(std::uint64_t seed, const std::string& fault, int resamples) {
  mdiqkd::validation::ValidateOptions opt;
  opt.seed = seed;
  if (fault == "corrupted-D")
    opt.corrupt_D = true;
  else if (!fault.empty())
    throw mdiqkd::ConfigError("unknown fault '" + fault + "'");
  if (resamples > 0) opt.coverage.resamples = resamples;
  bool all = true;
  for (const auto& r : mdiqkd::validation::run_validation(opt)) {
    std::cout << mdiqkd::validation::format_result(r) << '\n';
    all = all && r.passed();
  }
  return all ? 0 : kExitRuntime;
}

int cmd_lp_dump(const std::string& config_path, double L) {
  const auto rc = mdiqkd::load_run_config(config_path);
  mdiqkd::dump_lps(std::cout, rc, L);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-key decoy-state MDI-QKD with leaky sources"};
  app.require_subcommand(1);

  std::string config_path;
  double distance = 0.0;

  auto* scan = app.add_subcommand("scan", "Optimized key rate over a distance range, written as CSV");
  scan->add_option("config", config_path, "JSON run configuration")->required();

  auto* point = app.add_subcommand("point", "Diagnostic JSON report for one distance");
  point->add_option("config", config_path, "JSON run configuration")->required();
  point->add_option("--distance", distance, "Alice-Bob distance in km")->required()->check(CLI::NonNegativeNumber);

  std::uint64_t seed = 1;
  std::string fault;
  int resamples = 0;
  auto* validate = app.add_subcommand("validate", "Run the randomized validation suites");
  validate->add_option("--seed", seed, "Master seed");
  validate->add_option("--inject-fault", fault, "Deliberate fault to inject")->check(CLI::IsMember({"corrupted-D"}));
  validate->add_option("--coverage-resamples", resamples, "Override the coverage resample count");

  auto* dump = app.add_subcommand("lp-dump", "Print the decoy LPs at the configured parameters");
  dump->add_option("config", config_path, "JSON run configuration")->required();
  dump->add_option("--distance", distance, "Alice-Bob distance in km")->required()->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*scan) return cmd_scan(config_path);
    if (*point) return cmd_point(config_path, distance);
    if (*validate) return cmd_validate(seed, fault, resamples);
    if (*dump) return cmd_lp_dump(config_path, distance);
  } catch (const mdiqkd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
