// nvgyro: figure-data generator for the NV Lambda-system gyroscope model.
//
//   nvgyro [--config PATH] [--out DIR] [--workers N] [--seed U64] <subcommand>
//
// Exit codes: 0 ok (cell failures are reported as warnings), 1 config error,
// 2 solver hard failure.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>

#include "nvgyro/commands.hpp"
#include "nvgyro/config.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitSolver = 2;

const char* describe(const std::string& name) {
  static const std::map<std::string, const char*> text{
      {"levels", "hyperfine levels, Lambda rates and forbidden-transition strength"},
      {"spectrum", "probe reflection scan across two-photon resonance"},
      {"regime-map", "EIT / MWI / oscillation regimes over (P, Omega_2)"},
      {"sensitivity-map", "rotation sensitivity and readout fidelity over (P, Omega_2)"},
      {"coop-sweep", "optimal sensitivity against cooperativity"},
      {"dynamics", "time-domain trace with beat-note detection"},
      {"comag", "three-ensemble comagnetometer response maps"},
      {"vector", "four-axis crosstalk matrix and rotation-vector reconstruction"},
      {"oracle-validate", "full quantum master equation against mean field"}};
  return text.at(name);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NV-center Lambda-system gyroscope simulator"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  app.option_defaults()->always_capture_default();
  app.add_option("--config", config_path, "YAML run configuration (built-in defaults when absent)")
      ->envname("NVGYRO_CONFIG");
  app.add_option("--out", out_dir, "output directory (overrides output.dir)")->envname("NVGYRO_OUT");
  app.add_option("--workers", workers, "worker threads, 0 = all available")->envname("NVGYRO_WORKERS")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--seed", seed, "random seed for synthetic readout noise")->envname("NVGYRO_SEED");
  app.add_flag("-q,--quiet", quiet, "suppress per-cell warnings on stderr");

  for (const auto& name : nvgyro::command_names()) app.add_subcommand(name, describe(name));
  app.add_subcommand("default-config", "print the built-in configuration as YAML");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  const std::string sub = app.get_subcommands().front()->get_name();
  if (sub == "default-config") {
    std::cout << nvgyro::default_config_yaml();
    return 0;
  }

  nvgyro::RunConfig cfg;
  try {
    cfg = config_path.empty() ? nvgyro::parse_config(nvgyro::default_config_yaml(), "<defaults>")
                              : nvgyro::load_config(config_path);
    if (out_dir) cfg.out_dir = *out_dir;
    if (workers) cfg.workers = *workers;
    if (seed) cfg.seed = *seed;
  } catch (const nvgyro::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  nvgyro::set_warnings_quiet(quiet);
  try {
    const auto res = nvgyro::run_command(sub, cfg);
    for (const auto& f : res.files) std::cout << cfg.out_dir << "/" << f << "\n";
    if (res.warnings > 0 || res.cell_failures > 0)
      std::cerr << "nvgyro " << sub << ": " << res.warnings << " warnings, " << res.cell_failures
                << " failed cells (flagged in the output)\n";
    return 0;
  } catch (const nvgyro::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const nvgyro::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const nvgyro::Error& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  }
}
