#pragma once

#include <string>
#include <vector>

#include "nvgyro/config.hpp"

namespace nvgyro {

/// Names accepted by run_command, in help order.
const std::vector<std::string>& command_names();

struct CommandResult {
  std::vector<std::string> files;
  std::size_t warnings = 0;
  std::size_t cell_failures = 0;
};

/// Runs one subcommand and writes its artifacts under cfg.out_dir. Throws
/// ConfigError for bad input and SolverError when the run cannot complete.
CommandResult run_command(const std::string& name, const RunConfig& cfg);

}  // namespace nvgyro
