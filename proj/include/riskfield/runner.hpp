#pragma once

#include <string>

#include "riskfield/io.hpp"

namespace riskfield {

struct CommandResult {
  int exit_code = 0;  // 0 ok, 1 usage, 2 runtime fault, 3 check failure
  std::string message;
};

/// Writes scenario_count scenario specs plus patch CSV grids under out_dir.
CommandResult cmd_generate(const RunConfig& config);

/// Trains the requested variants: fits (or loads) the geometry-only
/// checkpoint, runs the episode loop per head-trained variant, and writes
/// checkpoints plus a per-epoch CSV log.
CommandResult cmd_train(const RunConfig& config);

/// Paired evaluation across the requested variants; writes
/// report.{json,csv,md}.
CommandResult cmd_eval(const RunConfig& config);

/// Empirical theory checks; exit code 3 when any check fails.
CommandResult cmd_theory(const RunConfig& config);

/// Exports one episode's trajectory, gate trace, and patch grids.
CommandResult cmd_export(const RunConfig& config);

}  // namespace riskfield
