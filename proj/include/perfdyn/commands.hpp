#pragma once

// Command implementations behind the perfdyn CLI.  Each command reads the
// validated config, writes its CSV to `csv` (when non-null) and returns the
// flat report it prints.

#include <cstdint>
#include <iosfwd>
#include <optional>

#include "perfdyn/io.hpp"

namespace perfdyn {

struct CommandOptions {
  std::optional<std::uint64_t> seed;  // overrides the config's stochastic seed
};

Report cmd_stable_point(const ExperimentConfig& cfg, std::ostream* csv, const CommandOptions& opts = {});
Report cmd_simulate(const ExperimentConfig& cfg, std::ostream* csv, const CommandOptions& opts = {});
Report cmd_stochastic(const ExperimentConfig& cfg, std::ostream* csv, const CommandOptions& opts = {});
Report cmd_ode(const ExperimentConfig& cfg, std::ostream* csv, const CommandOptions& opts = {});
/// Certificate failure is a normal result, reported rather than thrown.
Report cmd_chaos(const ExperimentConfig& cfg, std::ostream* csv, const CommandOptions& opts = {});
Report cmd_bifurcation(const ExperimentConfig& cfg, std::ostream* csv, const CommandOptions& opts = {});

}  // namespace perfdyn
