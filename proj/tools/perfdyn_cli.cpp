// perfdyn: command-line front end.
//
//   perfdyn <command> --config <path> [--out <path>] [--seed <u64>] [--quiet]
//
// Exit codes: 0 success (a failed period-three certificate is a result),
// 1 validation error, 2 numerical failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>

#include "perfdyn/commands.hpp"

namespace {

using Command = perfdyn::Report (*)(const perfdyn::ExperimentConfig&, std::ostream*,
                                    const perfdyn::CommandOptions&);

int run(Command command, const std::string& config_path, const std::string& out_path,
        std::optional<std::uint64_t> seed, bool quiet) {
  try {
    const perfdyn::ExperimentConfig cfg = perfdyn::load_config(config_path);
    std::ofstream file;
    std::ostream* csv = nullptr;
    if (!out_path.empty()) {
      file.open(out_path);
      if (!file) throw perfdyn::ValidationError("cannot write '" + out_path + "'");
      csv = &file;
    }
    const perfdyn::Report report = command(cfg, csv, perfdyn::CommandOptions{seed});
    if (!quiet) std::cout << report.render();
    return 0;
  } catch (const perfdyn::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const perfdyn::NonConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\nresidual = " << perfdyn::format_double(e.residual()) << '\n';
    return 2;
  } catch (const perfdyn::NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent performative prediction: stable points, dynamics and chaos diagnostics"};
  app.require_subcommand(1);

  const std::map<std::string, std::pair<Command, std::string>> commands = {
      {"stable-point", {perfdyn::cmd_stable_point, "Solve for the stable point and report certificates"}},
      {"simulate", {perfdyn::cmd_simulate, "Run exponentiated-gradient dynamics, write trajectory CSV"}},
      {"stochastic", {perfdyn::cmd_stochastic, "Run sampled-gradient dynamics, write trajectory CSV"}},
      {"ode", {perfdyn::cmd_ode, "Integrate the continuous-time dynamics with RK4"}},
      {"chaos", {perfdyn::cmd_chaos, "Reduced map: certificate, carrying capacity, Lyapunov diagnostic"}},
      {"bifurcation", {perfdyn::cmd_bifurcation, "Scan the reduced map over an L grid, write CSV"}},
  };

  std::string config_path;
  std::string out_path;
  std::uint64_t seed = 0;
  bool quiet = false;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.second);
    sub->add_option("--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_path, "CSV output path");
    sub->add_option("--seed", seed, "Base seed for sampled gradients");
    sub->add_flag("--quiet", quiet, "Do not print the report");
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) {
      std::optional<std::uint64_t> seed_override;
      if (sub->count("--seed") > 0) seed_override = seed;
      return run(commands.at(name).first, config_path, out_path, seed_override, quiet);
    }
  }
  return 1;
}
