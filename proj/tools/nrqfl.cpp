#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nrqfl/cli/commands.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> strategy;

  void attach(CLI::App* app, bool with_outputs) {
    app->add_option("--config", config, "JSON experiment config");
    app->add_option("--seed", seed, "Master seed (overrides the config)");
    if (with_outputs) {
      app->add_option("--out", out, "Output directory (overrides the config)");
      app->add_option("--strategy", strategy, "Comma-separated strategies: fedavg,qfl,nrqfl");
    }
  }

  nrqfl::cli::ExperimentConfig load() const {
    std::optional<std::filesystem::path> path;
    if (!config.empty()) path = config;
    return nrqfl::cli::parse_config(path, {seed, out, strategy});
  }
};

}  // namespace

int main(int argc, char** argv) {
  using namespace nrqfl::cli;

  CLI::App app{"Noise-resilient quantum federated learning simulator"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  auto* run = app.add_subcommand("run", "Run each strategy and write rounds.csv and summary.json");
  run_flags.attach(run, true);

  CommonFlags validate_flags;
  bool inject_broken = false;
  auto* validate = app.add_subcommand("validate", "Run the invariant suite");
  validate_flags.attach(validate, false);
  validate->add_flag("--inject-broken-channel", inject_broken, "Add a non-trace-preserving channel to the CPTP check");

  CommonFlags sweep_flags;
  std::string axis_name;
  std::vector<double> values;
  auto* sweep = app.add_subcommand("sweep", "Run one experiment per axis value and write sweep.csv");
  sweep_flags.attach(sweep, true);
  sweep->add_option("--axis", axis_name, "shots, depth or noise")->required();
  sweep->add_option("--values", values, "Axis values, comma-separated")->required()->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(run_flags.load());
    if (*validate) {
      const auto cfg = validate_flags.load();
      nrqfl::validation::SuiteOptions opt;
      opt.noise = cfg.settings.noise;
      opt.seed = cfg.settings.seed();
      opt.inject_broken_channel = inject_broken;
      return cmd_validate(opt);
    }
    if (*sweep) {
      const auto axis = parse_axis(axis_name);
      if (!axis) throw ConfigError("--axis", "expected shots, depth or noise");
      return cmd_sweep(sweep_flags.load(), *axis, values);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  return kConfigError;
}
