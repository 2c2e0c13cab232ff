// reem <command> --config <path> [--seed <int>] [--out <dir>]
//
// Exit status: 0 on success, 2 on a configuration or usage error, 1 on any
// other failure.

#include "reem/commands.hpp"
#include "reem/errors.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

int main(int argc, char** argv) {
  CLI::App app{"Ensemble room temperature modelling experiments"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  for (const auto& name : reem::cli::kCommands) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "INI experiment config")->required();
    sub->add_option("--seed", seed, "Override experiment.seed");
    sub->add_option("--out", out_dir, "Override experiment.out_dir");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    auto cfg = reem::pipeline::ExperimentConfig::load(config_path);
    if (seed) cfg.seed = *seed;
    if (out_dir) cfg.out_dir = *out_dir;
    reem::cli::run_command(cfg, command);
  } catch (const reem::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const reem::ContractViolation& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << command << " failed: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
