// Command-line front end for the experiment harness.
//
//   gsmvi run --config <path> [--output-dir <dir>]
//   gsmvi validate --config <path>
//
// Exit status: 0 success, 1 configuration error, 2 runtime failure.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gsmvi/config.hpp"
#include "gsmvi/harness.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian score matching VI and BBVI experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;

  auto* run = app.add_subcommand("run", "Run the experiment a config describes");
  run->add_option("--config", config_path, "Experiment config file")->required();
  run->add_option("--output-dir", output_dir, "Override output_dir from the config");

  auto* validate = app.add_subcommand("validate", "Parse and validate a config without running it");
  validate->add_option("--config", config_path, "Experiment config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  gsmvi::ExperimentConfig config;
  try {
    config = gsmvi::load_config(config_path);
    if (!output_dir.empty()) config.output_dir = output_dir;
  } catch (const gsmvi::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  if (*validate) {
    std::cout << gsmvi::echo_config(config);
    return 0;
  }

  try {
    const auto outcome = gsmvi::run_experiment(config);
    for (const auto& f : outcome.files) std::cout << "wrote " << f.string() << "\n";
    for (const auto& msg : outcome.failures) std::cerr << "run failed: " << msg << "\n";
    return outcome.ok() ? 0 : kExitRuntime;
  } catch (const gsmvi::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
