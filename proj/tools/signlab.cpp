#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "signlab/config.hpp"
#include "signlab/experiments.hpp"

namespace {

std::filesystem::path output_root(const std::optional<std::string>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("SIGNLAB_OUT"); env && *env) return env;
  return "results";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"signlab: sign-in reparameterization experiments"};
  app.require_subcommand(0, 1);

  std::string experiment;
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> runs;
  std::optional<std::string> out;
  bool serial = false;

  auto* list = app.add_subcommand("list", "print the available experiments");
  app.add_option("experiment", experiment, "experiment name (see `signlab list`)");
  app.add_option("--config", config_path, "JSON config file; omitted keys take defaults");
  app.add_option("--seed", seed, "base seed");
  app.add_option("--runs", runs, "number of runs");
  app.add_option("--out", out, "output root (default $SIGNLAB_OUT, then ./results)");
  app.add_flag("--serial", serial, "run without OpenMP");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (list->parsed()) {
    for (const auto& info : signlab::experiment_registry()) {
      std::cout << info.name << "\t" << info.description << "\n";
    }
    return 0;
  }
  if (experiment.empty()) {
    std::cerr << "error: no experiment given; try `signlab list`\n";
    return 1;
  }

  signlab::Json user = signlab::Json::object();
  try {
    signlab::find_experiment(experiment);
    if (config_path) user = signlab::load_config_file(*config_path);
    if (!user.is_object()) throw signlab::ConfigError("config must be a JSON object");
    if (seed) user["seed"] = *seed;
    if (runs) user["runs"] = *runs;
  } catch (const signlab::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    const auto exec = serial ? signlab::Execution::serial : signlab::Execution::parallel;
    const auto result = signlab::run_experiment(experiment, user, output_root(out), exec);
    std::cout << result.dir.string() << "\n";
  } catch (const signlab::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
