#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "signlab/config.hpp"
#include "signlab/csv.hpp"
#include "signlab/parallel.hpp"

namespace signlab {

struct ExperimentInfo {
  std::string name;
  std::string description;
  Json defaults;
};

const std::vector<ExperimentInfo>& experiment_registry();

// Throws ConfigError listing the valid names.
const ExperimentInfo& find_experiment(const std::string& name);

struct ExperimentResult {
  CsvTable runs{{"run_id"}};
  std::vector<std::pair<std::string, CsvTable>> extra_tables;  // file name, table
  Json summary;
};

// Runs on a resolved config without touching the filesystem.
ExperimentResult execute_experiment(const std::string& name, const Json& resolved,
                                    Execution exec = Execution::parallel);

struct ExperimentOutput {
  std::filesystem::path dir;
  std::string digest;
  ExperimentResult result;
};

// Resolves `user` against the defaults, runs, and writes
// <out_root>/<name>/<digest>/{runs.csv, summary.json, config.json}.
ExperimentOutput run_experiment(const std::string& name, const Json& user,
                                const std::filesystem::path& out_root,
                                Execution exec = Execution::parallel);

}  // namespace signlab
