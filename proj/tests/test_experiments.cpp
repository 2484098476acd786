#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "signlab/experiments.hpp"

using namespace signlab;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json small_config(const std::string& name) {
  if (name == "quadrant-sweep") return {{"runs", 3}, {"steps", 2000}};
  if (name == "multi-input") return {{"runs", 3}, {"time", 5.0}};
  if (name == "flow-trace") return {{"max_time", 5.0}, {"record_every", 50}};
  if (name == "multi-neuron") return {{"runs", 2}, {"epochs", 200}};
  if (name == "sparse-train")
    return {{"runs", 2}, {"epochs", 2}, {"n_train", 200}, {"n_test", 100}, {"widths", {2, 16, 16, 2}},
            {"warmup_epoch", 1}, {"sharpness_samples", 64}};
  if (name == "sharpness")
    return {{"runs", 2}, {"epochs", 2}, {"n_train", 100}, {"n_test", 50}, {"sharpness_every", 1},
            {"sharpness_samples", 50}, {"warmup_epoch", 1}};
  if (name == "masks") return {{"runs", 2}, {"synflow_rounds", 10}};
  return Json::object();
}

}  // namespace

TEST_CASE("every experiment is deterministic and schedule independent") {
  const auto root = std::filesystem::temp_directory_path() / "signlab_test_experiments";
  std::filesystem::remove_all(root);
  for (const ExperimentInfo& info : experiment_registry()) {
    CAPTURE(info.name);
    const Json cfg = small_config(info.name);
    const ExperimentOutput a = run_experiment(info.name, cfg, root / "a", Execution::parallel);
    const ExperimentOutput b = run_experiment(info.name, cfg, root / "b", Execution::serial);
    CHECK(a.digest == b.digest);
    CHECK(std::filesystem::exists(a.dir / "config.json"));
    CHECK(std::filesystem::exists(a.dir / "summary.json"));
    const std::string csv = slurp(a.dir / "runs.csv");
    CHECK(!csv.empty());
    CHECK(csv == slurp(b.dir / "runs.csv"));
    CHECK(slurp(a.dir / "summary.json") == slurp(b.dir / "summary.json"));
    CHECK(a.dir == root / "a" / info.name / a.digest);
  }
  std::filesystem::remove_all(root);
}

TEST_CASE("csv headers") {
  const Json q = resolve_config(find_experiment("quadrant-sweep").defaults, small_config("quadrant-sweep"));
  const ExperimentResult r = execute_experiment("quadrant-sweep", q, Execution::parallel);
  CHECK(r.runs.header() == std::vector<std::string>{"run_id", "seed", "method", "quadrant", "outcome",
                                                    "a_final", "w1_final", "loss_final", "steps"});
  CHECK(r.runs.rows().size() == 4 * 4 * 3);

  const Json s = resolve_config(find_experiment("sparse-train").defaults, small_config("sparse-train"));
  const ExperimentResult sr = execute_experiment("sparse-train", s, Execution::parallel);
  CHECK(sr.runs.header() == std::vector<std::string>{"run_id", "seed", "epoch", "split", "loss", "accuracy",
                                                     "flip_frac_cum", "flips_epoch", "sharpness", "sparsity"});
  // 2 runs x 5 arms x 3 epochs x 2 splits
  CHECK(sr.runs.rows().size() == 60);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(find_experiment("nope"), ConfigError);
  try {
    run_experiment("flops", Json{{"bogus", 1}}, std::filesystem::temp_directory_path());
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()) == "unknown key: bogus");
  }
  Json bad_layer = {{"layers", {{{"type", "conv"}, {"h_out", 1}}}}};
  CHECK_THROWS_AS(run_experiment("flops", bad_layer, std::filesystem::temp_directory_path()), ConfigError);
  Json extra = {{"layers", {{{"type", "linear"}, {"m", 1}, {"n", 1}, {"q", 1}}}}};
  CHECK_THROWS_WITH_AS(run_experiment("flops", extra, std::filesystem::temp_directory_path()),
                       "unknown key: layers[0].q", ConfigError);
}
