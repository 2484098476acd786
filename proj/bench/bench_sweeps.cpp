#include <benchmark/benchmark.h>

#include "signlab/neuron_flow.hpp"
#include "signlab/sparse_train.hpp"

namespace {

signlab::QuadrantSweepConfig sweep_config() {
  signlab::QuadrantSweepConfig c;
  c.runs = 16;
  c.steps = 2000;
  return c;
}

void BM_QuadrantSweep(benchmark::State& state) {
  const auto exec = state.range(0) ? signlab::Execution::parallel : signlab::Execution::serial;
  const auto cfg = sweep_config();
  for (auto _ : state) {
    auto r = signlab::quadrant_sweep(signlab::SweepMethod::sign_in, cfg, exec);
    benchmark::DoNotOptimize(r.success_fraction);
  }
  state.SetLabel(state.range(0) ? "parallel" : "serial");
}
BENCHMARK(BM_QuadrantSweep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_SparseStudy(benchmark::State& state) {
  const auto exec = state.range(0) ? signlab::Execution::parallel : signlab::Execution::serial;
  signlab::StudyConfig cfg;
  cfg.runs = 4;
  cfg.widths = {2, 32, 32, 2};
  cfg.n_train = 500;
  cfg.n_test = 200;
  cfg.train.epochs = 4;
  cfg.train.final_sharpness = false;
  for (auto _ : state) {
    auto runs = signlab::sparse_study(cfg, exec);
    benchmark::DoNotOptimize(runs.data());
  }
  state.SetLabel(state.range(0) ? "parallel" : "serial");
}
BENCHMARK(BM_SparseStudy)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
