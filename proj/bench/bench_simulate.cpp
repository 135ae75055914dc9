// Serial reference against the OpenMP kernels on the six-line example portfolio.
#include "trisk/model_io.h"
#include "trisk/simulate.h"
#include "trisk/tweedie_table.h"

#include <benchmark/benchmark.h>

namespace {

struct Inputs {
  trisk::Portfolio portfolio;
  std::vector<trisk::MarginalModel> models;
  trisk::CopulaTree tree;
};

const Inputs& inputs() {
  static const Inputs in = [] {
    Inputs r;
    const std::string dir = TRISK_FIXTURE_DIR "/reference";
    r.portfolio = trisk::load_csv(TRISK_DATA_DIR "/portfolio.csv");
    r.tree = trisk::load_tree(dir + "/tree.json");
    for (const auto& tri : r.portfolio.lines) r.models.push_back(trisk::load_line_model(dir + "/" + tri.line_id() + ".json").model);
    return r;
  }();
  return in;
}

void BM_InnovationPool(benchmark::State& state) {
  const bool parallel = state.range(0) != 0;
  const auto& in = inputs();
  for (auto _ : state) {
    auto pool = trisk::simulate_innovation_matrix(in.tree, 200000, 7, parallel);
    benchmark::DoNotOptimize(pool.values.data());
  }
  state.SetLabel(parallel ? "openmp" : "serial");
}
BENCHMARK(BM_InnovationPool)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_CompleteTriangles(benchmark::State& state) {
  const bool parallel = state.range(0) != 0;
  const auto& in = inputs();
  trisk::ScenarioConfig cfg;
  cfg.n_scenarios = 5000;
  cfg.table_intervals = 256;
  for (auto _ : state) {
    auto set = parallel ? trisk::complete_triangles(in.portfolio, in.models, in.tree, cfg)
                        : trisk::complete_triangles_serial(in.portfolio, in.models, in.tree, cfg);
    benchmark::DoNotOptimize(set.cash_flow.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(cfg.n_scenarios));
  state.SetLabel(parallel ? "openmp" : "serial");
}
BENCHMARK(BM_CompleteTriangles)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->Iterations(1);

void BM_InverseTableBuild(benchmark::State& state) {
  const trisk::tweedie::TweedieParams prm(0.05, 0.02, 1.5);
  for (auto _ : state) {
    trisk::tweedie::InverseTable table(prm, static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(table.zero_mass());
  }
}
BENCHMARK(BM_InverseTableBuild)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
