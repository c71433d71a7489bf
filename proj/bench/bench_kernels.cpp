// Serial reference kernels against their OpenMP versions. On a single-core
// machine the two columns should roughly agree; the gap is the threading cost.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "fes/config.hpp"
#include "fes/datagen.hpp"
#include "fes/engine.hpp"
#include "fes/model.hpp"
#include "fes/selector.hpp"

using namespace fes;

namespace {

TaskData task() {
  SyntheticTaskSpec spec;
  Rng r(1);
  return gen_blobs(spec, r);
}

struct Pool {
  std::vector<SampleId> ids;
  std::vector<std::span<const double>> vectors;
};

Pool pool_of(const TaskData& d, std::size_t n) {
  Pool p;
  for (std::size_t i = 0; i < n && i < d.train.size(); ++i) {
    p.ids.push_back(d.train[i].id);
    p.vectors.emplace_back(d.train[i].embedding);
  }
  return p;
}

void BM_GraphSerial(benchmark::State& st) {
  const auto d = task();
  const auto p = pool_of(d, static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(build_graph_serial(p.ids, p.vectors, 10));
}

void BM_GraphParallel(benchmark::State& st) {
  const auto d = task();
  const auto p = pool_of(d, static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(build_graph(p.ids, p.vectors, 10));
}

void BM_AccuracySerial(benchmark::State& st) {
  const auto d = task();
  Rng r(2);
  const auto m = MlpModel::random(d.dim, 32, 6, d.num_classes, r);
  for (auto _ : st) benchmark::DoNotOptimize(accuracy_serial(m, d.test));
}

void BM_AccuracyParallel(benchmark::State& st) {
  const auto d = task();
  Rng r(2);
  const auto m = MlpModel::random(d.dim, 32, 6, d.num_classes, r);
  for (auto _ : st) benchmark::DoNotOptimize(accuracy(m, d.test));
}

// One FedAvg round over 5 clients with all labels revealed; range(0) is the
// OpenMP thread count.
void BM_TrainingRound(benchmark::State& st) {
  ExperimentConfig cfg;
  const auto w = make_workload(cfg);
  auto e = engine_config(cfg);
  e.pacing.mode = PacingMode::Disabled;
  const Engine engine(w.data, reveal_all_labels(w.shards), e);
  const int before = omp_get_max_threads();
  omp_set_num_threads(static_cast<int>(st.range(0)));
  auto state = engine.initial_state();
  Rng rng(3);
  for (auto _ : st) engine.training_round(state, rng);
  omp_set_num_threads(before);
}

}  // namespace

BENCHMARK(BM_GraphSerial)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GraphParallel)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AccuracySerial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_AccuracyParallel)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_TrainingRound)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
