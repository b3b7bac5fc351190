// Serial reference vs OpenMP kernels. Thread count is the runtime default; set
// OMP_NUM_THREADS to compare.

#include <benchmark/benchmark.h>

#include "fixtures.hpp"
#include "wvt/evalsuite.hpp"
#include "wvt/kernels.hpp"
#include "wvt/stats.hpp"

using namespace wvt;

namespace {

const TrainingSet& synthetic_set() {
  static const TrainingSet data = [] {
    GeneratorConfig g;
    g.per_class = 200;
    const auto syn = generate_synthetic(g);
    return assemble_dataset(syn.records, syn.video, syn.tokens);
  }();
  return data;
}

template <bool Parallel>
void BM_ChunkedGradient(benchmark::State& state) {
  const auto& data = synthetic_set();
  TrainConfig tc;
  tc.batch_size = static_cast<std::size_t>(state.range(0));
  tc.total_steps = 10;
  tc.warmup_steps = 1;
  Trainer trainer(init_model(model_config_for(data, tc, {64}, 32)), tc);
  const auto chunks = trainer.build_chunks(data, 0);
  const auto loss = tc.loss_config();
  for (auto _ : state) {
    auto out = Parallel ? kernels::chunked_gradient_omp(trainer.model(), chunks, loss)
                        : kernels::chunked_gradient_serial(trainer.model(), chunks, loss);
    benchmark::DoNotOptimize(out.value);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_OwnRanks(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Matrix preds(n, 64), targets(n, 64);
  for (auto& x : preds.data) x = rng.normal();
  for (auto& x : targets.data) x = rng.normal();
  for (auto _ : state) {
    auto r = Parallel ? kernels::own_ranks_omp(preds, targets) : kernels::own_ranks_serial(preds, targets);
    benchmark::DoNotOptimize(r.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_Stats(benchmark::State& state) {
  const auto recs = fixtures::ranked_corpus(100, static_cast<std::size_t>(state.range(0)) / 100, 3);
  for (auto _ : state) {
    auto s = Parallel ? kernels::compute_stats_omp(recs) : compute_stats(recs);
    benchmark::DoNotOptimize(s.record_count);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(recs.size()));
}

}  // namespace

BENCHMARK(BM_ChunkedGradient<false>)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ChunkedGradient<true>)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OwnRanks<false>)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OwnRanks<true>)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Stats<false>)->Arg(10000)->Arg(50000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Stats<true>)->Arg(10000)->Arg(50000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
