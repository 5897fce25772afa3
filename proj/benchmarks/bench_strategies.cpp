#include <benchmark/benchmark.h>

#include "tdorch/baselines.hpp"
#include "tdorch/kv_workload.hpp"
#include "tdorch/meta_task.hpp"

using namespace tdorch;

namespace {

// Args: strategy index, machines, gamma * 10.
void BM_Strategy(benchmark::State& state) {
  const auto strategy = static_cast<Strategy>(state.range(0));
  const auto p = static_cast<std::uint32_t>(state.range(1));
  const double gamma = static_cast<double>(state.range(2)) / 10.0;
  const kv::ZipfSpec z{gamma, kv::kDefaultKeySpace, 5000, 1};
  const TaskBatch tasks = kv::gen_zipf_tasks(z, p);
  const kv::KvPartition part(z.key_space, p);
  const OrchestrationSpec spec = kv::kv_spec(part, kv::KvMerge::kDelta);
  StageResult last;
  for (auto _ : state) {
    bsp::Cluster cluster({p, z.seed, 1});
    last = run_strategy(strategy, cluster, tasks, spec);
    benchmark::DoNotOptimize(last.supersteps);
  }
  state.SetLabel(to_string(strategy));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * z.tasks_per_machine * p));
  state.counters["words"] = static_cast<double>(last.counters.total_sent());
  state.counters["max_words"] = static_cast<double>(last.counters.max_words());
  state.counters["recv_imbalance"] = bsp::load_imbalance(last.counters, bsp::Metric::kReceived);
  state.counters["supersteps"] = static_cast<double>(last.supersteps);
}

void strategy_args(benchmark::internal::Benchmark* b) {
  for (int s = 0; s < 4; ++s) {
    for (int p : {4, 16}) {
      for (int g : {0, 15, 20}) b->Args({s, p, g});
    }
  }
}

BENCHMARK(BM_Strategy)->Apply(strategy_args)->Unit(benchmark::kMillisecond);

void BM_MetaTaskMerge(benchmark::State& state) {
  const auto c = static_cast<std::uint32_t>(state.range(0));
  const std::uint32_t n = 4096;
  for (auto _ : state) {
    SpillArena arena(0);
    MetaTaskSet acc(c);
    for (std::uint32_t i = 0; i < n; ++i) {
      acc = merge(std::move(acc), MetaTaskSet::wrap(TaskContext({i % 64}, {}, 0, i), c), arena);
    }
    benchmark::DoNotOptimize(acc.entry_count());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

BENCHMARK(BM_MetaTaskMerge)->Arg(2)->Arg(8)->Arg(32);

}  // namespace

BENCHMARK_MAIN();
