#include <benchmark/benchmark.h>

#include "tdorch/graph_algos.hpp"

using namespace tdorch;
using namespace tdorch::graph;

namespace {

const EdgeList& ba_graph() {
  static const EdgeList g = symmetrize(gen_ba(20000, 8, 1));
  return g;
}

// Args: machines, mode (0 auto, 1 sparse, 2 dense).
void BM_Bfs(benchmark::State& state) {
  const auto p = static_cast<std::uint32_t>(state.range(0));
  const auto mode = static_cast<EdgeMapMode>(state.range(1));
  bsp::Cluster cluster({p, 1, 1});
  const DistGraph g = ingest(cluster, ba_graph(), {});
  RunTrace trace;
  for (auto _ : state) {
    trace = RunTrace{};
    benchmark::DoNotOptimize(bfs(cluster, g, 0, {mode, 1.0}, &trace));
  }
  state.SetLabel(std::string(to_string(mode)));
  state.counters["words"] = static_cast<double>(trace.counters.total_sent());
  state.counters["rounds"] = static_cast<double>(trace.modes.size());
}

void BM_PageRank(benchmark::State& state) {
  const auto p = static_cast<std::uint32_t>(state.range(0));
  bsp::Cluster cluster({p, 1, 1});
  const DistGraph g = ingest(cluster, ba_graph(), {});
  RunTrace trace;
  for (auto _ : state) {
    trace = RunTrace{};
    benchmark::DoNotOptimize(pr(cluster, g, 5, kDefaultDamping, {}, &trace));
  }
  state.counters["words"] = static_cast<double>(trace.counters.total_sent());
  state.counters["imbalance"] = bsp::load_imbalance(trace.counters, bsp::Metric::kTotalWords);
}

void BM_Ingest(benchmark::State& state) {
  const auto p = static_cast<std::uint32_t>(state.range(0));
  for (auto _ : state) {
    bsp::Cluster cluster({p, 1, 1});
    benchmark::DoNotOptimize(ingest(cluster, ba_graph(), {}).m);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * ba_graph().edges.size()));
}

BENCHMARK(BM_Bfs)->ArgsProduct({{4, 16}, {0, 1, 2}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PageRank)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Ingest)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
