#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "tdorch/baselines.hpp"
#include "tdorch/graph_io.hpp"

using namespace tdorch;
using namespace tdorch::cli;

namespace {

void add_common(CLI::App* cmd, CommonOptions& o, CLI::Option*& seed_opt) {
  cmd->add_option("--machines", o.machines, "Simulated machines (P)")->check(CLI::Range(1u, 65536u));
  seed_opt = cmd->add_option("--seed", o.seed, "Seed (default: TDORCH_SEED, else 1)");
  cmd->add_option("--threads", o.threads, "Host threads used to step machines")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "Report path (default: stdout)");
  cmd->add_option("--csv", o.csv, "Per-machine counters as CSV");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Task-data orchestration on a simulated BSP cluster"};
  app.require_subcommand(1);

  OrchBenchOptions ob;
  CLI::Option* ob_seed = nullptr;
  auto* orch = app.add_subcommand("orch-bench", "Key-value Zipf microbenchmark under one strategy");
  add_common(orch, ob.common, ob_seed);
  orch->add_option("--strategy", ob.strategy, "td-orch | direct-pull | direct-push | sorting");
  orch->add_option("--gamma", ob.gamma, "Zipf exponent (0 = uniform)")->check(CLI::NonNegativeNumber);
  orch->add_option("--tasks-per-machine", ob.tasks_per_machine, "Tasks generated on each machine");
  orch->add_option("--keys", ob.keys, "Key space size")->check(CLI::PositiveNumber);
  orch->add_option("--chunk-size", ob.chunk_size, "Meta-task chunk size C");
  orch->add_option("--fanout", ob.fanout, "Communication forest fan-out (0 = default)");
  orch->add_option("--kv-merge", ob.kv_merge, "delta | affine");
  orch->add_option("--pair-fraction", ob.pair_fraction, "Share of tasks touching a second key")
      ->check(CLI::Range(0.0, 1.0));
  orch->add_option("--dump", ob.dump, "Write final key values as text");

  GraphOptions go;
  CLI::Option* go_seed = nullptr;
  auto* gr = app.add_subcommand("graph", "Run a graph algorithm on the distributed engine");
  add_common(gr, go.common, go_seed);
  gr->add_option("--algo", go.algo, "bfs | sssp | bc | cc | pr")->required();
  gr->add_option("--input", go.input, "Edge-list file");
  gr->add_option("--gen", go.gen, "Generate instead: er | ba");
  gr->add_option("--n", go.n, "Vertices for --gen");
  gr->add_option("--p", go.p, "Edge probability for --gen er");
  gr->add_option("--m", go.m, "Edges per new vertex for --gen ba");
  gr->add_option("--max-weight", go.max_weight, "Assign integer weights in [1, W]");
  gr->add_flag("--undirected", go.undirected, "Add the reverse of every edge");
  gr->add_option("--start", go.start, "Source vertex (bfs, sssp, bc)");
  gr->add_option("--iters", go.iters, "PageRank iterations");
  gr->add_option("--damping", go.damping, "PageRank damping factor");
  gr->add_option("--mode", go.mode, "auto | sparse | dense");
  gr->add_option("--mode-alpha", go.mode_alpha, "Sparse/dense switch factor");
  gr->add_option("--chunk-size", go.chunk_size, "Trees are built for degree >= C");
  gr->add_option("--fanout", go.fanout, "Tree fan-out (0 = default)");
  gr->add_option("--values", go.values, "Write one value per vertex");
  gr->add_option("--dump", go.dump, "Include the values in the report");

  GenGraphOptions gg;
  auto* gen = app.add_subcommand("gen-graph", "Write an Erdos-Renyi or Barabasi-Albert edge list");
  gen->add_option("--model", gg.model, "er | ba")->required();
  gen->add_option("--n", gg.n, "Vertices");
  gen->add_option("--p", gg.p, "Edge probability (er)");
  gen->add_option("--m", gg.m, "Edges per new vertex (ba)");
  gen->add_option("--max-weight", gg.max_weight, "Assign integer weights in [1, W]");
  gen->add_flag("--undirected", gg.undirected, "Add the reverse of every edge");
  auto* gg_seed = gen->add_option("--seed", gg.seed, "Seed (default: TDORCH_SEED, else 1)");
  gen->add_option("--out", gg.out, "Output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*orch) {
      ob.common.seed_given = ob_seed->count() > 0;
      return run_orch_bench(ob);
    }
    if (*gr) {
      go.common.seed_given = go_seed->count() > 0;
      return run_graph(go);
    }
    gg.seed_given = gg_seed->count() > 0;
    return run_gen_graph(gg);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UnsupportedWorkload& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUnsupported;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const graph::GraphIoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
