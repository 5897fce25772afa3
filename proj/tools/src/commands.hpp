#pragma once

#include <string>

#include "report.hpp"
#include "tdorch/graph_algos.hpp"
#include "tdorch/kv_workload.hpp"

namespace tdorch::cli {

struct OrchBenchOptions {
  CommonOptions common;
  std::string strategy = "td-orch";
  double gamma = 0.0;
  std::uint64_t tasks_per_machine = 10000;
  std::uint64_t keys = kv::kDefaultKeySpace;
  std::uint32_t chunk_size = kDefaultChunkSize;
  std::uint32_t fanout = 0;
  std::string kv_merge = "delta";
  double pair_fraction = 0.0;
  std::string dump;
};

struct GraphOptions {
  CommonOptions common;
  std::string algo;
  std::string input;
  std::string gen;
  std::uint64_t n = 1000;
  double p = 0.01;
  std::uint64_t m = 5;
  std::uint64_t max_weight = 0;
  bool undirected = false;
  std::int64_t start = -1;
  std::uint32_t iters = graph::kDefaultPrIterations;
  double damping = graph::kDefaultDamping;
  std::string mode = "auto";
  double mode_alpha = 1.0;
  std::uint32_t chunk_size = kDefaultChunkSize;
  std::uint32_t fanout = 0;
  std::string values;
  std::string dump;
};

struct GenGraphOptions {
  std::string model;
  std::uint64_t n = 1000;
  double p = 0.01;
  std::uint64_t m = 5;
  std::uint64_t max_weight = 0;
  bool undirected = false;
  std::uint64_t seed = 1;
  bool seed_given = false;
  std::string out;
};

int run_orch_bench(const OrchBenchOptions& o);
int run_graph(const GraphOptions& o);
int run_gen_graph(const GenGraphOptions& o);

}  // namespace tdorch::cli
