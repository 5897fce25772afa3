#pragma once

#include <cstdint>
#include <vector>

#include "tdorch/edge_map.hpp"

namespace tdorch::graph {

struct AlgoOptions {
  EdgeMapMode mode = EdgeMapMode::kAuto;
  double mode_alpha = 1.0;
};

// Per-round record of a run: the subset each edge map returned and the mode
// it used.
struct RunTrace {
  std::vector<std::vector<VertexId>> frontiers;
  std::vector<EdgeMapMode> modes;
  std::uint64_t edges_applied = 0;
  bsp::CostCounters counters;

  void record(const EdgeMapResult& r);
};

inline constexpr std::uint32_t kDefaultPrIterations = 10;
inline constexpr double kDefaultDamping = 0.85;

// Hop distances, -1 when unreachable.
std::vector<std::int64_t> bfs(bsp::Cluster& cluster, const DistGraph& g, VertexId start,
                              const AlgoOptions& opt = {}, RunTrace* trace = nullptr);

// Frontier Bellman-Ford. +infinity when unreachable. Throws
// std::invalid_argument on a negative weight.
std::vector<double> sssp(bsp::Cluster& cluster, const DistGraph& g, VertexId start,
                         const AlgoOptions& opt = {}, RunTrace* trace = nullptr);

// Single-source dependency scores: forward path counting over g, then the
// recorded rounds replayed backwards over gt (the transpose of g; pass g
// itself for symmetric graphs; otherwise ingest it with g.partition). The start
// vertex and unreached vertices score 0.
std::vector<double> bc(bsp::Cluster& cluster, const DistGraph& g, const DistGraph& gt, VertexId start,
                       const AlgoOptions& opt = {}, RunTrace* trace = nullptr);

// Minimum-label propagation; expects both directions of every edge.
std::vector<std::uint64_t> cc(bsp::Cluster& cluster, const DistGraph& g, const AlgoOptions& opt = {},
                              RunTrace* trace = nullptr);

// PageRank from the uniform vector; dangling mass is spread uniformly.
std::vector<double> pr(bsp::Cluster& cluster, const DistGraph& g, std::uint32_t iters = kDefaultPrIterations,
                       double damping = kDefaultDamping, const AlgoOptions& opt = {},
                       RunTrace* trace = nullptr);

}  // namespace tdorch::graph
