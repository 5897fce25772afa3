#pragma once

#include <functional>
#include <string_view>
#include <optional>

#include "tdorch/dist_graph.hpp"
#include "tdorch/mergeable.hpp"

namespace tdorch::graph {

enum class EdgeMapMode { kAuto, kSparse, kDense };

std::optional<EdgeMapMode> parse_mode(std::string_view name);
std::string_view to_string(EdgeMapMode m);

struct EdgeMapSpec {
  // Read on the owner of u for every active u.
  std::function<Value(VertexId u)> source_value;
  // Contribution of edge (u, v, w); merge_value.identity means none.
  std::function<Value(VertexId u, VertexId v, double w, const Value& src)> f;
  // Run once on owner(v) for every v that received a contribution; true puts
  // v in the output subset.
  std::function<bool(VertexId v, const Value& aggregate)> write_back;
  // Optional. Edge holders that own v skip f for rejected v; the owner also
  // drops rejected v before write_back, so remote edges into them are
  // evaluated but never written.
  std::function<bool(VertexId v)> filter_dst;
  MergeableOp merge_value;
  double mode_alpha = 1.0;
  EdgeMapMode mode = EdgeMapMode::kAuto;
};

struct EdgeMapResult {
  DistVertexSubset next;
  EdgeMapMode mode = EdgeMapMode::kSparse;
  std::uint64_t edges_applied = 0;
  bsp::CostCounters counters;
};

// Sparse iff the out-degree sum over U is below alpha * P * |U|.
EdgeMapMode choose_mode(const DistGraph& g, const DistVertexSubset& u, double alpha);

// Applies f to every out-edge of U (subject to filter_dst), combines
// contributions per destination along the destination trees in canonical
// order, and applies write_back at the owners. Sparse mode pushes source
// values down the source trees; dense mode sends them to every machine
// holding the vertex's edges and scans all local edges. Both evaluate the
// same edges in the same order, so results do not depend on the mode.
EdgeMapResult dist_edge_map(bsp::Cluster& cluster, const DistGraph& g, const DistVertexSubset& u,
                            const EdgeMapSpec& spec);

}  // namespace tdorch::graph
