#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "tdorch/bsp.hpp"
#include "tdorch/graph_io.hpp"
#include "tdorch/meta_task.hpp"

namespace tdorch::graph {

// Contiguous vertex ranges; begin has P + 1 entries.
struct VertexPartition {
  std::vector<VertexId> begin;

  std::uint32_t num_machines() const { return static_cast<std::uint32_t>(begin.size() - 1); }
  MachineId owner(VertexId v) const;
  VertexId first(MachineId m) const { return begin[m]; }
  VertexId last(MachineId m) const { return begin[m + 1]; }
  std::uint64_t size(MachineId m) const { return begin[m + 1] - begin[m]; }

  // Ranges whose (out-degree + 1) sums are as equal as prefix cuts allow.
  static VertexPartition degree_balanced(const std::vector<std::uint32_t>& out_degree,
                                         std::uint32_t num_machines);
};

// Machine-level snapshot of one subset tree. nodes[0] is the root (the
// vertex owner); every other node has a parent earlier in the list.
struct FrozenTree {
  struct Node {
    MachineId machine;
    MachineId parent;
    std::uint32_t depth;
  };
  std::vector<Node> nodes;

  std::uint32_t height() const;
  const Node* find(MachineId m) const;
  std::vector<MachineId> children_of(MachineId m) const;
};

struct StoredEdge {
  VertexId u;
  VertexId v;
  double w;
  // Machine that receives this edge's contribution on the way to owner(v):
  // the destination-tree node holding the edge's ingest record, or owner(v).
  MachineId slot;
};

// Edges held by one machine, sorted by (u, v, w), with an index by source.
struct EdgeShard {
  std::vector<StoredEdge> edges;
  std::unordered_map<VertexId, std::pair<std::uint32_t, std::uint32_t>> by_source;
};

struct IngestConfig {
  std::uint32_t chunk_size = kDefaultChunkSize;
  // 0 selects default_fanout(m, P).
  std::uint32_t fanout = 0;
  std::uint64_t seed = 0;
  // Use this vertex partition instead of balancing out-degrees.
  std::optional<VertexPartition> partition;
};

struct IngestStats {
  std::vector<std::uint64_t> edges_per_machine;
  bsp::CostCounters counters;
  std::uint32_t fanout = 0;
};

class DistGraph {
 public:
  std::uint64_t n = 0;
  std::uint64_t m = 0;
  VertexPartition partition;
  std::vector<EdgeShard> shards;
  std::vector<std::uint32_t> out_degree;
  std::unordered_map<VertexId, FrozenTree> source_trees;
  std::unordered_map<VertexId, FrozenTree> dest_trees;
  // Machines holding at least one out-edge of u, ascending.
  std::vector<std::vector<MachineId>> edge_machines;
  std::uint32_t max_dest_depth = 0;
  std::uint32_t chunk_size = kDefaultChunkSize;
  IngestStats stats;

  std::uint32_t num_machines() const { return partition.num_machines(); }
  MachineId owner(VertexId v) const { return partition.owner(v); }
};

// Two contention-detection rounds over the cluster: edges start at random
// machines and are keyed by source (placing edges and building source trees),
// then keyed by destination (building destination trees). Both rounds merge
// with chunk size C - 1, so a vertex gets a tree iff it has at least C edges
// in that direction. Throws std::invalid_argument on ids >= n or C < 2.
DistGraph ingest(bsp::Cluster& cluster, const EdgeList& edges, const IngestConfig& cfg);

enum class SubsetRep { kSparse, kDense };

// Vertex set partitioned by owner. A machine's part is a sorted id list while
// small and a bitmap over its range once it exceeds range/16.
class DistVertexSubset {
 public:
  DistVertexSubset() = default;
  explicit DistVertexSubset(const VertexPartition& partition);
  static DistVertexSubset from_vertices(const VertexPartition& partition, std::vector<VertexId> vs);
  static DistVertexSubset all(const VertexPartition& partition);

  std::uint64_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  bool contains(VertexId v) const;
  // Owned members of m, ascending.
  std::vector<VertexId> local(MachineId m) const;
  std::vector<VertexId> to_vector() const;
  SubsetRep representation(MachineId m) const { return parts_.at(m).dense ? SubsetRep::kDense : SubsetRep::kSparse; }

  // Replaces m's part with `sorted` (ascending, owned by m).
  void set_local(MachineId m, std::vector<VertexId> sorted);

 private:
  struct Part {
    bool dense = false;
    std::vector<VertexId> sparse;
    std::vector<std::uint8_t> bits;
    std::uint64_t count = 0;
  };
  std::vector<VertexId> begin_;
  std::vector<Part> parts_;
  std::uint64_t size_ = 0;
};

}  // namespace tdorch::graph
