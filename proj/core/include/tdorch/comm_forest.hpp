#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "tdorch/value.hpp"

namespace tdorch {

struct ForestConfig {
  std::uint32_t num_machines = 1;
  std::uint32_t fanout = 2;
  std::uint64_t seed = 0;
};

// A node of the tree rooted at `root`; bfs_index 0 is the root and the P leaves
// take the last P indices.
struct TreeNodeId {
  MachineId root = 0;
  std::uint32_t bfs_index = 0;

  friend constexpr bool operator==(const TreeNodeId&, const TreeNodeId&) = default;
  friend constexpr auto operator<=>(const TreeNodeId&, const TreeNodeId&) = default;
};

// Shape of the balanced F-ary tree with P leaves shared by every tree in the
// forest. Level 0 is the root, level height() holds the leaves; level d has
// ceil(P / F^(height - d)) nodes and node j of level d has parent j / F.
// Nothing is materialized per root: routing is computed from (P, F, seed).
class CommForest {
 public:
  explicit CommForest(ForestConfig cfg);

  const ForestConfig& config() const { return cfg_; }
  std::uint32_t height() const { return height_; }
  std::uint32_t node_count() const { return offsets_.back(); }
  std::uint32_t level_of(std::uint32_t bfs_index) const;

  TreeNodeId leaf(MachineId root, MachineId machine) const;
  bool is_leaf(const TreeNodeId& node) const;

  // Leaf k is machine k in every tree; root of tree i is machine i; every other
  // internal node hashes (seed, root, bfs_index) onto [0, P).
  MachineId host_of(const TreeNodeId& node) const;

  // BFS parent, or nullopt when `node` is the root.
  std::optional<TreeNodeId> parent_route(const TreeNodeId& node) const;

 private:
  void check(const TreeNodeId& node) const;

  ForestConfig cfg_;
  std::uint32_t height_ = 0;
  std::vector<std::uint32_t> offsets_;  // BFS index of the first node per level, plus total
};

// F = clamp(floor(n / (P * ceil(log2 max(P,2))^2)), 2, max(P,2)).
std::uint32_t default_fanout(std::uint64_t n_tasks, std::uint32_t num_machines);

}  // namespace tdorch
