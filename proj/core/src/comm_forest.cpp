#include "tdorch/comm_forest.hpp"

#include <algorithm>
#include <string>

namespace tdorch {

CommForest::CommForest(ForestConfig cfg) : cfg_(cfg) {
  if (cfg_.num_machines < 1) throw std::invalid_argument("forest needs at least one machine");
  if (cfg_.fanout < 2) throw std::invalid_argument("fanout must be at least 2");
  // Level sizes from the leaves upward.
  std::vector<std::uint32_t> sizes{cfg_.num_machines};
  while (sizes.back() > 1) sizes.push_back((sizes.back() + cfg_.fanout - 1) / cfg_.fanout);
  std::reverse(sizes.begin(), sizes.end());
  height_ = static_cast<std::uint32_t>(sizes.size() - 1);
  offsets_.reserve(sizes.size() + 1);
  std::uint32_t acc = 0;
  for (auto s : sizes) {
    offsets_.push_back(acc);
    acc += s;
  }
  offsets_.push_back(acc);
}

std::uint32_t CommForest::level_of(std::uint32_t bfs_index) const {
  if (bfs_index >= node_count()) throw std::out_of_range("bfs index out of range");
  const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), bfs_index);
  return static_cast<std::uint32_t>(it - offsets_.begin() - 1);
}

void CommForest::check(const TreeNodeId& node) const {
  if (node.root >= cfg_.num_machines) throw std::out_of_range("tree root out of range");
  if (node.bfs_index >= node_count()) {
    throw std::out_of_range("bfs index " + std::to_string(node.bfs_index) + " out of range");
  }
}

TreeNodeId CommForest::leaf(MachineId root, MachineId machine) const {
  if (machine >= cfg_.num_machines) throw std::out_of_range("leaf machine out of range");
  return TreeNodeId{root, offsets_[height_] + machine};
}

bool CommForest::is_leaf(const TreeNodeId& node) const {
  check(node);
  return node.bfs_index >= offsets_[height_];
}

MachineId CommForest::host_of(const TreeNodeId& node) const {
  check(node);
  if (node.bfs_index >= offsets_[height_]) return node.bfs_index - offsets_[height_];
  if (node.bfs_index == 0) return node.root;
  const std::uint64_t h =
      hash_combine(hash_combine(cfg_.seed, node.root), static_cast<std::uint64_t>(node.bfs_index));
  return static_cast<MachineId>(h % cfg_.num_machines);
}

std::optional<TreeNodeId> CommForest::parent_route(const TreeNodeId& node) const {
  check(node);
  if (node.bfs_index == 0) return std::nullopt;
  const std::uint32_t level = level_of(node.bfs_index);
  const std::uint32_t pos = node.bfs_index - offsets_[level];
  return TreeNodeId{node.root, offsets_[level - 1] + pos / cfg_.fanout};
}

std::uint32_t default_fanout(std::uint64_t n_tasks, std::uint32_t num_machines) {
  const std::uint64_t p = std::max<std::uint32_t>(num_machines, 1);
  const std::uint64_t p2 = std::max<std::uint64_t>(p, 2);
  std::uint64_t lg = 0;
  while ((std::uint64_t{1} << lg) < p2) ++lg;
  const std::uint64_t f = n_tasks / (p * lg * lg);
  return static_cast<std::uint32_t>(std::clamp<std::uint64_t>(f, 2, p2));
}

}  // namespace tdorch
