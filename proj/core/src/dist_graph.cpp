#include "tdorch/dist_graph.hpp"

#include <algorithm>
#include <bit>
#include <deque>
#include <functional>
#include <stdexcept>

#include "tdorch/comm_forest.hpp"
#include "tdorch/orchestrator.hpp"

namespace tdorch::graph {

MachineId VertexPartition::owner(VertexId v) const {
  const auto it = std::upper_bound(begin.begin(), begin.end() - 1, v);
  return static_cast<MachineId>(it - begin.begin() - 1);
}

VertexPartition VertexPartition::degree_balanced(const std::vector<std::uint32_t>& out_degree,
                                                 std::uint32_t num_machines) {
  if (num_machines == 0) throw std::invalid_argument("need at least one machine");
  const std::uint64_t n = out_degree.size();
  std::vector<std::uint64_t> prefix(n + 1, 0);
  for (std::uint64_t v = 0; v < n; ++v) prefix[v + 1] = prefix[v] + out_degree[v] + 1;
  const std::uint64_t total = prefix[n];
  VertexPartition part;
  part.begin.assign(num_machines + 1, n);
  part.begin[0] = 0;
  for (std::uint32_t m = 1; m < num_machines; ++m) {
    const std::uint64_t target = (total * m + num_machines - 1) / num_machines;
    const auto it = std::lower_bound(prefix.begin(), prefix.end(), target);
    part.begin[m] = std::max(part.begin[m - 1], static_cast<VertexId>(it - prefix.begin()));
    part.begin[m] = std::min<VertexId>(part.begin[m], n);
  }
  return part;
}

std::uint32_t FrozenTree::height() const {
  std::uint32_t h = 0;
  for (const auto& nd : nodes) h = std::max(h, nd.depth);
  return h;
}

const FrozenTree::Node* FrozenTree::find(MachineId m) const {
  for (const auto& nd : nodes) {
    if (nd.machine == m) return &nd;
  }
  return nullptr;
}

std::vector<MachineId> FrozenTree::children_of(MachineId m) const {
  std::vector<MachineId> out;
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    if (nodes[i].parent == m) out.push_back(nodes[i].machine);
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

// Breadth-first walk over a merged set and the groups it references. Each
// machine joins the tree the first time a group stored on it is reached.
void walk_subset_tree(const bsp::Cluster& cluster, MachineId root, const MetaTaskSet& set,
                      FrozenTree& tree,
                      const std::function<void(MachineId, const TaskContext&)>& on_leaf) {
  tree.nodes.push_back(FrozenTree::Node{root, root, 0});
  std::deque<std::pair<MachineId, std::vector<const MetaTask*>>> queue;
  std::vector<const MetaTask*> top;
  for (const auto& level : set.levels()) {
    for (const auto& mt : level) top.push_back(&mt);
  }
  queue.emplace_back(root, std::move(top));
  while (!queue.empty()) {
    auto [at, entries] = std::move(queue.front());
    queue.pop_front();
    const std::uint32_t depth = tree.find(at)->depth;
    for (const MetaTask* mt : entries) {
      if (mt->is_leaf()) {
        on_leaf(at, mt->task());
        continue;
      }
      const RemoteRef& ref = mt->remote();
      if (tree.find(ref.machine) == nullptr) {
        tree.nodes.push_back(FrozenTree::Node{ref.machine, at, depth + 1});
      }
      std::vector<const MetaTask*> children;
      for (const auto& c : cluster.machine(ref.machine).spill_arena.at(ref.handle)) children.push_back(&c);
      queue.emplace_back(ref.machine, std::move(children));
    }
  }
}

}  // namespace

DistGraph ingest(bsp::Cluster& cluster, const EdgeList& input, const IngestConfig& cfg) {
  const std::uint32_t p = cluster.num_machines();
  if (cfg.chunk_size < 2) throw std::invalid_argument("ingest needs chunk size >= 2");
  DistGraph g;
  g.n = input.n;
  g.m = input.edges.size();
  g.chunk_size = cfg.chunk_size;
  g.out_degree.assign(g.n, 0);
  for (const auto& e : input.edges) {
    if (e.u >= g.n || e.v >= g.n) throw std::invalid_argument("edge endpoint outside [0, n)");
    g.out_degree[e.u] += 1;
  }
  if (cfg.partition) {
    if (cfg.partition->num_machines() != p || cfg.partition->begin.back() != g.n) {
      throw std::invalid_argument("given partition does not match the graph and cluster");
    }
    g.partition = *cfg.partition;
  } else {
    g.partition = VertexPartition::degree_balanced(g.out_degree, p);
  }
  const std::uint32_t fanout =
      cfg.fanout != 0 ? cfg.fanout : default_fanout(std::max<std::uint64_t>(g.m, 1), p);
  g.stats.fanout = fanout;
  const bsp::CostCounters before = cluster.counters();
  const OwnerFn owner = [&g](Address a) { return g.partition.owner(a); };

  // Round 1: random initial placement, keyed by source.
  TaskBatch by_source(p);
  for (std::size_t i = 0; i < input.edges.size(); ++i) {
    const auto& e = input.edges[i];
    const auto r = static_cast<MachineId>(hash_combine(cfg.seed, i) % p);
    by_source[r].emplace_back(std::initializer_list<Address>{e.u},
                              pack_words(static_cast<std::int64_t>(e.v), std::bit_cast<std::int64_t>(e.w)),
                              r, static_cast<std::uint32_t>(by_source[r].size()));
  }
  const ContentionResult r1 =
      substage1_contention_detection(cluster, by_source, owner, cfg.chunk_size - 1, fanout);
  std::vector<std::vector<StoredEdge>> held(p);
  for (MachineId m = 0; m < p; ++m) {
    for (const auto& [u, set] : r1.owner_sets[m]) {
      FrozenTree tree;
      walk_subset_tree(cluster, m, set, tree, [&](MachineId at, const TaskContext& t) {
        const auto [v, wbits] = unpack_words(t.payload());
        held[at].push_back(StoredEdge{t.addrs()[0], static_cast<VertexId>(v), std::bit_cast<double>(wbits), 0});
      });
      if (set.top_level() >= 1) g.source_trees.emplace(u, std::move(tree));
    }
  }
  cluster.clear_arenas();

  g.shards.resize(p);
  g.edge_machines.assign(g.n, {});
  TaskBatch by_dest(p);
  for (MachineId m = 0; m < p; ++m) {
    auto& edges = held[m];
    std::sort(edges.begin(), edges.end(), [](const StoredEdge& a, const StoredEdge& b) {
      return std::tie(a.u, a.v, a.w) < std::tie(b.u, b.v, b.w);
    });
    auto& shard = g.shards[m];
    shard.edges = std::move(edges);
    for (std::uint32_t i = 0; i < shard.edges.size(); ++i) {
      const VertexId u = shard.edges[i].u;
      auto [it, inserted] = shard.by_source.try_emplace(u, i, i);
      it->second.second = i + 1;
      if (inserted) g.edge_machines[u].push_back(m);
      by_dest[m].emplace_back(std::initializer_list<Address>{shard.edges[i].v}, Bytes{}, m, i);
    }
  }
  for (auto& ms : g.edge_machines) std::sort(ms.begin(), ms.end());

  // Round 2: edges stay put; keyed by destination.
  const ContentionResult r2 =
      substage1_contention_detection(cluster, by_dest, owner, cfg.chunk_size - 1, fanout);
  for (MachineId m = 0; m < p; ++m) {
    for (const auto& [v, set] : r2.owner_sets[m]) {
      FrozenTree tree;
      walk_subset_tree(cluster, m, set, tree, [&](MachineId at, const TaskContext& t) {
        g.shards[t.origin()].edges[t.local_index()].slot = at;
      });
      if (set.top_level() >= 1) {
        g.max_dest_depth = std::max(g.max_dest_depth, tree.height());
        g.dest_trees.emplace(v, std::move(tree));
      }
    }
  }
  cluster.clear_arenas();

  g.stats.edges_per_machine.resize(p);
  for (MachineId m = 0; m < p; ++m) g.stats.edges_per_machine[m] = g.shards[m].edges.size();
  g.stats.counters = cluster.counters() - before;
  return g;
}

DistVertexSubset::DistVertexSubset(const VertexPartition& partition)
    : begin_(partition.begin), parts_(partition.num_machines()) {}

DistVertexSubset DistVertexSubset::from_vertices(const VertexPartition& partition, std::vector<VertexId> vs) {
  std::sort(vs.begin(), vs.end());
  vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
  DistVertexSubset s(partition);
  std::vector<std::vector<VertexId>> per(partition.num_machines());
  for (VertexId v : vs) {
    if (v >= partition.begin.back()) throw std::out_of_range("vertex outside partition");
    per[partition.owner(v)].push_back(v);
  }
  for (MachineId m = 0; m < per.size(); ++m) s.set_local(m, std::move(per[m]));
  return s;
}

DistVertexSubset DistVertexSubset::all(const VertexPartition& partition) {
  DistVertexSubset s(partition);
  for (MachineId m = 0; m < partition.num_machines(); ++m) {
    std::vector<VertexId> vs(partition.size(m));
    for (std::uint64_t i = 0; i < vs.size(); ++i) vs[i] = partition.first(m) + i;
    s.set_local(m, std::move(vs));
  }
  return s;
}

void DistVertexSubset::set_local(MachineId m, std::vector<VertexId> sorted) {
  Part& part = parts_.at(m);
  size_ -= part.count;
  const std::uint64_t range = begin_[m + 1] - begin_[m];
  part = Part{};
  part.count = sorted.size();
  if (part.count > range / 16) {
    part.dense = true;
    part.bits.assign(range, 0);
    for (VertexId v : sorted) part.bits[v - begin_[m]] = 1;
  } else {
    part.sparse = std::move(sorted);
  }
  size_ += part.count;
}

bool DistVertexSubset::contains(VertexId v) const {
  if (parts_.empty() || v >= begin_.back()) return false;
  const auto it = std::upper_bound(begin_.begin(), begin_.end() - 1, v);
  const auto m = static_cast<std::size_t>(it - begin_.begin() - 1);
  const Part& part = parts_[m];
  if (part.dense) return part.bits[v - begin_[m]] != 0;
  return std::binary_search(part.sparse.begin(), part.sparse.end(), v);
}

std::vector<VertexId> DistVertexSubset::local(MachineId m) const {
  const Part& part = parts_.at(m);
  if (!part.dense) return part.sparse;
  std::vector<VertexId> out;
  out.reserve(part.count);
  for (std::uint64_t i = 0; i < part.bits.size(); ++i) {
    if (part.bits[i]) out.push_back(begin_[m] + i);
  }
  return out;
}

std::vector<VertexId> DistVertexSubset::to_vector() const {
  std::vector<VertexId> out;
  for (MachineId m = 0; m < parts_.size(); ++m) {
    auto l = local(m);
    out.insert(out.end(), l.begin(), l.end());
  }
  return out;
}

}  // namespace tdorch::graph
