#include "tdorch/edge_map.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace tdorch::graph {

std::optional<EdgeMapMode> parse_mode(std::string_view name) {
  if (name == "auto") return EdgeMapMode::kAuto;
  if (name == "sparse") return EdgeMapMode::kSparse;
  if (name == "dense") return EdgeMapMode::kDense;
  return std::nullopt;
}

std::string_view to_string(EdgeMapMode m) {
  switch (m) {
    case EdgeMapMode::kAuto: return "auto";
    case EdgeMapMode::kSparse: return "sparse";
    case EdgeMapMode::kDense: return "dense";
  }
  return "auto";
}

EdgeMapMode choose_mode(const DistGraph& g, const DistVertexSubset& u, double alpha) {
  std::uint64_t degree_sum = 0;
  for (VertexId v : u.to_vector()) degree_sum += g.out_degree[v];
  const double threshold = alpha * static_cast<double>(g.num_machines()) * static_cast<double>(u.size());
  return static_cast<double>(degree_sum) < threshold ? EdgeMapMode::kSparse : EdgeMapMode::kDense;
}

namespace {

struct Site {
  std::map<VertexId, Value> known;
  std::map<VertexId, std::vector<std::pair<MachineId, Value>>> pending;
  std::vector<VertexId> next;
  std::uint64_t applied = 0;
};

}  // namespace

EdgeMapResult dist_edge_map(bsp::Cluster& cluster, const DistGraph& g, const DistVertexSubset& u,
                            const EdgeMapSpec& spec) {
  const std::uint32_t p = cluster.num_machines();
  if (p != g.num_machines()) throw std::invalid_argument("graph was ingested for a different cluster size");
  if (!spec.f || !spec.source_value || !spec.write_back || !spec.merge_value.valid()) {
    throw std::invalid_argument("edge map spec is incomplete");
  }
  EdgeMapResult result;
  result.next = DistVertexSubset(g.partition);
  if (u.empty()) return result;

  const EdgeMapMode mode = spec.mode == EdgeMapMode::kAuto ? choose_mode(g, u, spec.mode_alpha) : spec.mode;
  result.mode = mode;
  const auto ph_down = cluster.phase("edge_map_source");
  const auto ph_scan = cluster.phase("edge_map_apply");
  const auto ph_up = cluster.phase("edge_map_aggregate");
  const auto& op = spec.merge_value;
  const bsp::CostCounters before = cluster.counters();
  std::vector<Site> sites(p);

  auto forward = [&](bsp::StepContext& ctx, VertexId v, const Value& val) {
    const auto it = g.source_trees.find(v);
    if (it == g.source_trees.end()) return;
    for (MachineId c : it->second.children_of(ctx.id())) {
      auto& w = ctx.envelope(c, ph_down);
      w.u64(v);
      w.value(val);
    }
  };

  // Source values reach every machine holding out-edges of active vertices.
  cluster.run_superstep([&](bsp::StepContext& ctx) {
    const MachineId me = ctx.id();
    Site& site = sites[me];
    for (VertexId v : u.local(me)) {
      const Value val = spec.source_value(v);
      site.known.emplace(v, val);
      if (mode == EdgeMapMode::kSparse) {
        forward(ctx, v, val);
        continue;
      }
      for (MachineId m : g.edge_machines[v]) {
        if (m == me) continue;
        auto& w = ctx.envelope(m, ph_down);
        w.u64(v);
        w.value(val);
      }
    }
  });
  while (cluster.has_pending()) {
    cluster.run_superstep([&](bsp::StepContext& ctx) {
      Site& site = sites[ctx.id()];
      for (const auto& msg : ctx.inbox()) {
        ByteReader r(msg.payload);
        while (!r.done()) {
          const VertexId v = r.u64();
          const Value val = r.value();
          site.known.emplace(v, val);
          if (mode == EdgeMapMode::kSparse) forward(ctx, v, val);
        }
      }
    });
  }

  // Apply f and send per-(slot, destination) partials.
  cluster.run_superstep([&](bsp::StepContext& ctx) {
    const MachineId me = ctx.id();
    Site& site = sites[me];
    const EdgeShard& shard = g.shards[me];
    std::map<std::pair<MachineId, VertexId>, Value> partial;
    auto apply = [&](const StoredEdge& e, const Value& src) {
      if (spec.filter_dst && g.owner(e.v) == me && !spec.filter_dst(e.v)) return;
      const Value c = spec.f(e.u, e.v, e.w, src);
      site.applied += 1;
      if (op.is_identity(c)) return;
      auto [it, inserted] = partial.try_emplace({e.slot, e.v}, op.identity);
      it->second = op.combine(it->second, c);
    };
    if (mode == EdgeMapMode::kDense) {
      ctx.add_work(shard.edges.size(), ph_scan);
      for (const auto& e : shard.edges) {
        const auto it = site.known.find(e.u);
        if (it != site.known.end()) apply(e, it->second);
      }
    } else {
      for (const auto& [v, val] : site.known) {
        const auto it = shard.by_source.find(v);
        if (it == shard.by_source.end()) continue;
        ctx.add_work(it->second.second - it->second.first, ph_scan);
        for (auto i = it->second.first; i < it->second.second; ++i) apply(shard.edges[i], val);
      }
    }
    for (const auto& [key, val] : partial) {
      const auto [slot, v] = key;
      if (slot == me) {
        site.pending[v].emplace_back(me, val);
        continue;
      }
      auto& w = ctx.envelope(slot, ph_up);
      w.u64(v);
      w.value(val);
    }
  });

  // Depth-lockstep aggregation: nodes at depth d forward in round D - d + 1,
  // owners apply write_back in round D + 1.
  const std::uint32_t depth_max = g.max_dest_depth;
  for (std::uint32_t round = 1; round <= depth_max + 1; ++round) {
    cluster.run_superstep([&](bsp::StepContext& ctx) {
      const MachineId me = ctx.id();
      Site& site = sites[me];
      for (const auto& msg : ctx.inbox()) {
        ByteReader r(msg.payload);
        while (!r.done()) {
          const VertexId v = r.u64();
          site.pending[v].emplace_back(msg.src, r.value());
        }
      }
      for (auto it = site.pending.begin(); it != site.pending.end();) {
        const VertexId v = it->first;
        std::uint32_t depth = 0;
        MachineId parent = me;
        if (g.owner(v) != me) {
          const auto t = g.dest_trees.find(v);
          const FrozenTree::Node* node = t == g.dest_trees.end() ? nullptr : t->second.find(me);
          if (node == nullptr) throw std::logic_error("partial reached a machine outside its destination tree");
          depth = node->depth;
          parent = node->parent;
        }
        const bool ready = depth == 0 ? round == depth_max + 1 : depth == depth_max - round + 1;
        if (!ready) {
          ++it;
          continue;
        }
        auto& inputs = it->second;
        std::stable_sort(inputs.begin(), inputs.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        Value agg = op.identity;
        for (const auto& [src, val] : inputs) agg = op.combine(agg, val);
        if (depth == 0) {
          if (spec.filter_dst && !spec.filter_dst(v)) {
            it = site.pending.erase(it);
            continue;
          }
          if (spec.write_back(v, agg)) site.next.push_back(v);
        } else {
          auto& w = ctx.envelope(parent, ph_up);
          w.u64(v);
          w.value(agg);
        }
        it = site.pending.erase(it);
      }
    });
  }

  for (MachineId m = 0; m < p; ++m) {
    result.edges_applied += sites[m].applied;
    result.next.set_local(m, std::move(sites[m].next));
  }
  result.counters = cluster.counters() - before;
  return result;
}

}  // namespace tdorch::graph
