#include "tdorch/graph_algos.hpp"

#include <limits>
#include <stdexcept>
#include <string>

namespace tdorch::graph {

void RunTrace::record(const EdgeMapResult& r) {
  frontiers.push_back(r.next.to_vector());
  modes.push_back(r.mode);
  edges_applied += r.edges_applied;
  if (counters.num_machines() == 0) {
    counters = r.counters;
  } else {
    counters += r.counters;
  }
}

namespace {

void check_start(const DistGraph& g, VertexId start) {
  if (start >= g.n) throw std::invalid_argument("start vertex " + std::to_string(start) + " is not in the graph");
}

EdgeMapSpec base_spec(const AlgoOptions& opt, MergeableOp op) {
  EdgeMapSpec s;
  s.merge_value = std::move(op);
  s.mode = opt.mode;
  s.mode_alpha = opt.mode_alpha;
  return s;
}

EdgeMapResult step(bsp::Cluster& cluster, const DistGraph& g, const DistVertexSubset& u,
                   const EdgeMapSpec& spec, RunTrace* trace) {
  EdgeMapResult r = dist_edge_map(cluster, g, u, spec);
  if (trace != nullptr) trace->record(r);
  return r;
}

}  // namespace

std::vector<std::int64_t> bfs(bsp::Cluster& cluster, const DistGraph& g, VertexId start,
                              const AlgoOptions& opt, RunTrace* trace) {
  check_start(g, start);
  std::vector<std::int64_t> dist(g.n, -1);
  dist[start] = 0;
  std::int64_t round = 1;
  EdgeMapSpec spec = base_spec(opt, ops::max());
  const Value none = spec.merge_value.identity;
  spec.source_value = [&](VertexId u) { return Value::of(dist[u]); };
  spec.f = [&](VertexId, VertexId, double, const Value& du) {
    return du.first == round - 1 ? Value::of(round) : none;
  };
  spec.write_back = [&](VertexId v, const Value& agg) {
    if (dist[v] == -1 && agg.first != -1) {
      dist[v] = agg.first;
      return true;
    }
    return false;
  };
  DistVertexSubset frontier = DistVertexSubset::from_vertices(g.partition, {start});
  while (!frontier.empty()) {
    frontier = step(cluster, g, frontier, spec, trace).next;
    ++round;
  }
  return dist;
}

std::vector<double> sssp(bsp::Cluster& cluster, const DistGraph& g, VertexId start,
                         const AlgoOptions& opt, RunTrace* trace) {
  check_start(g, start);
  for (const auto& shard : g.shards) {
    for (const auto& e : shard.edges) {
      if (e.w < 0) throw std::invalid_argument("sssp needs non-negative edge weights");
    }
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(g.n, kInf);
  dist[start] = 0.0;
  EdgeMapSpec spec = base_spec(opt, ops::min_f64());
  spec.source_value = [&](VertexId u) { return Value::of_double(dist[u]); };
  spec.f = [](VertexId, VertexId, double w, const Value& du) { return Value::of_double(du.as_double() + w); };
  spec.write_back = [&](VertexId v, const Value& agg) {
    if (agg.as_double() < dist[v]) {
      dist[v] = agg.as_double();
      return true;
    }
    return false;
  };
  DistVertexSubset frontier = DistVertexSubset::from_vertices(g.partition, {start});
  while (!frontier.empty()) frontier = step(cluster, g, frontier, spec, trace).next;
  return dist;
}

std::vector<double> bc(bsp::Cluster& cluster, const DistGraph& g, const DistGraph& gt, VertexId start,
                       const AlgoOptions& opt, RunTrace* trace) {
  check_start(g, start);
  if (gt.n != g.n || gt.m != g.m) throw std::invalid_argument("bc: transpose does not match the graph");
  if (gt.partition.begin != g.partition.begin) {
    throw std::invalid_argument("bc: transpose must be ingested with the graph's partition");
  }
  std::vector<std::int64_t> rounds(g.n, -1);
  std::vector<double> paths(g.n, 0.0);
  rounds[start] = 0;
  paths[start] = 1.0;
  std::int64_t round = 1;

  EdgeMapSpec fwd = base_spec(opt, ops::add_f64());
  fwd.source_value = [&](VertexId u) { return Value::of_double(paths[u]); };
  fwd.f = [](VertexId, VertexId, double, const Value& pu) { return pu; };
  fwd.filter_dst = [&](VertexId v) { return rounds[v] == -1; };
  fwd.write_back = [&](VertexId v, const Value& agg) {
    if (rounds[v] != -1) return false;
    rounds[v] = round;
    paths[v] = agg.as_double();
    return true;
  };
  std::vector<DistVertexSubset> levels{DistVertexSubset::from_vertices(g.partition, {start})};
  while (true) {
    DistVertexSubset next = step(cluster, g, levels.back(), fwd, trace).next;
    if (next.empty()) break;
    levels.push_back(std::move(next));
    ++round;
  }

  // scores[v] starts at 1/paths[v]; each backward round adds the scores of
  // successors one round further out.
  std::vector<double> scores(g.n, 0.0);
  for (VertexId v = 0; v < g.n; ++v) {
    if (rounds[v] >= 0) scores[v] = 1.0 / paths[v];
  }
  EdgeMapSpec bwd = base_spec(opt, ops::add_f64());
  std::int64_t target = 0;
  bwd.source_value = [&](VertexId w) { return Value::of_double(scores[w]); };
  bwd.f = [](VertexId, VertexId, double, const Value& sw) { return sw; };
  bwd.filter_dst = [&](VertexId v) { return rounds[v] == target; };
  bwd.write_back = [&](VertexId v, const Value& agg) {
    if (rounds[v] == target) scores[v] += agg.as_double();
    return false;
  };
  for (std::size_t r = levels.size(); r-- > 1;) {
    target = static_cast<std::int64_t>(r) - 1;
    step(cluster, gt, levels[r], bwd, trace);
  }

  std::vector<double> out(g.n, 0.0);
  for (VertexId v = 0; v < g.n; ++v) {
    if (v != start && rounds[v] >= 0) out[v] = scores[v] * paths[v] - 1.0;
  }
  return out;
}

std::vector<std::uint64_t> cc(bsp::Cluster& cluster, const DistGraph& g, const AlgoOptions& opt,
                              RunTrace* trace) {
  std::vector<std::int64_t> label(g.n);
  for (VertexId v = 0; v < g.n; ++v) label[v] = static_cast<std::int64_t>(v);
  EdgeMapSpec spec = base_spec(opt, ops::min());
  spec.source_value = [&](VertexId u) { return Value::of(label[u]); };
  spec.f = [](VertexId, VertexId, double, const Value& lu) { return lu; };
  spec.write_back = [&](VertexId v, const Value& agg) {
    if (agg.first < label[v]) {
      label[v] = agg.first;
      return true;
    }
    return false;
  };
  DistVertexSubset frontier = DistVertexSubset::all(g.partition);
  while (!frontier.empty()) frontier = step(cluster, g, frontier, spec, trace).next;
  return {label.begin(), label.end()};
}

std::vector<double> pr(bsp::Cluster& cluster, const DistGraph& g, std::uint32_t iters, double damping,
                       const AlgoOptions& opt, RunTrace* trace) {
  if (iters < 1) throw std::invalid_argument("pr needs at least one iteration");
  if (!(damping > 0.0 && damping < 1.0)) throw std::invalid_argument("pr damping must be in (0, 1)");
  if (g.n == 0) return {};
  const double n = static_cast<double>(g.n);
  std::vector<double> score(g.n, 1.0 / n);
  std::vector<double> incoming(g.n, 0.0);
  EdgeMapSpec spec = base_spec(opt, ops::add_f64());
  spec.source_value = [&](VertexId u) {
    return Value::of_double(g.out_degree[u] == 0 ? 0.0 : score[u] / g.out_degree[u]);
  };
  spec.f = [](VertexId, VertexId, double, const Value& share) { return share; };
  spec.write_back = [&](VertexId v, const Value& agg) {
    incoming[v] = agg.as_double();
    return false;
  };
  const DistVertexSubset everyone = DistVertexSubset::all(g.partition);
  for (std::uint32_t it = 0; it < iters; ++it) {
    step(cluster, g, everyone, spec, trace);
    double dangling = 0.0;
    for (VertexId v = 0; v < g.n; ++v) {
      if (g.out_degree[v] == 0) dangling += score[v];
    }
    const double base = (1.0 - damping) / n;
    const double spread = dangling / n;
    cluster.run_local([&](bsp::StepContext& ctx) {
      const MachineId me = ctx.id();
      for (VertexId v = g.partition.first(me); v < g.partition.last(me); ++v) {
        score[v] = base + damping * (incoming[v] + spread);
        incoming[v] = 0.0;
      }
      ctx.add_work(g.partition.size(me));
    });
  }
  return score;
}

}  // namespace tdorch::graph
