#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <tuple>

#include "doctest.h"
#include "tdorch/edge_map.hpp"

using namespace tdorch;
using namespace tdorch::graph;

namespace {

EdgeList star(std::uint64_t leaves, bool undirected) {
  EdgeList g;
  g.n = leaves + 1;
  for (VertexId i = 1; i <= leaves; ++i) g.edges.push_back({0, i, 1.0});
  return undirected ? symmetrize(g) : g;
}

std::vector<std::uint64_t> degrees(const EdgeList& g) {
  std::vector<std::uint64_t> d(g.n);
  for (const auto& e : g.edges) d[e.u] += 1;
  return d;
}

bsp::CostCounters phase_now(bsp::Cluster& c, const std::string& name) { return c.phase_counters().at(c.phase(name)); }

// Max-label propagation: every edge carries label(u) + w to v; v joins the
// output when the aggregate beats its current label.
struct MaxProp {
  std::vector<std::int64_t> label;
  EdgeMapSpec spec(EdgeMapMode mode) {
    EdgeMapSpec s;
    s.source_value = [this](VertexId u) { return Value::of(label[u]); };
    s.f = [](VertexId, VertexId, double w, const Value& src) { return Value::of(src.first + static_cast<std::int64_t>(w)); };
    s.write_back = [this](VertexId v, const Value& agg) {
      if (agg.first <= label[v]) return false;
      label[v] = agg.first;
      return true;
    };
    s.merge_value = ops::max();
    s.mode = mode;
    return s;
  }
};

// Single-machine reference for MaxProp.
std::vector<VertexId> reference_round(const EdgeList& g, std::vector<std::int64_t>& label, const std::vector<VertexId>& u) {
  std::vector<bool> active(g.n);
  for (auto x : u) active[x] = true;
  std::map<VertexId, std::int64_t> agg;
  for (const auto& e : g.edges) {
    if (!active[e.u]) continue;
    const std::int64_t c = label[e.u] + static_cast<std::int64_t>(e.w);
    auto [it, inserted] = agg.try_emplace(e.v, c);
    if (!inserted) it->second = std::max(it->second, c);
  }
  std::vector<VertexId> next;
  for (const auto& [v, a] : agg) {
    if (a > label[v]) {
      label[v] = a;
      next.push_back(v);
    }
  }
  return next;
}

}  // namespace

TEST_CASE("degree-balanced partition") {
  const std::vector<std::uint32_t> deg{0, 0, 0, 9, 0, 0, 0, 0};
  const VertexPartition p = VertexPartition::degree_balanced(deg, 2);
  CHECK(p.begin.front() == 0);
  CHECK(p.begin.back() == deg.size());
  for (VertexId v = 0; v < deg.size(); ++v) CHECK(p.owner(v) < 2);
  const VertexPartition one = VertexPartition::degree_balanced(deg, 1);
  CHECK(one.size(0) == deg.size());
}

TEST_CASE("ingest: star K_{1,1000}") {
  const std::uint32_t p = 4;
  bsp::Cluster c({p, 3, 1});
  const EdgeList g = star(1000, true);
  const DistGraph dg = ingest(c, g, {8, 0, 3});
  CHECK(dg.m == 2000);
  REQUIRE(dg.source_trees.count(0) == 1);
  CHECK(dg.edge_machines[0].size() == p);
  CHECK(dg.dest_trees.count(0) == 1);
  for (VertexId leaf = 1; leaf <= 1000; ++leaf) {
    CHECK(dg.source_trees.count(leaf) == 0);
    CHECK(dg.dest_trees.count(leaf) == 0);
    REQUIRE(dg.edge_machines[leaf].size() == 1);
    CHECK(dg.edge_machines[leaf][0] == dg.owner(leaf));
  }
  const FrozenTree& t = dg.source_trees.at(0);
  CHECK(t.nodes[0].machine == dg.owner(0));
  for (auto m : dg.edge_machines[0]) CHECK(t.find(m) != nullptr);
}

TEST_CASE("ingest: single edge") {
  bsp::Cluster c({3, 1, 1});
  const DistGraph dg = ingest(c, EdgeList{5, {{4, 1, 1.0}}, false}, {8, 0, 1});
  CHECK(dg.source_trees.empty());
  CHECK(dg.dest_trees.empty());
  const MachineId o = dg.owner(4);
  REQUIRE(dg.shards[o].edges.size() == 1);
  CHECK(dg.shards[o].edges[0].slot == dg.owner(1));
  CHECK(dg.max_dest_depth == 0);
}

TEST_CASE("ingest: path on one machine keeps both directions local") {
  bsp::Cluster c({1, 1, 1});
  const DistGraph dg = ingest(c, symmetrize(EdgeList{3, {{0, 1, 1.0}, {1, 2, 1.0}}, false}), {8, 0, 1});
  CHECK(dg.shards[0].edges.size() == 4);
  CHECK(dg.stats.counters.total_sent() == 0);
}

TEST_CASE("ingest errors") {
  bsp::Cluster c({2, 1, 1});
  CHECK_THROWS_AS(ingest(c, EdgeList{2, {{0, 2, 1.0}}, false}, {8, 0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(ingest(c, EdgeList{2, {{0, 1, 1.0}}, false}, {1, 0, 1}), std::invalid_argument);
}

TEST_CASE("property: ingest stores each edge once and trees follow the threshold") {
  for (std::uint32_t p : {1u, 3u, 8u}) {
    for (std::uint32_t chunk : {2u, 4u, 8u}) {
      CAPTURE(p);
      CAPTURE(chunk);
      const EdgeList g = symmetrize(gen_ba(600, 3, p * 10 + chunk));
      bsp::Cluster c({p, chunk, 1});
      const DistGraph dg = ingest(c, g, {chunk, 2, 5});
      std::multiset<std::tuple<VertexId, VertexId>> stored;
      std::uint64_t total = 0;
      for (MachineId m = 0; m < p; ++m) {
        total += dg.shards[m].edges.size();
        CHECK(dg.stats.edges_per_machine[m] == dg.shards[m].edges.size());
        for (const auto& e : dg.shards[m].edges) stored.insert({e.u, e.v});
      }
      CHECK(total == g.edges.size());
      std::multiset<std::tuple<VertexId, VertexId>> input;
      for (const auto& e : g.edges) input.insert({e.u, e.v});
      CHECK(stored == input);
      const auto out = degrees(g);
      const auto in = degrees(transpose(g));
      for (VertexId v = 0; v < g.n; ++v) {
        CHECK((dg.source_trees.count(v) == 1) == (out[v] >= chunk));
        if (dg.source_trees.count(v) == 0 && out[v] > 0) {
          CHECK(dg.edge_machines[v] == std::vector<MachineId>{dg.owner(v)});
        }
      }
      for (const auto& [v, t] : dg.dest_trees) {
        CHECK(in[v] >= chunk);
        CHECK(t.nodes[0].machine == dg.owner(v));
        CHECK(t.height() <= dg.max_dest_depth);
      }
    }
  }
}

TEST_CASE("vertex subset representations") {
  const VertexPartition part{{0, 64, 128}};
  auto s = DistVertexSubset::from_vertices(part, {70, 3, 3, 5});
  CHECK(s.size() == 3);
  CHECK(s.contains(70));
  CHECK_FALSE(s.contains(4));
  CHECK(s.to_vector() == std::vector<VertexId>{3, 5, 70});
  CHECK(s.representation(0) == SubsetRep::kSparse);
  std::vector<VertexId> many(10);
  std::iota(many.begin(), many.end(), 0);
  s.set_local(0, many);
  CHECK(s.representation(0) == SubsetRep::kDense);
  CHECK(s.local(0) == many);
  CHECK(s.size() == 11);
  CHECK(DistVertexSubset::all(part).size() == 128);
  CHECK(DistVertexSubset(part).empty());
}

TEST_CASE("edge map with an empty frontier sends nothing") {
  bsp::Cluster c({4, 1, 1});
  const EdgeList g = gen_er(100, 0.1, 1);
  const DistGraph dg = ingest(c, g, {8, 0, 1});
  MaxProp mp{std::vector<std::int64_t>(g.n, 0)};
  const auto r = dist_edge_map(c, dg, DistVertexSubset(dg.partition), mp.spec(EdgeMapMode::kAuto));
  CHECK(r.next.empty());
  CHECK(r.counters.total_sent() == 0);
  CHECK(r.counters.messages == 0);
  CHECK(r.edges_applied == 0);
}

TEST_CASE("first BFS round on a path") {
  bsp::Cluster c({2, 1, 1});
  const EdgeList g = symmetrize(EdgeList{3, {{0, 1, 1.0}, {1, 2, 1.0}}, false});
  const DistGraph dg = ingest(c, g, {8, 0, 1});
  const std::int64_t inf = std::numeric_limits<std::int64_t>::max();
  std::vector<std::int64_t> dist{0, inf, inf};
  EdgeMapSpec s;
  s.source_value = [&](VertexId u) { return Value::of(dist[u]); };
  s.f = [](VertexId, VertexId, double, const Value& d) { return Value::of(d.first + 1); };
  s.write_back = [&](VertexId v, const Value& agg) {
    if (dist[v] != inf) return false;
    dist[v] = agg.first;
    return true;
  };
  s.merge_value = ops::min();
  const auto r = dist_edge_map(c, dg, DistVertexSubset::from_vertices(dg.partition, {0}), s);
  CHECK(r.next.to_vector() == std::vector<VertexId>{1});
  CHECK(dist[1] == 1);
  CHECK(dist[2] == inf);
}

TEST_CASE("choose_mode") {
  bsp::Cluster c({2, 1, 1});
  const EdgeList g{4, {{0, 1, 1.0}, {0, 2, 1.0}, {3, 1, 1.0}}, false};
  const DistGraph dg = ingest(c, g, {8, 0, 1});
  const auto u0 = DistVertexSubset::from_vertices(dg.partition, {0});
  const auto u3 = DistVertexSubset::from_vertices(dg.partition, {3});
  // deg(0) = 2 == 1.0 * P * |U|: ties go dense.
  CHECK(choose_mode(dg, u0, 1.0) == EdgeMapMode::kDense);
  CHECK(choose_mode(dg, u3, 1.0) == EdgeMapMode::kSparse);
  CHECK(choose_mode(dg, u0, 1.5) == EdgeMapMode::kSparse);

  bsp::Cluster big({64, 1, 1});
  const EdgeList dense = gen_er(200, 0.9, 2);
  const DistGraph dd = ingest(big, symmetrize(dense), {8, 0, 1});
  CHECK(choose_mode(dd, DistVertexSubset::all(dd.partition), 1.0) == EdgeMapMode::kDense);
  CHECK(choose_mode(dd, DistVertexSubset::from_vertices(dd.partition, {0}), 1.0) == EdgeMapMode::kDense);
  const DistGraph sparse = ingest(big, star(3, false), {8, 0, 1});
  CHECK(choose_mode(sparse, DistVertexSubset::from_vertices(sparse.partition, {1}), 1.0) == EdgeMapMode::kSparse);
  CHECK(parse_mode("sparse") == EdgeMapMode::kSparse);
  CHECK(parse_mode("dense") == EdgeMapMode::kDense);
  CHECK(parse_mode("auto") == EdgeMapMode::kAuto);
  CHECK_FALSE(parse_mode("x").has_value());
}

TEST_CASE("property: edge map matches the reference engine in every mode") {
  for (std::uint32_t p : {1u, 2u, 5u, 8u}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      CAPTURE(p);
      CAPTURE(seed);
      EdgeList g = gen_ba(400, 3, seed);
      assign_integer_weights(g, 5, seed);
      g = symmetrize(g);
      bsp::Cluster c({p, seed, 1});
      const DistGraph dg = ingest(c, g, {4, seed == 1 ? 0u : 2u, seed});
      std::mt19937_64 rng(seed);
      std::vector<std::int64_t> start(g.n);
      for (auto& x : start) x = static_cast<std::int64_t>(rng() % 50);
      std::vector<VertexId> active;
      for (VertexId v = 0; v < g.n; ++v) {
        if (rng() % 4 == 0) active.push_back(v);
      }
      std::vector<std::int64_t> want = start;
      const auto want_next = reference_round(g, want, active);
      const auto out = degrees(g);
      std::uint64_t deg_sum = 0;
      for (auto v : active) deg_sum += out[v];
      for (auto mode : {EdgeMapMode::kSparse, EdgeMapMode::kDense, EdgeMapMode::kAuto}) {
        MaxProp mp{start};
        const auto r = dist_edge_map(c, dg, DistVertexSubset::from_vertices(dg.partition, active), mp.spec(mode));
        CHECK(r.next.to_vector() == want_next);
        CHECK(mp.label == want);
        CHECK(r.edges_applied == deg_sum);
        if (mode != EdgeMapMode::kAuto) CHECK(r.mode == mode);
      }
    }
  }
}

TEST_CASE("filter_dst skips edges into rejected destinations") {
  const std::uint32_t p = 3;
  bsp::Cluster c({p, 1, 1});
  const EdgeList g = symmetrize(gen_ba(300, 2, 4));
  const DistGraph dg = ingest(c, g, {4, 2, 1});
  for (auto mode : {EdgeMapMode::kSparse, EdgeMapMode::kDense}) {
    MaxProp mp{std::vector<std::int64_t>(g.n, 0)};
    EdgeMapSpec s = mp.spec(mode);
    s.filter_dst = [](VertexId v) { return v % 3 != 0; };
    const auto r = dist_edge_map(c, dg, DistVertexSubset::all(dg.partition), s);
    for (auto v : r.next.to_vector()) CHECK(v % 3 != 0);
    for (VertexId v = 0; v < g.n; v += 3) CHECK(mp.label[v] == 0);
  }
}

TEST_CASE("sparse pass communication") {
  SUBCASE("vertex whose edges and neighbours are all local sends nothing") {
    bsp::Cluster c({2, 1, 1});
    EdgeList g{8, {{0, 1, 1.0}, {1, 0, 1.0}, {6, 7, 1.0}, {7, 6, 1.0}}, false};
    const DistGraph dg = ingest(c, g, {8, 0, 1});
    REQUIRE(dg.owner(0) == dg.owner(1));
    MaxProp mp{std::vector<std::int64_t>(g.n, 0)};
    const auto r = dist_edge_map(c, dg, DistVertexSubset::from_vertices(dg.partition, {0}), mp.spec(EdgeMapMode::kSparse));
    CHECK(r.counters.total_sent() == 0);
    CHECK(r.next.to_vector() == std::vector<VertexId>{1});
  }
  SUBCASE("star centre reaches every edge machine through its tree") {
    const std::uint32_t p = 4;
    bsp::Cluster c({p, 2, 1});
    const DistGraph dg = ingest(c, star(1000, false), {8, 2, 2});
    MaxProp mp{std::vector<std::int64_t>(dg.n, 0)};
    const auto before = phase_now(c, "edge_map_source");
    const auto r = dist_edge_map(c, dg, DistVertexSubset::from_vertices(dg.partition, {0}), mp.spec(EdgeMapMode::kSparse));
    const auto d = phase_now(c, "edge_map_source") - before;
    CHECK(r.edges_applied == 1000);
    CHECK(r.next.size() == 1000);
    const FrozenTree& t = dg.source_trees.at(0);
    std::uint64_t remote_links = 0;
    for (std::size_t i = 1; i < t.nodes.size(); ++i) remote_links += t.nodes[i].machine != t.nodes[i].parent;
    CHECK(d.messages <= remote_links);
    for (const auto& node : t.nodes) CHECK(t.children_of(node.machine).size() <= 2 * p);
  }
  SUBCASE("values for one remote machine share an envelope") {
    bsp::Cluster c({2, 1, 1});
    // 0 and 1 live on machine 0; all their edges go to vertices on machine 1.
    EdgeList g{8, {{0, 6, 1.0}, {1, 7, 1.0}, {6, 0, 1.0}, {7, 1, 1.0}}, false};
    const DistGraph dg = ingest(c, g, {8, 0, 1});
    REQUIRE(dg.owner(0) == dg.owner(1));
    REQUIRE(dg.owner(6) != dg.owner(0));
    MaxProp mp{std::vector<std::int64_t>(g.n, 0)};
    const auto r = dist_edge_map(c, dg, DistVertexSubset::from_vertices(dg.partition, {0, 1}), mp.spec(EdgeMapMode::kSparse));
    CHECK(r.counters.messages <= 1);
    CHECK(r.next.to_vector() == std::vector<VertexId>{6, 7});
  }
}

TEST_CASE("dense pass is destination aware and balanced") {
  const std::uint32_t p = 4;
  bsp::Cluster c({p, 1, 1});
  const EdgeList g = symmetrize(gen_ba(2000, 4, 9));
  const DistGraph dg = ingest(c, g, {8, 0, 1});
  VertexId lone = g.n;
  for (VertexId v = 0; v < g.n; ++v) {
    if (dg.edge_machines[v].size() == 1 && dg.edge_machines[v][0] != dg.owner(v)) lone = v;
    if (dg.edge_machines[v].size() == 1 && lone == g.n) lone = v;
  }
  REQUIRE(lone < g.n);
  MaxProp mp{std::vector<std::int64_t>(g.n, 0)};
  const auto before = phase_now(c, "edge_map_source");
  dist_edge_map(c, dg, DistVertexSubset::from_vertices(dg.partition, {lone}), mp.spec(EdgeMapMode::kDense));
  const auto d = phase_now(c, "edge_map_source") - before;
  CHECK(d.messages <= 1);

  MaxProp all{std::vector<std::int64_t>(g.n, 0)};
  const auto scan_before = phase_now(c, "edge_map_apply");
  dist_edge_map(c, dg, DistVertexSubset::all(dg.partition), all.spec(EdgeMapMode::kDense));
  const auto scan = phase_now(c, "edge_map_apply") - scan_before;
  for (MachineId m = 0; m < p; ++m) CHECK(scan.comp_work[m] >= dg.shards[m].edges.size());
  CHECK(bsp::load_imbalance(scan.comp_work) <= 2.0);
}

TEST_CASE("edge map is deterministic across thread counts") {
  const EdgeList g = symmetrize(gen_ba(500, 3, 2));
  auto run = [&](std::uint32_t threads) {
    bsp::Cluster c({6, 4, threads});
    const DistGraph dg = ingest(c, g, {4, 2, 4});
    MaxProp mp{std::vector<std::int64_t>(g.n, 1)};
    mp.label[0] = 9;
    const auto r = dist_edge_map(c, dg, DistVertexSubset::from_vertices(dg.partition, {0, 1, 2, 3}), mp.spec(EdgeMapMode::kAuto));
    return std::make_tuple(r.next.to_vector(), mp.label, r.counters, dg.stats.counters);
  };
  CHECK(run(1) == run(3));
}

TEST_CASE("ingest honours a given partition") {
  EdgeList g{6, {{0, 1, 1}, {0, 2, 1}, {0, 3, 1}, {4, 5, 1}}, false};
  bsp::Cluster c({2, 1, 1});
  IngestConfig cfg;
  cfg.partition = VertexPartition{{0, 3, 6}};
  const DistGraph dg = ingest(c, g, cfg);
  CHECK(dg.partition.begin == std::vector<VertexId>{0, 3, 6});
  CHECK(dg.owner(4) == 1);
  cfg.partition = VertexPartition{{0, 6}};
  CHECK_THROWS_AS(ingest(c, g, cfg), std::invalid_argument);
  cfg.partition = VertexPartition{{0, 3, 5}};
  CHECK_THROWS_AS(ingest(c, g, cfg), std::invalid_argument);
}
