#include <bit>
#include <cmath>
#include <cstdio>
#include <optional>
#include <set>

#include "commands.hpp"

namespace tdorch::cli {

namespace {

using namespace graph;

EdgeList load_graph(const GraphOptions& o, std::uint64_t seed) {
  if (o.input.empty() == o.gen.empty()) throw UsageError("give exactly one of --input and --gen");
  EdgeList g;
  if (!o.input.empty()) {
    try {
      g = read_edge_list_file(o.input, o.undirected);
    } catch (const GraphIoError& e) {
      throw IoError(e.what());
    }
  } else {
    try {
      if (o.gen == "er") {
        g = gen_er(o.n, o.p, seed);
      } else if (o.gen == "ba") {
        g = gen_ba(o.n, o.m, seed);
      } else {
        throw UsageError("unknown generator '" + o.gen + "' (expected er or ba)");
      }
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    if (o.undirected) g = symmetrize(g);
  }
  if (o.max_weight > 0) assign_integer_weights(g, o.max_weight, hash_combine(seed, 1));
  return g;
}

std::string format_double(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<bsp::CostCounters> snapshot(const bsp::Cluster& c) { return c.phase_counters(); }

std::map<std::string, bsp::CostCounters> phase_delta(const bsp::Cluster& c, const std::vector<bsp::CostCounters>& before) {
  std::map<std::string, bsp::CostCounters> out;
  const auto& names = c.phase_names();
  const auto& now = c.phase_counters();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const bsp::CostCounters d = i < before.size() ? now[i] - before[i] : now[i];
    if (d.total_sent() == 0 && d.total_comp() == 0 && d.total_overhead() == 0) continue;
    out[names[i]] = d;
  }
  return out;
}

Json ingest_summary(const DistGraph& g) {
  return {{"edges_per_machine", g.stats.edges_per_machine},
          {"fanout", g.stats.fanout},
          {"source_trees", g.source_trees.size()},
          {"dest_trees", g.dest_trees.size()},
          {"max_dest_depth", g.max_dest_depth},
          {"words_sent", g.stats.counters.total_sent()},
          {"supersteps", g.stats.counters.supersteps}};
}

}  // namespace

int run_graph(const GraphOptions& o) {
  static const std::set<std::string> algos{"bfs", "sssp", "bc", "cc", "pr"};
  if (!algos.contains(o.algo)) throw UsageError("unknown algorithm '" + o.algo + "'");
  const auto mode = parse_mode(o.mode);
  if (!mode) throw UsageError("unknown mode '" + o.mode + "' (expected auto, sparse or dense)");
  const bool needs_start = o.algo == "bfs" || o.algo == "sssp" || o.algo == "bc";
  if (needs_start && o.start < 0) throw UsageError("--start is required for " + o.algo);
  if (o.chunk_size < 2) throw UsageError("--chunk-size must be >= 2");
  if (o.fanout == 1) throw UsageError("--fanout must be 0 (default) or >= 2");
  if (o.algo == "pr" && (o.iters < 1 || !(o.damping > 0 && o.damping < 1))) {
    throw UsageError("pr needs --iters >= 1 and 0 < --damping < 1");
  }
  const std::uint64_t seed = resolve_seed(o.common);
  const EdgeList edges = load_graph(o, seed);
  if (needs_start && static_cast<std::uint64_t>(o.start) >= edges.n) {
    throw UsageError("--start " + std::to_string(o.start) + " is not a vertex (n = " + std::to_string(edges.n) + ")");
  }

  bsp::Cluster cluster({o.common.machines, seed, o.common.threads});
  const IngestConfig icfg{o.chunk_size, o.fanout, seed};
  const DistGraph g = ingest(cluster, edges, icfg);
  std::optional<DistGraph> gt;
  if (o.algo == "bc" && !o.undirected) {
    IngestConfig tcfg = icfg;
    tcfg.partition = g.partition;
    gt = ingest(cluster, transpose(edges), tcfg);
  }

  const AlgoOptions opt{*mode, o.mode_alpha};
  RunTrace trace;
  const auto before = snapshot(cluster);
  const VertexId start = needs_start ? static_cast<VertexId>(o.start) : 0;
  std::vector<std::string> values;
  std::uint64_t digest = hash_combine(0x6772617068ULL, edges.n);
  auto add_int = [&](std::int64_t x) {
    values.push_back(std::to_string(x));
    digest = hash_combine(digest, static_cast<std::uint64_t>(x));
  };
  auto add_real = [&](double x) {
    values.push_back(format_double(x));
    digest = hash_combine(digest, std::bit_cast<std::uint64_t>(x));
  };
  try {
    if (o.algo == "bfs") {
      for (auto d : bfs(cluster, g, start, opt, &trace)) add_int(d);
    } else if (o.algo == "sssp") {
      for (auto d : sssp(cluster, g, start, opt, &trace)) add_real(d);
    } else if (o.algo == "bc") {
      for (auto d : bc(cluster, g, gt ? *gt : g, start, opt, &trace)) add_real(d);
    } else if (o.algo == "cc") {
      for (auto l : cc(cluster, g, opt, &trace)) add_int(static_cast<std::int64_t>(l));
    } else {
      for (auto s : pr(cluster, g, o.iters, o.damping, opt, &trace)) add_real(s);
    }
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  Json config = {{"algo", o.algo},
                 {"input", o.input},
                 {"gen", o.gen},
                 {"n", edges.n},
                 {"m", edges.edges.size()},
                 {"undirected", o.undirected},
                 {"max_weight", o.max_weight},
                 {"machines", o.common.machines},
                 {"seed", seed},
                 {"mode", std::string(to_string(*mode))},
                 {"mode_alpha", o.mode_alpha},
                 {"chunk_size", o.chunk_size},
                 {"fanout", o.fanout},
                 {"threads", o.common.threads}};
  if (!o.gen.empty()) {
    if (o.gen == "er") config["p"] = o.p;
    if (o.gen == "ba") config["m_per_vertex"] = o.m;
  }
  if (needs_start) config["start"] = o.start;
  if (o.algo == "pr") {
    config["iters"] = o.iters;
    config["damping"] = o.damping;
  }
  Json report = new_report("graph", std::move(config));
  add_counters(report, trace.counters, phase_delta(cluster, before));
  Json modes = Json::array();
  Json sizes = Json::array();
  for (std::size_t i = 0; i < trace.modes.size(); ++i) {
    modes.push_back(std::string(to_string(trace.modes[i])));
    sizes.push_back(trace.frontiers[i].size());
  }
  report["result"] = {{"rounds", trace.modes.size()},
                      {"edges_applied", trace.edges_applied},
                      {"modes", modes},
                      {"frontier_sizes", sizes}};
  report["ingest"] = ingest_summary(g);
  if (gt) report["ingest_transpose"] = ingest_summary(*gt);
  report["digest"] = {{"values", hex_digest(digest)}};

  std::string text;
  for (const auto& v : values) text += v + "\n";
  if (!o.values.empty()) write_text(o.values, text);
  if (!o.dump.empty()) report["values"] = values;
  if (!o.common.csv.empty()) emit_csv(trace.counters, o.common.csv);
  emit_report(report, o.common.out);
  return kExitOk;
}

}  // namespace tdorch::cli
