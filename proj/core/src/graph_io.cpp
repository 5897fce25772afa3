#include "tdorch/graph_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "tdorch/value.hpp"

namespace tdorch::graph {

namespace {

struct Line {
  std::size_t number;
  std::vector<std::string> tokens;
};

std::uint64_t parse_id(const std::string& tok, std::size_t line) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw GraphIoError("line " + std::to_string(line) + ": bad vertex id '" + tok + "'");
  }
  return v;
}

double parse_weight(const std::string& tok, std::size_t line) {
  std::istringstream in(tok);
  double w = 0;
  if (!(in >> w) || !in.eof() || !std::isfinite(w)) {
    throw GraphIoError("line " + std::to_string(line) + ": bad weight '" + tok + "'");
  }
  return w;
}

}  // namespace

EdgeList read_edge_list(std::istream& in, bool undirected) {
  std::vector<Line> lines;
  std::string raw;
  std::size_t number = 0;
  while (std::getline(in, raw)) {
    ++number;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    std::istringstream ls(raw);
    Line l{number, {}};
    for (std::string tok; ls >> tok;) l.tokens.push_back(tok);
    if (l.tokens.empty()) continue;
    if (l.tokens.size() > 3) {
      throw GraphIoError("line " + std::to_string(number) + ": expected 'u v' or 'u v w'");
    }
    lines.push_back(std::move(l));
  }
  if (in.bad()) throw GraphIoError("read failure");

  EdgeList g;
  std::size_t first = 0;
  std::uint64_t header_n = 0;
  bool has_header = false;
  if (!lines.empty() && lines[0].tokens.size() == 2) {
    const std::uint64_t hn = parse_id(lines[0].tokens[0], lines[0].number);
    const std::uint64_t hm = parse_id(lines[0].tokens[1], lines[0].number);
    bool fits = hm == lines.size() - 1;
    for (std::size_t i = 1; fits && i < lines.size(); ++i) {
      const auto& t = lines[i].tokens;
      fits = t.size() >= 2 && parse_id(t[0], lines[i].number) < hn && parse_id(t[1], lines[i].number) < hn;
    }
    if (fits) {
      has_header = true;
      header_n = hn;
      first = 1;
    }
  }
  std::uint64_t max_id = 0;
  bool any = false;
  for (std::size_t i = first; i < lines.size(); ++i) {
    const auto& l = lines[i];
    if (l.tokens.size() < 2) {
      throw GraphIoError("line " + std::to_string(l.number) + ": expected 'u v' or 'u v w'");
    }
    Edge e;
    e.u = parse_id(l.tokens[0], l.number);
    e.v = parse_id(l.tokens[1], l.number);
    if (l.tokens.size() == 3) {
      e.w = parse_weight(l.tokens[2], l.number);
      g.weighted = true;
    }
    max_id = std::max({max_id, e.u, e.v});
    any = true;
    g.edges.push_back(e);
  }
  g.n = std::max(header_n, any ? max_id + 1 : 0);
  return undirected ? symmetrize(g) : g;
}

EdgeList read_edge_list_file(const std::string& path, bool undirected) {
  std::ifstream in(path);
  if (!in) throw GraphIoError("cannot open " + path);
  return read_edge_list(in, undirected);
}

void write_edge_list(std::ostream& out, const EdgeList& g) {
  out << g.n << ' ' << g.edges.size() << '\n';
  out.precision(17);
  for (const auto& e : g.edges) {
    out << e.u << ' ' << e.v;
    if (g.weighted) out << ' ' << e.w;
    out << '\n';
  }
}

void write_edge_list_file(const std::string& path, const EdgeList& g) {
  std::ofstream out(path);
  if (!out) throw GraphIoError("cannot write " + path);
  write_edge_list(out, g);
  if (!out) throw GraphIoError("write failure on " + path);
}

EdgeList symmetrize(const EdgeList& g) {
  EdgeList out;
  out.n = g.n;
  out.weighted = g.weighted;
  out.edges.reserve(g.edges.size() * 2);
  for (const auto& e : g.edges) {
    out.edges.push_back(e);
    if (e.u != e.v) out.edges.push_back(Edge{e.v, e.u, e.w});
  }
  return out;
}

EdgeList transpose(const EdgeList& g) {
  EdgeList out = g;
  for (auto& e : out.edges) std::swap(e.u, e.v);
  return out;
}

EdgeList gen_er(std::uint64_t n, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("er: p must be in [0, 1]");
  EdgeList g;
  g.n = n;
  if (n < 2 || p == 0.0) return g;
  std::mt19937_64 rng(hash_combine(seed, 0xe7));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double log_q = std::log1p(-p);
  // Geometric skipping over the pairs (v, w), w < v, in row order.
  std::uint64_t v = 1;
  std::int64_t w = -1;
  while (v < n) {
    std::int64_t skip = 0;
    if (p < 1.0) skip = static_cast<std::int64_t>(std::floor(std::log1p(-unif(rng)) / log_q));
    w += 1 + skip;
    while (v < n && w >= static_cast<std::int64_t>(v)) {
      w -= static_cast<std::int64_t>(v);
      ++v;
    }
    if (v < n) g.edges.push_back(Edge{v, static_cast<VertexId>(w), 1.0});
  }
  return g;
}

EdgeList gen_ba(std::uint64_t n, std::uint64_t m, std::uint64_t seed) {
  if (m < 1 || m >= n) throw std::invalid_argument("ba: need 1 <= m < n");
  EdgeList g;
  g.n = n;
  std::mt19937_64 rng(hash_combine(seed, 0xba));
  std::vector<VertexId> targets(m);
  for (std::uint64_t i = 0; i < m; ++i) targets[i] = i;
  std::vector<VertexId> repeated;
  repeated.reserve(2 * n * m);
  for (VertexId source = m; source < n; ++source) {
    for (VertexId t : targets) g.edges.push_back(Edge{source, t, 1.0});
    repeated.insert(repeated.end(), targets.begin(), targets.end());
    repeated.insert(repeated.end(), m, source);
    std::vector<VertexId> next;
    std::unordered_set<VertexId> chosen;
    std::uniform_int_distribution<std::size_t> pick(0, repeated.size() - 1);
    while (next.size() < m) {
      const VertexId x = repeated[pick(rng)];
      if (chosen.insert(x).second) next.push_back(x);
    }
    targets = std::move(next);
  }
  return g;
}

void assign_integer_weights(EdgeList& g, std::uint64_t max_weight, std::uint64_t seed) {
  if (max_weight < 1) throw std::invalid_argument("max weight must be >= 1");
  std::mt19937_64 rng(hash_combine(seed, 0x3e));
  std::uniform_int_distribution<std::uint64_t> dist(1, max_weight);
  for (auto& e : g.edges) e.w = static_cast<double>(dist(rng));
  g.weighted = true;
}

}  // namespace tdorch::graph
