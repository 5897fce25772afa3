#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace tdorch::graph {

using VertexId = std::uint64_t;

struct Edge {
  VertexId u = 0;
  VertexId v = 0;
  double w = 1.0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct EdgeList {
  std::uint64_t n = 0;
  std::vector<Edge> edges;
  bool weighted = false;
};

class GraphIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Text edge list: one "u v" or "u v w" per line, 0-based ids, '#' starts a
// comment. A first data line "n m" is taken as a header when exactly m data
// lines follow it and all their ids are below n; otherwise it is an edge.
// n is the header's n or max id + 1, whichever is larger.
// Throws GraphIoError on malformed lines.
EdgeList read_edge_list(std::istream& in, bool undirected = false);
EdgeList read_edge_list_file(const std::string& path, bool undirected = false);

// Writes "n m" then one edge per line ("u v" or "u v w").
void write_edge_list(std::ostream& out, const EdgeList& g);
void write_edge_list_file(const std::string& path, const EdgeList& g);

// Adds (v, u) for every (u, v) with u != v.
EdgeList symmetrize(const EdgeList& g);
EdgeList transpose(const EdgeList& g);

// G(n, p) over unordered pairs, each pair emitted once as (u, v) with u > v.
// Throws std::invalid_argument unless 0 <= p <= 1.
EdgeList gen_er(std::uint64_t n, double p, std::uint64_t seed);

// Preferential attachment: each new vertex links to m distinct existing
// vertices picked from the repeated-endpoint list. Requires 1 <= m < n.
EdgeList gen_ba(std::uint64_t n, std::uint64_t m, std::uint64_t seed);

// Replaces every weight with a uniform integer in [1, max_weight].
void assign_integer_weights(EdgeList& g, std::uint64_t max_weight, std::uint64_t seed);

}  // namespace tdorch::graph
