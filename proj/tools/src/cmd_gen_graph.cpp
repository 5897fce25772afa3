#include <cstdlib>

#include "commands.hpp"

namespace tdorch::cli {

int run_gen_graph(const GenGraphOptions& o) {
  if (o.out.empty()) throw UsageError("--out is required");
  CommonOptions seed_source;
  seed_source.seed = o.seed;
  seed_source.seed_given = o.seed_given;
  const std::uint64_t seed = resolve_seed(seed_source);
  graph::EdgeList g;
  try {
    if (o.model == "er") {
      g = graph::gen_er(o.n, o.p, seed);
    } else if (o.model == "ba") {
      g = graph::gen_ba(o.n, o.m, seed);
    } else {
      throw UsageError("unknown model '" + o.model + "' (expected er or ba)");
    }
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (o.undirected) g = graph::symmetrize(g);
  if (o.max_weight > 0) graph::assign_integer_weights(g, o.max_weight, hash_combine(seed, 1));
  try {
    graph::write_edge_list_file(o.out, g);
  } catch (const std::exception& e) {
    throw IoError(e.what());
  }
  return kExitOk;
}

}  // namespace tdorch::cli
