#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <optional>
#include <vector>

#include "tdorch/orchestrator.hpp"

namespace tdorch::kv {

inline constexpr std::uint64_t kDefaultKeySpace = std::uint64_t{1} << 20;

struct ZipfSpec {
  double gamma = 0.0;
  std::uint64_t key_space = kDefaultKeySpace;
  std::uint64_t tasks_per_machine = 0;
  std::uint64_t seed = 0;
  // Probability that a task also updates a second, uniformly drawn key.
  double pair_fraction = 0.0;

  // Throws std::invalid_argument on gamma < 0 (or NaN), an empty key space or
  // pair_fraction outside [0, 1].
  void validate() const;
};

// Rank r in [1, K] drawn with probability r^-gamma / sum_j j^-gamma, via a
// precomputed CDF and binary search. Returned keys are r - 1.
class ZipfSampler {
 public:
  ZipfSampler(double gamma, std::uint64_t key_space);
  std::uint64_t operator()(std::mt19937_64& rng) const;
  double probability(std::uint64_t key) const;
  std::uint64_t key_space() const { return cdf_.size(); }

 private:
  std::vector<double> cdf_;
};

// Seeded bijection rank -> key, a -> (a*mul + add) mod K with gcd(mul, K) = 1,
// so popular ranks land on different shards as in a hashed table.
class RankScatter {
 public:
  RankScatter(std::uint64_t key_space, std::uint64_t seed);
  Address key_of_rank(std::uint64_t rank0) const;

 private:
  std::uint64_t k_;
  std::uint64_t mul_ = 1;
  std::uint64_t add_ = 0;
};

// Multiply-and-add tasks with payload (mul, add), keys drawn by rank and
// placed through RankScatter. With pair_fraction > 0 some tasks carry a second
// key, drawn from a separate stream so single-key tasks do not change. Each
// machine's list depends only on (seed, machine).
TaskBatch gen_zipf_tasks(const ZipfSpec& spec, std::uint32_t num_machines);

// Contiguous equal ranges: owner(a) = floor(a * P / K).
class KvPartition {
 public:
  KvPartition(std::uint64_t key_space, std::uint32_t num_machines);
  MachineId owner(Address a) const;
  // Half-open key range of machine m.
  std::pair<Address, Address> range(MachineId m) const;
  std::vector<std::uint64_t> shard_sizes() const;
  std::uint64_t key_space() const { return k_; }
  std::uint32_t num_machines() const { return p_; }

 private:
  std::uint64_t k_;
  std::uint32_t p_;
};

// How concurrent updates to one key are merged.
//  affine: ⊗ composes the (mul, add) pairs in canonical order, ⊙ applies the
//          composite. Combination order matters.
//  delta:  every task reads the stage's snapshot x and contributes
//          x*mul + add - x, summed with ADD. Order independent.
enum class KvMerge { kAffine, kDelta };

std::optional<KvMerge> parse_merge(std::string_view name);
std::string_view to_string(KvMerge m);

// Shard cells start at their own key (value(a) = a) until first written.
// Every key of a task gets the same multiply-and-add. The output is
// x*mul + add for the x read at the first key.
OrchestrationSpec kv_spec(const KvPartition& partition, KvMerge merge = KvMerge::kAffine);

// Order-independent digest over all machines' local_data.
std::uint64_t shard_digest(const bsp::Cluster& cluster);

}  // namespace tdorch::kv
