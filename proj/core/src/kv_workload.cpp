#include "tdorch/kv_workload.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace tdorch::kv {

void ZipfSpec::validate() const {
  if (!(gamma >= 0.0)) throw std::invalid_argument("zipf gamma must be >= 0");
  if (key_space == 0) throw std::invalid_argument("key space must be positive");
  if (!(pair_fraction >= 0.0 && pair_fraction <= 1.0)) {
    throw std::invalid_argument("pair fraction must be in [0, 1]");
  }
}

ZipfSampler::ZipfSampler(double gamma, std::uint64_t key_space) {
  ZipfSpec{gamma, key_space, 0, 0}.validate();
  cdf_.resize(key_space);
  double acc = 0.0;
  for (std::uint64_t r = 1; r <= key_space; ++r) {
    acc += std::pow(static_cast<double>(r), -gamma);
    cdf_[r - 1] = acc;
  }
  for (auto& c : cdf_) c /= acc;
  cdf_.back() = 1.0;
}

std::uint64_t ZipfSampler::operator()(std::mt19937_64& rng) const {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  return std::min<std::uint64_t>(static_cast<std::uint64_t>(it - cdf_.begin()), cdf_.size() - 1);
}

double ZipfSampler::probability(std::uint64_t key) const {
  return key == 0 ? cdf_[0] : cdf_.at(key) - cdf_[key - 1];
}

RankScatter::RankScatter(std::uint64_t key_space, std::uint64_t seed) : k_(key_space) {
  if (k_ == 0) throw std::invalid_argument("key space must be positive");
  mul_ = (mix64(hash_combine(seed, 0x5ca7)) % k_) | 1;
  while (std::gcd(mul_, k_) != 1) mul_ = (mul_ + 2) % k_;
  if (mul_ == 0) mul_ = 1;
  add_ = mix64(hash_combine(seed, 0xadd)) % k_;
}

Address RankScatter::key_of_rank(std::uint64_t rank0) const {
  const unsigned __int128 x = static_cast<unsigned __int128>(rank0) * mul_ + add_;
  return static_cast<Address>(x % k_);
}

TaskBatch gen_zipf_tasks(const ZipfSpec& spec, std::uint32_t num_machines) {
  spec.validate();
  TaskBatch batch(num_machines);
  if (spec.tasks_per_machine == 0) return batch;
  const ZipfSampler sampler(spec.gamma, spec.key_space);
  const RankScatter scatter(spec.key_space, spec.seed);
  for (MachineId m = 0; m < num_machines; ++m) {
    std::mt19937_64 rng(hash_combine(spec.seed, m));
    std::uniform_int_distribution<std::int64_t> mul(1, 3);
    std::uniform_int_distribution<std::int64_t> add(0, 99);
    auto& list = batch[m];
    list.reserve(spec.tasks_per_machine);
    std::mt19937_64 pair_rng(hash_combine(spec.seed ^ 0x7061'6972ULL, m));
    std::bernoulli_distribution paired(spec.pair_fraction);
    std::uniform_int_distribution<std::uint64_t> any_key(0, spec.key_space - 1);
    for (std::uint64_t i = 0; i < spec.tasks_per_machine; ++i) {
      const Address key = scatter.key_of_rank(sampler(rng));
      const std::int64_t a = mul(rng);
      const std::int64_t b = add(rng);
      std::vector<Address> keys{key};
      if (spec.pair_fraction > 0 && paired(pair_rng)) keys.push_back(any_key(pair_rng));
      list.emplace_back(std::span<const Address>(keys), pack_words(a, b), m, static_cast<std::uint32_t>(i));
    }
  }
  return batch;
}

KvPartition::KvPartition(std::uint64_t key_space, std::uint32_t num_machines)
    : k_(key_space), p_(num_machines) {
  if (k_ == 0) throw std::invalid_argument("key space must be positive");
  if (p_ == 0) throw std::invalid_argument("need at least one machine");
}

MachineId KvPartition::owner(Address a) const {
  const unsigned __int128 x = static_cast<unsigned __int128>(a) * p_ / k_;
  return x > 0xffffffffu ? 0xffffffffu : static_cast<MachineId>(x);
}

std::pair<Address, Address> KvPartition::range(MachineId m) const {
  // Smallest a with floor(a*P/K) >= m is ceil(m*K/P).
  auto lower = [&](std::uint64_t j) {
    const unsigned __int128 num = static_cast<unsigned __int128>(j) * k_;
    return static_cast<Address>((num + p_ - 1) / p_);
  };
  return {lower(m), lower(std::uint64_t{m} + 1)};
}

std::vector<std::uint64_t> KvPartition::shard_sizes() const {
  std::vector<std::uint64_t> out(p_);
  for (MachineId m = 0; m < p_; ++m) {
    const auto [lo, hi] = range(m);
    out[m] = hi - lo;
  }
  return out;
}

std::optional<KvMerge> parse_merge(std::string_view name) {
  if (name == "affine") return KvMerge::kAffine;
  if (name == "delta") return KvMerge::kDelta;
  return std::nullopt;
}

std::string_view to_string(KvMerge m) { return m == KvMerge::kAffine ? "affine" : "delta"; }

OrchestrationSpec kv_spec(const KvPartition& partition, KvMerge merge) {
  GetFn get = [](bsp::MachineState& s, Address a) {
    const auto it = s.local_data.find(a);
    return it == s.local_data.end() ? Value::of(static_cast<std::int64_t>(a)) : it->second;
  };
  MergeableOp op = merge == KvMerge::kAffine ? ops::affine_compose() : ops::add();
  WriteBackFn wb = [op](bsp::MachineState& s, Address a, const Value& agg) {
    auto [it, inserted] = s.local_data.try_emplace(a, Value::of(static_cast<std::int64_t>(a)));
    it->second = op.finalize(it->second, agg);
  };
  ExecuteFn f = [merge](const TaskContext& t, std::span<const Value> data) {
    const auto [mul, add] = unpack_words(t.payload());
    TaskOutcome out;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::int64_t x = data[i].first;
      const std::int64_t y = wrap_add(wrap_mul(x, mul), add);
      out.updates[i] = merge == KvMerge::kAffine ? Value{mul, add} : Value::of(wrap_sub(y, x));
      if (i == 0) out.output = Value::of(y);
    }
    return out;
  };
  OwnerFn owner = [partition](Address a) { return partition.owner(a); };
  return OrchestrationSpec(std::move(f), std::move(get), std::move(wb), std::move(op), std::move(owner));
}

std::uint64_t shard_digest(const bsp::Cluster& cluster) {
  std::vector<std::pair<Address, Value>> cells;
  for (MachineId m = 0; m < cluster.num_machines(); ++m) {
    for (const auto& kv : cluster.machine(m).local_data) cells.push_back(kv);
  }
  std::sort(cells.begin(), cells.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::uint64_t h = 0x7464'6f72'6368ULL;
  for (const auto& [a, v] : cells) {
    h = hash_combine(h, a);
    h = hash_combine(h, static_cast<std::uint64_t>(v.first));
    h = hash_combine(h, static_cast<std::uint64_t>(v.second));
  }
  return h;
}

}  // namespace tdorch::kv
