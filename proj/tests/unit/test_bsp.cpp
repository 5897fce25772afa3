#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "tdorch/bsp.hpp"

using namespace tdorch;
using namespace tdorch::bsp;

TEST_CASE("config validation") {
  CHECK_THROWS_AS(ClusterConfig({0, 0, 1}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(ClusterConfig({kMaxMachines + 1, 0, 1}).validate(), std::invalid_argument);
  CHECK_NOTHROW(ClusterConfig({kMaxMachines, 0, 1}).validate());
}

TEST_CASE("silent superstep on one machine") {
  Cluster c({1, 0, 1});
  const CostCounters d = c.run_superstep([](StepContext&) {});
  CHECK(d.words_sent == std::vector<std::uint64_t>{0});
  CHECK(c.superstep() == 1);
}

TEST_CASE("16-byte payload is two words") {
  Cluster c({2, 0, 1});
  c.run_superstep([](StepContext& ctx) {
    if (ctx.id() == 0) ctx.send(1, Bytes(16, 0xab));
  });
  CHECK(c.counters().words_sent == std::vector<std::uint64_t>{2, 0});
  CHECK(c.counters().words_received == std::vector<std::uint64_t>{0, 2});
  std::size_t got = 0;
  c.run_superstep([&](StepContext& ctx) {
    if (ctx.id() == 1) got = ctx.inbox().size();
  });
  CHECK(got == 1);
}

TEST_CASE("partial words round up") {
  Cluster c({2, 0, 1});
  c.run_superstep([](StepContext& ctx) {
    if (ctx.id() == 0) ctx.send(1, Bytes(9, 0));
  });
  CHECK(c.counters().words_sent[0] == 2);
}

TEST_CASE("all-to-all single words") {
  Cluster c({4, 0, 1});
  c.run_superstep([](StepContext& ctx) {
    for (MachineId m = 0; m < 4; ++m) {
      if (m != ctx.id()) ctx.send(m, Bytes(8, 1));
    }
  });
  for (MachineId m = 0; m < 4; ++m) {
    CHECK(c.counters().words_sent[m] == 3);
    CHECK(c.counters().words_received[m] == 3);
  }
  CHECK(c.counters().messages == 12);
}

TEST_CASE("self messages are delivered for free") {
  Cluster c({2, 0, 1});
  c.run_superstep([](StepContext& ctx) { ctx.send(ctx.id(), Bytes(64, 0)); });
  CHECK(c.counters().total_sent() == 0);
  CHECK(c.has_pending());
  int delivered = 0;
  c.run_superstep([&](StepContext& ctx) { delivered += static_cast<int>(ctx.inbox().size()); });
  CHECK(delivered == 2);
}

TEST_CASE("bad destination is a routing error") {
  Cluster c({2, 0, 1});
  CHECK_THROWS_AS(c.run_superstep([](StepContext& ctx) { ctx.send(7, Bytes(1, 0)); }), RoutingError);
}

TEST_CASE("a throwing step aborts with the machine id") {
  Cluster c({3, 0, 1});
  try {
    c.run_superstep([](StepContext& ctx) {
      if (ctx.id() == 2) throw std::runtime_error("boom");
    });
    FAIL("expected StageAborted");
  } catch (const StageAborted& e) {
    CHECK(e.machine() == 2);
  }
}

TEST_CASE("inbox is sorted by source then sequence") {
  Cluster c({4, 0, 1});
  c.run_superstep([](StepContext& ctx) {
    for (int k = 0; k < 3; ++k) ctx.send(0, Bytes{static_cast<std::uint8_t>(ctx.id()), static_cast<std::uint8_t>(k)});
  });
  std::vector<std::pair<MachineId, std::uint32_t>> order;
  c.run_superstep([&](StepContext& ctx) {
    if (ctx.id() != 0) return;
    for (const auto& m : ctx.inbox()) {
      order.emplace_back(m.src, m.seq);
      CHECK(m.payload[0] == m.src);
      CHECK(m.payload[1] == m.seq);
    }
  });
  CHECK(order.size() == 12);
  CHECK(std::is_sorted(order.begin(), order.end()));
}

TEST_CASE("envelopes batch one message per destination and phase") {
  Cluster c({2, 0, 1});
  const PhaseId a = c.phase("a");
  const PhaseId b = c.phase("b");
  CHECK(c.phase("a") == a);
  c.run_superstep([&](StepContext& ctx) {
    if (ctx.id() != 0) return;
    ctx.envelope(1, a).u64(1);
    ctx.envelope(1, a).u64(2);
    ctx.envelope(1, b).u64(3);
  });
  CHECK(c.counters().messages == 2);
  CHECK(c.phase_counters()[a].words_sent[0] == 2);
  CHECK(c.phase_counters()[b].words_sent[0] == 1);
}

TEST_CASE("run_local cannot send") {
  Cluster c({2, 0, 1});
  CHECK_THROWS(c.run_local([](StepContext& ctx) { ctx.send(1, Bytes(1, 0)); }));
}

TEST_CASE("load imbalance") {
  const std::vector<std::uint64_t> even{4, 4, 4, 4};
  const std::vector<std::uint64_t> hot{8, 0, 0, 0};
  const std::vector<std::uint64_t> zero{0, 0, 0};
  CHECK(load_imbalance(even) == doctest::Approx(1.0));
  CHECK(load_imbalance(hot) == doctest::Approx(4.0));
  CHECK(load_imbalance(zero) == doctest::Approx(1.0));
}

namespace {

// Random traffic whose emission order is permuted by `shuffle_seed`; the
// receiver folds its canonical inbox into a hash.
std::pair<CostCounters, std::vector<std::uint64_t>> random_exchange(std::uint32_t p, std::uint64_t seed,
                                                                    std::uint64_t shuffle_seed,
                                                                    std::uint32_t threads) {
  Cluster c({p, seed, threads});
  std::vector<std::uint64_t> digest(p, 0);
  for (int round = 0; round < 4; ++round) {
    c.run_superstep([&](StepContext& ctx) {
      for (const auto& m : ctx.inbox()) {
        for (auto byte : m.payload) digest[ctx.id()] = hash_combine(digest[ctx.id()], byte + 256 * m.src);
      }
      std::mt19937_64 rng(hash_combine(seed, ctx.id() * 100 + round));
      std::vector<std::pair<MachineId, Bytes>> out;
      const int k = static_cast<int>(rng() % 6);
      for (int i = 0; i < k; ++i) {
        out.emplace_back(static_cast<MachineId>(rng() % p), Bytes(1 + rng() % 20, static_cast<std::uint8_t>(i)));
      }
      // Messages to one destination keep their relative order; only the
      // interleaving across destinations changes.
      std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
      if (shuffle_seed % 2 == 1) {
        std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
      }
      for (auto& [dst, bytes] : out) ctx.send(dst, std::move(bytes));
    });
    CHECK(c.counters().total_sent() == c.counters().total_received());
  }
  return {c.counters(), digest};
}

}  // namespace

TEST_CASE("property: conservation, determinism, thread independence, emission order") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const std::uint32_t p = 1 + static_cast<std::uint32_t>(seed % 7);
    const auto base = random_exchange(p, seed, 0, 1);
    CHECK(base == random_exchange(p, seed, 0, 1));
    CHECK(base == random_exchange(p, seed, 0, 4));
    CHECK(base.second == random_exchange(p, seed, 1, 1).second);
  }
}

TEST_CASE("superstep count equals calls") {
  Cluster c({3, 0, 1});
  for (int i = 0; i < 5; ++i) c.run_superstep([](StepContext&) {});
  CHECK(c.superstep() == 5);
  CHECK(c.counters().supersteps == 5);
}
