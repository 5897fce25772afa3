#include "tdorch/baselines.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "stage_common.hpp"

namespace tdorch {

std::optional<Strategy> parse_strategy(std::string_view name) {
  if (name == "direct-push") return Strategy::kDirectPush;
  if (name == "direct-pull") return Strategy::kDirectPull;
  if (name == "sorting") return Strategy::kSorting;
  if (name == "td-orch") return Strategy::kTdOrch;
  return std::nullopt;
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kDirectPush: return "direct-push";
    case Strategy::kDirectPull: return "direct-pull";
    case Strategy::kSorting: return "sorting";
    case Strategy::kTdOrch: return "td-orch";
  }
  return "unknown";
}

namespace {

std::uint64_t words_of(std::size_t bytes) { return (bytes + bsp::kWordSize - 1) / bsp::kWordSize; }

void require_single_address(const TaskBatch& tasks, const char* who) {
  for (const auto& list : tasks) {
    for (const auto& t : list) {
      if (t.num_addrs() > 1) {
        throw UnsupportedWorkload(std::string(who) + " supports single-address tasks only");
      }
    }
  }
}

// Folds updates for each address in task order and hands the partial to the
// owner: locally as a contribution, otherwise in a (u64 addr, value) record.
void send_partials(bsp::StepContext& ctx, detail::StageBook& book, const OrchestrationSpec& spec,
                   const std::map<Address, Value>& partials, bsp::PhaseId phase) {
  const MachineId me = ctx.id();
  for (const auto& [addr, v] : partials) {
    const MachineId o = detail::checked_owner(spec, addr, ctx.num_machines());
    if (o == me) {
      book.add_contribution(me, addr, 1, me, v);
      continue;
    }
    auto& w = ctx.envelope(o, phase);
    w.u64(addr);
    w.value(v);
  }
}

void receive_partials(bsp::StepContext& ctx, detail::StageBook& book, const bsp::Message& msg) {
  ByteReader r(msg.payload);
  while (!r.done()) {
    const Address addr = r.u64();
    book.add_contribution(ctx.id(), addr, 1, msg.src, r.value());
  }
}

void accumulate(std::map<Address, Value>& partials, const MergeableOp& op, Address a, const Value& v) {
  if (op.is_identity(v)) return;
  auto [it, inserted] = partials.try_emplace(a, op.identity);
  it->second = op.combine(it->second, v);
}

}  // namespace

StageResult direct_pull(bsp::Cluster& cluster, const TaskBatch& tasks, const OrchestrationSpec& spec) {
  validate_batch(cluster, tasks);
  const std::uint32_t p = cluster.num_machines();
  detail::StageBook book(cluster, tasks, spec);
  const auto ph_req = cluster.phase("pull_request");
  const auto ph_reply = cluster.phase("pull_reply");
  const auto ph_exec = cluster.phase("execution");
  const auto ph_wb = cluster.phase("writeback");

  std::vector<std::unordered_map<Address, Value>> fetched(p);

  cluster.run_superstep([&](bsp::StepContext& ctx) {
    const MachineId me = ctx.id();
    std::unordered_set<Address> seen;
    for (const auto& t : tasks[me]) {
      for (Address a : t.addrs()) {
        const MachineId o = detail::checked_owner(spec, a, p);
        if (o == me || !seen.insert(a).second) continue;
        ctx.envelope(o, ph_req).u64(a);
      }
    }
  });
  cluster.run_superstep([&](bsp::StepContext& ctx) {
    for (const auto& msg : ctx.inbox()) {
      ByteReader r(msg.payload);
      auto& w = ctx.envelope(msg.src, ph_reply);
      while (!r.done()) {
        const Address a = r.u64();
        w.u64(a);
        w.value(spec.get(ctx.state(), a));
      }
    }
  });
  cluster.run_superstep([&](bsp::StepContext& ctx) {
    const MachineId me = ctx.id();
    auto& mine = fetched[me];
    for (const auto& msg : ctx.inbox()) {
      ByteReader r(msg.payload);
      while (!r.done()) {
        const Address a = r.u64();
        mine[a] = r.value();
      }
    }
    std::map<Address, Value> partials;
    for (const auto& t : tasks[me]) {
      std::array<Value, kMaxAddresses> data{};
      const auto addrs = t.addrs();
      for (std::size_t i = 0; i < addrs.size(); ++i) {
        const auto it = mine.find(addrs[i]);
        data[i] = it != mine.end() ? it->second : spec.get(ctx.state(), addrs[i]);
      }
      const TaskOutcome out =
          book.execute(ctx, t, std::span<const Value>(data.data(), addrs.size()), ph_exec);
      for (std::size_t i = 0; i < addrs.size(); ++i) {
        accumulate(partials, spec.merge_value, addrs[i], out.updates[i]);
      }
      book.deliver_output(ctx, t, out, ph_exec);
    }
    send_partials(ctx, book, spec, partials, ph_wb);
  });
  cluster.run_superstep([&](bsp::StepContext& ctx) {
    for (const auto& msg : ctx.inbox()) receive_partials(ctx, book, msg);
  });
  book.commit();
  return book.finish();
}

StageResult direct_push(bsp::Cluster& cluster, const TaskBatch& tasks, const OrchestrationSpec& spec) {
  validate_batch(cluster, tasks);
  require_single_address(tasks, "direct-push");
  const std::uint32_t p = cluster.num_machines();
  detail::StageBook book(cluster, tasks, spec);
  const auto ph_task = cluster.phase("task_transfer");
  const auto ph_exec = cluster.phase("execution");
  const auto ph_out = cluster.phase("output_return");

  std::vector<std::vector<TaskContext>> at_owner(p);

  cluster.run_superstep([&](bsp::StepContext& ctx) {
    const MachineId me = ctx.id();
    for (const auto& t : tasks[me]) {
      if (t.num_addrs() == 0) {
        const TaskOutcome out = book.execute(ctx, t, {}, ph_exec);
        book.deliver_output(ctx, t, out, ph_exec);
        continue;
      }
      const MachineId o = detail::checked_owner(spec, t.addrs()[0], p);
      if (o == me) {
        at_owner[me].push_back(t);
        continue;
      }
      auto& w = ctx.envelope(o, ph_task);
      const std::size_t before = w.size();
      t.encode(w);
      ctx.add_overhead(words_of(w.size() - before), ph_task);
    }
  });
  cluster.run_superstep([&](bsp::StepContext& ctx) {
    const MachineId me = ctx.id();
    auto& mine = at_owner[me];
    for (const auto& msg : ctx.inbox()) {
      ByteReader r(msg.payload);
      while (!r.done()) mine.push_back(TaskContext::decode(r));
    }
    detail::sort_canonical(mine);
    std::map<Address, Value> partials;
    for (const auto& t : mine) {
      const Address a = t.addrs()[0];
      const Value data = spec.get(ctx.state(), a);
      const TaskOutcome out = book.execute(ctx, t, std::span<const Value>(&data, 1), ph_exec);
      accumulate(partials, spec.merge_value, a, out.updates[0]);
      book.deliver_output(ctx, t, out, ph_out);
    }
    for (const auto& [a, v] : partials) book.add_contribution(me, a, 1, me, v);
    mine.clear();
  });
  cluster.run_superstep([&](bsp::StepContext& ctx) {
    for (const auto& msg : ctx.inbox()) book.receive_outputs(ctx, msg);
  });
  book.commit();
  return book.finish();
}

namespace {

struct SortKey {
  Address addr;
  TaskId id;
  friend auto operator<=>(const SortKey&, const SortKey&) = default;
};

SortKey key_of(const TaskContext& t) { return SortKey{t.addrs().empty() ? 0 : t.addrs()[0], t.id()}; }

// One binomial broadcast/reduce tree over the machines holding an address.
struct RangeTree {
  std::vector<MachineId> members;  // in machine order; members[0] is the leader
  std::uint32_t offset = 0;        // this machine's position in members
};

// Children of offset o in a binomial tree of size s: o + 2^r for every r with
// 2^r > o and o + 2^r < s.
std::vector<std::uint32_t> binomial_children(std::uint32_t o, std::uint32_t s) {
  std::vector<std::uint32_t> out;
  for (std::uint64_t step = 1; o + step < s; step <<= 1) {
    if (step > o) out.push_back(static_cast<std::uint32_t>(o + step));
  }
  return out;
}

std::uint32_t binomial_parent(std::uint32_t o) {
  std::uint32_t top = 1;
  while ((top << 1) <= o) top <<= 1;
  return o - top;
}

struct SortSite {
  std::vector<TaskContext> held;  // sorted by key after the exchange
  std::map<Address, RangeTree> trees;
  std::map<Address, Value> partial;
  std::map<Address, std::uint32_t> pending_children;
  std::map<Address, std::vector<std::pair<std::uint32_t, Value>>> child_partials;
};

}  // namespace

StageResult sorting_based(bsp::Cluster& cluster, const TaskBatch& tasks, const OrchestrationSpec& spec) {
  validate_batch(cluster, tasks);
  require_single_address(tasks, "sorting");
  const std::uint32_t p = cluster.num_machines();
  detail::StageBook book(cluster, tasks, spec);
  const auto ph_sample = cluster.phase("sort_sample");
  const auto ph_split = cluster.phase("sort_splitters");
  const auto ph_xchg = cluster.phase("sort_exchange");
  const auto ph_bound = cluster.phase("sort_boundary");
  const auto ph_fetch = cluster.phase("fetch");
  const auto ph_bcast = cluster.phase("broadcast");
  const auto ph_exec = cluster.phase("execution");
  const auto ph_reduce = cluster.phase("reduce");
  const auto ph_wb = cluster.phase("writeback");
  const auto ph_out = cluster.phase("output_return");
  const auto& op = spec.merge_value;

  std::vector<SortSite> sites(p);
  std::vector<SortKey> splitters;
  struct Bound {
    bool empty = true;
    Address first = 0;
    Address last = 0;
  };
  std::vector<std::vector<Bound>> bounds(p, std::vector<Bound>(p));

  // Regular samples to machine 0.
  cluster.run_superstep([&](bsp::StepContext& ctx) {
    const MachineId me = ctx.id();
    std::vector<SortKey> keys;
    for (const auto& t : tasks[me]) {
      if (t.num_addrs() == 0) {
        const TaskOutcome out = book.execute(ctx, t, {}, ph_exec);
        book.deliver_output(ctx, t, out, ph_exec);
        continue;
      }
      keys.push_back(key_of(t));
    }
    std::sort(keys.begin(), keys.end());
    ctx.add_overhead(keys.size(), ph_sample);
    if (keys.empty() || p == 1) return;
    auto& w = ctx.envelope(0, ph_sample);
    for (std::uint32_t i = 1; i < p; ++i) {
      const SortKey& k = keys[i * keys.size() / p];
      w.u64(k.addr);
      w.u64(k.id);
    }
  });
  // Machine 0 picks splitters and broadcasts them.
  cluster.run_superstep([&](bsp::StepContext& ctx) {
    if (ctx.id() != 0 || p == 1) return;
    std::vector<SortKey> samples;
    for (const auto& msg : ctx.inbox()) {
      ByteReader r(msg.payload);
      while (!r.done()) {
        const Address a = r.u64();
        samples.push_back(SortKey{a, r.u64()});
      }
    }
    std::sort(samples.begin(), samples.end());
    std::vector<SortKey> chosen;
    if (!samples.empty()) {
      for (std::uint32_t i = 1; i < p; ++i) chosen.push_back(samples[i * samples.size() / p]);
    }
    for (MachineId m = 0; m < p; ++m) {
      auto& w = ctx.envelope(m, ph_split);
      w.u32(static_cast<std::uint32_t>(chosen.size()));
      for (const auto& k : chosen) {
        w.u64(k.addr);
        w.u64(k.id);
      }
    }
  });
  // Exchange: keys <= splitter[i] (and > splitter[i-1]) go to machine i.
  std::vector<std::vector<SortKey>> local_splitters(p);
  cluster.run_superstep([&](bsp::StepContext& ctx) {
    const MachineId me = ctx.id();
    auto& spl = local_splitters[me];
    for (const auto& msg : ctx.inbox()) {
      ByteReader r(msg.payload);
      const std::uint32_t n = r.u32();
      for (std::uint32_t i = 0; i < n; ++i) {
        const Address a = r.u64();
        spl.push_back(SortKey{a, r.u64()});
      }
    }
    for (const auto& t : tasks[me]) {
      if (t.num_addrs() == 0) continue;
      const auto dst = static_cast<MachineId>(
          std::lower_bound(spl.begin(), spl.end(), key_of(t)) - spl.begin());
      if (dst == me) {
        sites[me].held.push_back(t);
        continue;
      }
      auto& w = ctx.envelope(dst, ph_xchg);
      const std::size_t before = w.size();
      t.encode(w);
      ctx.add_overhead(words_of(w.size() - before), ph_xchg);
    }
  });
  // Receive, sort, and all-gather each machine's first and last address.
  cluster.run_superstep([&](bsp::StepContext& ctx) {
    const MachineId me = ctx.id();
    auto& held = sites[me].held;
    for (const auto& msg : ctx.inbox()) {
      ByteReader r(msg.payload);
      while (!r.done()) held.push_back(TaskContext::decode(r));
    }
    std::sort(held.begin(), held.end(),
              [](const TaskContext& a, const TaskContext& b) { return key_of(a) < key_of(b); });
    ctx.add_overhead(held.size(), ph_bound);
    Bound b;
    if (!held.empty()) b = Bound{false, held.front().addrs()[0], held.back().addrs()[0]};
    bounds[me][me] = b;
    for (MachineId m = 0; m < p; ++m) {
      if (m == me) continue;
      auto& w = ctx.envelope(m, ph_bound);
      w.u8(b.empty ? 0 : 1);
      w.u64(b.first);
      w.u64(b.last);
    }
  });

  // Builds range trees, asks owners for values, and from then on runs the
  // broadcast / execute / reduce pipeline until quiescent.
  auto execute_range = [&](bsp::StepContext& ctx, SortSite& site, Address a, const Value& v) {
    const auto lo = std::lower_bound(site.held.begin(), site.held.end(), SortKey{a, 0},
                                     [](const TaskContext& t, const SortKey& k) { return key_of(t) < k; });
    Value agg = op.identity;
    for (auto it = lo; it != site.held.end() && it->addrs()[0] == a; ++it) {
      const TaskOutcome out = book.execute(ctx, *it, std::span<const Value>(&v, 1), ph_exec);
      agg = op.combine(agg, out.updates[0]);
      book.deliver_output(ctx, *it, out, ph_out);
    }
    site.partial[a] = agg;
  };
  auto try_finish = [&](bsp::StepContext& ctx, SortSite& site, Address a) {
    if (!site.partial.contains(a) || site.pending_children[a] > 0) return;
    auto& kids = site.child_partials[a];
    std::sort(kids.begin(), kids.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    Value agg = site.partial[a];
    for (const auto& [o, v] : kids) agg = op.combine(agg, v);
    const RangeTree& tree = site.trees.at(a);
    if (tree.offset == 0) {
      const MachineId o = detail::checked_owner(spec, a, p);
      if (o == ctx.id()) {
        book.add_contribution(o, a, 0, o, agg);
      } else {
        auto& w = ctx.envelope(o, ph_wb);
        w.u64(a);
        w.value(agg);
      }
    } else {
      auto& w = ctx.envelope(tree.members[binomial_parent(tree.offset)], ph_reduce);
      w.u64(a);
      w.u32(tree.offset);
      w.value(agg);
    }
    site.partial.erase(a);
  };
  auto on_value = [&](bsp::StepContext& ctx, SortSite& site, Address a, const Value& v) {
    const RangeTree& tree = site.trees.at(a);
    const auto kids = binomial_children(tree.offset, static_cast<std::uint32_t>(tree.members.size()));
    site.pending_children[a] = static_cast<std::uint32_t>(kids.size());
    for (auto k : kids) {
      auto& w = ctx.envelope(tree.members[k], ph_bcast);
      w.u64(a);
      w.value(v);
    }
    execute_range(ctx, site, a, v);
    try_finish(ctx, site, a);
  };

  bool first = true;
  do {
    cluster.run_superstep([&](bsp::StepContext& ctx) {
      const MachineId me = ctx.id();
      SortSite& site = sites[me];
      if (first) {
        auto& bd = bounds[me];
        for (const auto& msg : ctx.inbox()) {
          ByteReader r(msg.payload);
          Bound b;
          b.empty = r.u8() == 0;
          b.first = r.u64();
          b.last = r.u64();
          bd[msg.src] = b;
        }
        std::vector<Address> addrs;
        for (const auto& t : site.held) {
          if (addrs.empty() || addrs.back() != t.addrs()[0]) addrs.push_back(t.addrs()[0]);
        }
        for (Address a : addrs) {
          // Machines holding `a` form a contiguous run among non-empty ones.
          std::vector<MachineId> left;
          for (MachineId m = me; m-- > 0;) {
            if (bd[m].empty) continue;
            if (bd[m].last != a) break;
            left.push_back(m);
          }
          RangeTree tree;
          tree.members.assign(left.rbegin(), left.rend());
          tree.offset = static_cast<std::uint32_t>(tree.members.size());
          tree.members.push_back(me);
          for (MachineId m = me + 1; m < p; ++m) {
            if (bd[m].empty) continue;
            if (bd[m].first != a) break;
            tree.members.push_back(m);
          }
          site.trees.emplace(a, std::move(tree));
        }
        for (auto& [a, tree] : site.trees) {
          if (tree.offset != 0) continue;
          const MachineId o = detail::checked_owner(spec, a, p);
          if (o == me) {
            on_value(ctx, site, a, spec.get(ctx.state(), a));
          } else {
            auto& w = ctx.envelope(o, ph_fetch);
            w.u8(0);
            w.u64(a);
          }
        }
        return;
      }
      for (const auto& msg : ctx.inbox()) {
        ByteReader r(msg.payload);
        if (msg.phase == ph_fetch) {
          while (!r.done()) {
            const std::uint8_t tag = r.u8();
            const Address a = r.u64();
            if (tag == 0) {
              auto& w = ctx.envelope(msg.src, ph_fetch);
              w.u8(1);
              w.u64(a);
              w.value(spec.get(ctx.state(), a));
            } else {
              on_value(ctx, site, a, r.value());
            }
          }
        } else if (msg.phase == ph_bcast) {
          while (!r.done()) {
            const Address a = r.u64();
            on_value(ctx, site, a, r.value());
          }
        } else if (msg.phase == ph_reduce) {
          std::vector<Address> touched;
          while (!r.done()) {
            const Address a = r.u64();
            const std::uint32_t from = r.u32();
            site.child_partials[a].emplace_back(from, r.value());
            site.pending_children[a] -= 1;
            touched.push_back(a);
          }
          for (Address a : touched) try_finish(ctx, site, a);
        } else if (msg.phase == ph_wb) {
          while (!r.done()) {
            const Address a = r.u64();
            book.add_contribution(me, a, 0, msg.src, r.value());
          }
        } else if (msg.phase == ph_out) {
          book.receive_outputs(ctx, msg);
        } else {
          throw std::logic_error("unexpected message phase in sorting stage");
        }
      }
    });
    first = false;
  } while (cluster.has_pending());

  for (const auto& site : sites) {
    if (!site.partial.empty()) throw std::logic_error("sorting stage did not drain");
  }
  book.commit();
  return book.finish();
}

StageResult run_strategy(Strategy s, bsp::Cluster& cluster, const TaskBatch& tasks,
                         const OrchestrationSpec& spec) {
  switch (s) {
    case Strategy::kDirectPush: return direct_push(cluster, tasks, spec);
    case Strategy::kDirectPull: return direct_pull(cluster, tasks, spec);
    case Strategy::kSorting: return sorting_based(cluster, tasks, spec);
    case Strategy::kTdOrch: return orchestrate(cluster, tasks, spec);
  }
  throw std::invalid_argument("unknown strategy");
}

}  // namespace tdorch
