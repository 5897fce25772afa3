#include "tdorch/orchestrator.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "stage_common.hpp"

namespace tdorch {

OrchestrationSpec::OrchestrationSpec(ExecuteFn f_in, GetFn get_in, WriteBackFn wb_in,
                                     MergeableOp merge_in, OwnerFn owner_in)
    : f(std::move(f_in)),
      get(std::move(get_in)),
      wb(std::move(wb_in)),
      merge_value(std::move(merge_in)),
      owner(std::move(owner_in)) {
  if (!f) throw std::invalid_argument("orchestration spec needs an execute function");
  if (!get) throw std::invalid_argument("orchestration spec needs a get function");
  if (!wb) throw std::invalid_argument("orchestration spec needs a write-back function");
  if (!owner) throw std::invalid_argument("orchestration spec needs an owner function");
  if (!merge_value.valid()) {
    throw std::invalid_argument("write-backs must be merge-able: no combine/finalize supplied");
  }
}

GetFn shard_get(Value fresh) {
  return [fresh](bsp::MachineState& m, Address a) {
    const auto it = m.local_data.find(a);
    return it == m.local_data.end() ? fresh : it->second;
  };
}

WriteBackFn shard_write_back(MergeableOp op, Value fresh) {
  return [op = std::move(op), fresh](bsp::MachineState& m, Address a, const Value& agg) {
    auto [it, inserted] = m.local_data.try_emplace(a, fresh);
    it->second = op.finalize(it->second, agg);
  };
}

void validate_batch(const bsp::Cluster& cluster, const TaskBatch& tasks) {
  if (tasks.size() != cluster.num_machines()) {
    throw std::invalid_argument("task batch must have one list per machine");
  }
  for (MachineId m = 0; m < tasks.size(); ++m) {
    for (std::size_t i = 0; i < tasks[m].size(); ++i) {
      const auto& t = tasks[m][i];
      if (t.origin() != m || t.local_index() != i) {
        throw std::invalid_argument("task origin/index does not match its batch position");
      }
    }
  }
}

ContentionResult substage1_contention_detection(bsp::Cluster& cluster, const TaskBatch& tasks,
                                                const OwnerFn& owner, std::uint32_t chunk_size,
                                                std::uint32_t fanout) {
  validate_batch(cluster, tasks);
  const std::uint32_t p = cluster.num_machines();
  const CommForest forest(ForestConfig{p, fanout, cluster.config().seed});
  const bsp::PhaseId phase = cluster.phase("contention_detection");
  const std::uint32_t h = forest.height();

  using Key = std::pair<std::uint32_t, Address>;  // (bfs index in the owner's tree, address)
  std::vector<std::map<Key, MetaTaskSet>> held(p);
  std::vector<std::vector<std::pair<Key, MetaTaskSet>>> carried(p);

  ContentionResult res;
  res.owner_sets.resize(p);
  res.fanout = fanout;
  res.height = h;
  res.supersteps = h + 1;

  auto owner_of = [&](Address a) {
    const MachineId o = owner(a);
    if (o >= p) throw std::out_of_range("address " + std::to_string(a) + " is outside the data partition");
    return o;
  };

  for (std::uint32_t step = 0; step <= h; ++step) {
    cluster.run_superstep([&](bsp::StepContext& ctx) {
      const MachineId me = ctx.id();
      auto& mine = held[me];
      auto& arena = ctx.state().spill_arena;
      auto absorb = [&](const Key& key, MetaTaskSet set) {
        auto it = mine.find(key);
        if (it == mine.end()) {
          mine.emplace(key, std::move(set));
          return;
        }
        const std::uint64_t spilled = arena.entries_written();
        it->second = merge(std::move(it->second), std::move(set), arena);
        ctx.add_work(1, phase);
        ctx.add_overhead(arena.entries_written() - spilled, phase);
      };

      if (step == 0) {
        for (const auto& t : tasks[me]) {
          if (t.num_addrs() == 0) continue;
          const Address a = t.addrs()[0];
          absorb({forest.leaf(owner_of(a), me).bfs_index, a}, MetaTaskSet::wrap(t, chunk_size));
        }
      } else {
        // Self-forwarded sets first, then the canonical inbox.
        for (auto& [key, set] : carried[me]) absorb(key, std::move(set));
        carried[me].clear();
        for (const auto& msg : ctx.inbox()) {
          ByteReader r(msg.payload);
          while (!r.done()) {
            const auto bfs = static_cast<std::uint32_t>(r.uv());
            const Address a = r.uv();
            absorb({bfs, a}, MetaTaskSet::deserialize(r));
          }
        }
      }

      if (step == h) {
        for (auto& [key, set] : mine) res.owner_sets[me].emplace(key.second, std::move(set));
        mine.clear();
        return;
      }
      for (auto& [key, set] : mine) {
        const TreeNodeId parent = *forest.parent_route(TreeNodeId{owner_of(key.second), key.first});
        const MachineId host = forest.host_of(parent);
        if (host == me) {
          carried[me].emplace_back(Key{parent.bfs_index, key.second}, std::move(set));
          continue;
        }
        auto& w = ctx.envelope(host, phase);
        const std::size_t before = w.size();
        w.uv(parent.bfs_index);
        w.uv(key.second);
        set.serialize(w);
        ctx.add_overhead((w.size() - before + bsp::kWordSize - 1) / bsp::kWordSize, phase);
      }
      mine.clear();
    });
  }

  return res;
}

namespace {

struct Phases {
  bsp::PhaseId down;
  bsp::PhaseId pull;
  bsp::PhaseId exec;
  bsp::PhaseId up;
  bsp::PhaseId direct;
  bsp::PhaseId output;
};

// One vertex of a subset tree as seen by the machine hosting it.
struct Node {
  Address addr = 0;
  Value value;
  bool root = false;
  MachineId parent = 0;
  std::uint32_t parent_token = 0;
  std::uint32_t children_pending = 0;
  std::uint32_t waiting = 0;
  bool reported = false;
  std::vector<std::pair<TaskId, Value>> local_updates;
  std::vector<std::pair<MachineId, Value>> child_partials;
};

struct Blocked {
  std::uint32_t node;
  TaskContext task;
};

struct Site {
  std::vector<Node> nodes;
  std::vector<std::uint32_t> dirty;
  std::unordered_map<Address, Value> pulled;
  std::unordered_set<Address> requested;
  std::unordered_map<Address, std::vector<Blocked>> blocked;
  std::map<Address, Value> secondary_out;
};

class TdOrchStage {
 public:
  TdOrchStage(bsp::Cluster& cluster, const TaskBatch& tasks, const OrchestrationSpec& spec,
              ContentionResult& s1, detail::StageBook& book)
      : cluster_(cluster), tasks_(tasks), spec_(spec), s1_(s1), book_(book),
        sites_(cluster.num_machines()) {
    phases_.down = cluster.phase("colocation");
    phases_.pull = cluster.phase("colocation_pull");
    phases_.exec = cluster.phase("execution");
    phases_.up = cluster.phase("writeback");
    phases_.direct = cluster.phase("writeback_direct");
    phases_.output = cluster.phase("output_return");
  }

  void run() {
    bool first = true;
    do {
      cluster_.run_superstep([&](bsp::StepContext& ctx) { step(ctx, first); });
      first = false;
    } while (cluster_.has_pending());
    for (const auto& site : sites_) {
      for (const auto& node : site.nodes) {
        if (!node.reported) throw std::logic_error("subset tree did not drain");
      }
    }
  }

 private:
  MachineId owner(Address a) const { return detail::checked_owner(spec_, a, cluster_.num_machines()); }

  void step(bsp::StepContext& ctx, bool first) {
    const MachineId me = ctx.id();
    Site& site = sites_[me];
    if (first) {
      for (const auto& t : tasks_[me]) {
        if (t.num_addrs() != 0) continue;
        const TaskOutcome out = book_.execute(ctx, t, {}, phases_.exec);
        book_.deliver_output(ctx, t, out, phases_.output);
      }
      for (auto& [addr, set] : s1_.owner_sets[me]) {
        const std::uint32_t idx = new_node(site, addr, spec_.get(ctx.state(), addr));
        site.nodes[idx].root = true;
        std::vector<const MetaTask*> entries;
        for (const auto& level : set.levels()) {
          for (const auto& mt : level) entries.push_back(&mt);
        }
        start_node(ctx, idx, entries);
      }
    }

    for (const auto& msg : ctx.inbox()) {
      ByteReader r(msg.payload);
      if (msg.phase == phases_.down) {
        while (!r.done()) {
          const Address addr = r.u64();
          const Value value = r.value();
          const std::uint32_t parent_token = r.u32();
          const std::uint32_t nh = r.u32();
          const std::uint32_t idx = new_node(site, addr, value);
          site.nodes[idx].parent = msg.src;
          site.nodes[idx].parent_token = parent_token;
          std::vector<const MetaTask*> entries;
          for (std::uint32_t i = 0; i < nh; ++i) {
            for (const auto& mt : ctx.state().spill_arena.at(r.u32())) entries.push_back(&mt);
          }
          start_node(ctx, idx, entries);
        }
      } else if (msg.phase == phases_.pull) {
        // Requests carry a zero tag byte; replies a one.
        while (!r.done()) {
          const std::uint8_t tag = r.u8();
          const Address addr = r.u64();
          if (tag == 0) {
            auto& w = ctx.envelope(msg.src, phases_.pull);
            w.u8(1);
            w.u64(addr);
            w.value(spec_.get(ctx.state(), addr));
          } else {
            site.pulled[addr] = r.value();
            auto waiting = std::move(site.blocked[addr]);
            site.blocked.erase(addr);
            for (auto& b : waiting) {
              site.nodes[b.node].waiting -= 1;
              run_or_block(ctx, b.node, b.task);
              site.dirty.push_back(b.node);
            }
          }
        }
      } else if (msg.phase == phases_.up) {
        while (!r.done()) {
          const std::uint32_t token = r.u32();
          Node& node = site.nodes.at(token);
          node.child_partials.emplace_back(msg.src, r.value());
          node.children_pending -= 1;
          site.dirty.push_back(token);
        }
      } else if (msg.phase == phases_.direct) {
        while (!r.done()) {
          const Address addr = r.u64();
          book_.add_contribution(me, addr, 1, msg.src, r.value());
        }
      } else if (msg.phase == phases_.output) {
        book_.receive_outputs(ctx, msg);
      } else {
        throw std::logic_error("unexpected message phase in TD-Orch stage");
      }
    }

    std::sort(site.dirty.begin(), site.dirty.end());
    site.dirty.erase(std::unique(site.dirty.begin(), site.dirty.end()), site.dirty.end());
    for (auto idx : site.dirty) try_report(ctx, idx);
    site.dirty.clear();

    for (const auto& [addr, v] : site.secondary_out) {
      const MachineId o = owner(addr);
      if (o == me) {
        book_.add_contribution(me, addr, 1, me, v);
        continue;
      }
      auto& w = ctx.envelope(o, phases_.direct);
      w.u64(addr);
      w.value(v);
    }
    site.secondary_out.clear();
  }

  std::uint32_t new_node(Site& site, Address addr, const Value& value) {
    Node n;
    n.addr = addr;
    n.value = value;
    site.nodes.push_back(std::move(n));
    return static_cast<std::uint32_t>(site.nodes.size() - 1);
  }

  // Expands locally stored groups in place, forwards the value once per remote
  // machine holding child groups, and runs every co-located task.
  void start_node(bsp::StepContext& ctx, std::uint32_t idx, std::vector<const MetaTask*> stack) {
    const MachineId me = ctx.id();
    Site& site = sites_[me];
    const auto& arena = ctx.state().spill_arena;
    std::vector<TaskContext> local;
    std::map<MachineId, std::vector<std::uint32_t>> remote;
    while (!stack.empty()) {
      const MetaTask* mt = stack.back();
      stack.pop_back();
      if (mt->is_leaf()) {
        local.push_back(mt->task());
        continue;
      }
      const RemoteRef& ref = mt->remote();
      if (ref.machine == me) {
        for (const auto& child : expand_children(*mt, arena)) stack.push_back(&child);
      } else {
        remote[ref.machine].push_back(ref.handle);
      }
    }

    Node& node = site.nodes[idx];
    node.children_pending = static_cast<std::uint32_t>(remote.size());
    for (auto& [m, handles] : remote) {
      std::sort(handles.begin(), handles.end());
      auto& w = ctx.envelope(m, phases_.down);
      const std::size_t before = w.size();
      w.u64(node.addr);
      w.value(node.value);
      w.u32(idx);
      w.u32(static_cast<std::uint32_t>(handles.size()));
      for (auto h : handles) w.u32(h);
      ctx.add_overhead((w.size() - before + bsp::kWordSize - 1) / bsp::kWordSize, phases_.down);
    }

    detail::sort_canonical(local);
    for (const auto& t : local) run_or_block(ctx, idx, t);
    site.dirty.push_back(idx);
  }

  void run_or_block(bsp::StepContext& ctx, std::uint32_t idx, const TaskContext& task) {
    const MachineId me = ctx.id();
    Site& site = sites_[me];
    std::array<Value, kMaxAddresses> data{};
    const auto addrs = task.addrs();
    data[0] = site.nodes[idx].value;
    for (std::size_t i = 1; i < addrs.size(); ++i) {
      const Address a = addrs[i];
      const MachineId o = owner(a);
      if (o == me) {
        data[i] = spec_.get(ctx.state(), a);
        continue;
      }
      const auto it = site.pulled.find(a);
      if (it != site.pulled.end()) {
        data[i] = it->second;
        continue;
      }
      if (site.requested.insert(a).second) {
        auto& w = ctx.envelope(o, phases_.pull);
        w.u8(0);
        w.u64(a);
      }
      site.blocked[a].push_back(Blocked{idx, task});
      site.nodes[idx].waiting += 1;
      return;
    }

    const TaskOutcome out =
        book_.execute(ctx, task, std::span<const Value>(data.data(), addrs.size()), phases_.exec);
    site.nodes[idx].local_updates.emplace_back(task.id(), out.updates[0]);
    for (std::size_t i = 1; i < addrs.size(); ++i) {
      if (spec_.merge_value.is_identity(out.updates[i])) continue;
      auto [it, inserted] = site.secondary_out.try_emplace(addrs[i], spec_.merge_value.identity);
      it->second = spec_.merge_value.combine(it->second, out.updates[i]);
    }
    book_.deliver_output(ctx, task, out, phases_.output);
  }

  void try_report(bsp::StepContext& ctx, std::uint32_t idx) {
    const MachineId me = ctx.id();
    Node& node = sites_[me].nodes[idx];
    if (node.reported || node.waiting > 0 || node.children_pending > 0) return;
    node.reported = true;
    std::sort(node.local_updates.begin(), node.local_updates.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::stable_sort(node.child_partials.begin(), node.child_partials.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    const auto& op = spec_.merge_value;
    Value agg = op.identity;
    for (const auto& [id, v] : node.local_updates) agg = op.combine(agg, v);
    for (const auto& [m, v] : node.child_partials) agg = op.combine(agg, v);
    if (node.root) {
      book_.add_contribution(me, node.addr, 0, me, agg);
      return;
    }
    auto& w = ctx.envelope(node.parent, phases_.up);
    w.u32(node.parent_token);
    w.value(agg);
  }

  bsp::Cluster& cluster_;
  const TaskBatch& tasks_;
  const OrchestrationSpec& spec_;
  ContentionResult& s1_;
  detail::StageBook& book_;
  std::vector<Site> sites_;
  Phases phases_{};
};

}  // namespace

StageResult orchestrate(bsp::Cluster& cluster, const TaskBatch& tasks, const OrchestrationSpec& spec) {
  validate_batch(cluster, tasks);
  const std::uint32_t p = cluster.num_machines();
  std::uint64_t n = 0;
  for (const auto& l : tasks) n += l.size();
  const std::uint32_t fanout = spec.fanout != 0 ? spec.fanout : default_fanout(std::max<std::uint64_t>(n, 1), p);

  detail::StageBook book(cluster, tasks, spec);
  ContentionResult s1 = substage1_contention_detection(cluster, tasks, spec.owner, spec.chunk_size, fanout);
  std::uint32_t depth = 0;
  for (const auto& sets : s1.owner_sets) {
    for (const auto& [addr, set] : sets) depth = std::max(depth, set.top_level());
  }

  TdOrchStage stage(cluster, tasks, spec, s1, book);
  stage.run();
  book.commit();
  cluster.clear_arenas();

  StageResult r = book.finish();
  r.fanout = fanout;
  r.forest_height = s1.height;
  r.routing_supersteps = s1.height;
  r.max_subset_depth = depth;
  return r;
}

}  // namespace tdorch
