#pragma once

// Bookkeeping shared by every strategy: task execution with exactly-once
// accounting, output delivery to origins, and the owner-side commit.

#include <algorithm>
#include <stdexcept>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "tdorch/orchestrator.hpp"

namespace tdorch::detail {

struct OwnerContribution {
  // (kind, source machine, sequence): kind 0 is a reduction-tree aggregate,
  // kind 1 a direct partial. Sorted before folding.
  std::tuple<std::uint32_t, std::uint32_t, std::uint64_t> order;
  Value value;
};

class StageBook {
 public:
  StageBook(bsp::Cluster& cluster, const TaskBatch& tasks, const OrchestrationSpec& spec)
      : cluster_(cluster), spec_(spec), before_(cluster.counters()) {
    const auto p = cluster.num_machines();
    outputs_.resize(p);
    for (MachineId m = 0; m < p; ++m) outputs_[m].resize(tasks[m].size());
    executions_.assign(p, 0);
    contributions_.resize(p);
    sequence_.assign(p, 0);
    for (const auto& pc : cluster.phase_counters()) phase_before_.push_back(pc);
    for (const auto& list : tasks) {
      for (const auto& t : list) {
        for (Address a : t.addrs()) {
          if (spec.owner(a) >= p) {
            throw std::out_of_range("address " + std::to_string(a) + " is outside the data partition");
          }
        }
      }
    }
  }

  // Runs f once, charging one unit of work.
  TaskOutcome execute(bsp::StepContext& ctx, const TaskContext& task, std::span<const Value> data,
                      bsp::PhaseId phase) {
    ctx.add_work(1, phase);
    executions_[ctx.id()] += 1;
    try {
      return spec_.f(task, data);
    } catch (const std::exception& e) {
      throw std::runtime_error("task " + std::to_string(task.origin()) + ":" +
                               std::to_string(task.local_index()) + " failed: " + e.what());
    }
  }

  // Output record: u32 local_index | value.
  void deliver_output(bsp::StepContext& ctx, const TaskContext& task, const TaskOutcome& out,
                      bsp::PhaseId phase) {
    if (!out.output) return;
    if (task.origin() == ctx.id()) {
      outputs_[ctx.id()][task.local_index()] = *out.output;
      return;
    }
    auto& w = ctx.envelope(task.origin(), phase);
    w.uv(task.local_index());
    w.value(*out.output);
  }

  void receive_outputs(bsp::StepContext& ctx, const bsp::Message& msg) {
    ByteReader r(msg.payload);
    while (!r.done()) {
      const std::uint64_t idx = r.uv();
      outputs_[ctx.id()].at(idx) = r.value();
    }
  }

  // Records a contribution for an address owned by `owner`. Must be called
  // from the owner's own step.
  void add_contribution(MachineId owner, Address addr, std::uint32_t kind, std::uint32_t src,
                        const Value& v) {
    contributions_[owner][addr].push_back(OwnerContribution{{kind, src, sequence_[owner]++}, v});
  }

  // Owners fold everything they received for each address in canonical order
  // and apply wb once.
  void commit() {
    cluster_.run_local([&](bsp::StepContext& ctx) {
      auto& mine = contributions_[ctx.id()];
      for (auto& [addr, list] : mine) {
        std::sort(list.begin(), list.end(),
                  [](const auto& a, const auto& b) { return a.order < b.order; });
        Value agg = spec_.merge_value.identity;
        for (const auto& c : list) agg = spec_.merge_value.combine(agg, c.value);
        if (spec_.merge_value.is_identity(agg)) continue;
        spec_.wb(ctx.state(), addr, agg);
      }
      mine.clear();
    });
  }

  StageResult finish() {
    StageResult r;
    r.outputs = std::move(outputs_);
    r.counters = cluster_.counters() - before_;
    r.supersteps = r.counters.supersteps;
    for (auto e : executions_) r.executions += e;
    const auto& names = cluster_.phase_names();
    const auto& now = cluster_.phase_counters();
    for (std::size_t i = 0; i < names.size(); ++i) {
      bsp::CostCounters d = i < phase_before_.size() ? now[i] - phase_before_[i] : now[i];
      if (d.total_sent() == 0 && d.total_comp() == 0 && d.total_overhead() == 0) continue;
      r.breakdown[names[i]] = d;
    }
    return r;
  }

  std::vector<std::vector<std::optional<Value>>>& outputs() { return outputs_; }

 private:
  bsp::Cluster& cluster_;
  const OrchestrationSpec& spec_;
  bsp::CostCounters before_;
  std::vector<bsp::CostCounters> phase_before_;
  std::vector<std::vector<std::optional<Value>>> outputs_;
  std::vector<std::uint64_t> executions_;
  std::vector<std::map<Address, std::vector<OwnerContribution>>> contributions_;
  std::vector<std::uint64_t> sequence_;
};

inline MachineId checked_owner(const OrchestrationSpec& spec, Address addr, std::uint32_t p) {
  const MachineId o = spec.owner(addr);
  if (o >= p) {
    throw std::out_of_range("address " + std::to_string(addr) + " is outside the data partition");
  }
  return o;
}

// Canonical task order within one execution site.
inline void sort_canonical(std::vector<TaskContext>& tasks) {
  std::sort(tasks.begin(), tasks.end(),
            [](const TaskContext& a, const TaskContext& b) { return a.id() < b.id(); });
}

}  // namespace tdorch::detail
