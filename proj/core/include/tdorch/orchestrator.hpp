#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tdorch/bsp.hpp"
#include "tdorch/comm_forest.hpp"
#include "tdorch/mergeable.hpp"
#include "tdorch/meta_task.hpp"
#include "tdorch/task.hpp"

namespace tdorch {

// What executing one task produced. updates[i] is the write-back contribution
// for task.addrs()[i]; the op's identity means "no write".
struct TaskOutcome {
  std::array<Value, kMaxAddresses> updates{};
  std::optional<Value> output;
};

using ExecuteFn = std::function<TaskOutcome(const TaskContext& task, std::span<const Value> data)>;
using GetFn = std::function<Value(bsp::MachineState& machine, Address addr)>;
using WriteBackFn =
    std::function<void(bsp::MachineState& machine, Address addr, const Value& aggregate)>;
using OwnerFn = std::function<MachineId(Address addr)>;

// Batch of tasks: tasks[m] are the tasks starting on machine m, with
// origin() == m and local_index() == position.
using TaskBatch = std::vector<std::vector<TaskContext>>;

// The orchestration API: f, get, wb, merge_value plus the data partition.
// Construction rejects a spec without a merge-able combine.
struct OrchestrationSpec {
  OrchestrationSpec(ExecuteFn f, GetFn get, WriteBackFn wb, MergeableOp merge_value, OwnerFn owner);

  ExecuteFn f;
  GetFn get;
  WriteBackFn wb;
  MergeableOp merge_value;
  OwnerFn owner;
  std::uint32_t chunk_size = kDefaultChunkSize;
  // 0 selects default_fanout(n, P).
  std::uint32_t fanout = 0;
};

// get/wb over MachineState::local_data. Missing cells read as `fresh`.
GetFn shard_get(Value fresh = Value{});
WriteBackFn shard_write_back(MergeableOp op, Value fresh = Value{});

struct StageResult {
  // outputs[origin][local_index]
  std::vector<std::vector<std::optional<Value>>> outputs;
  bsp::CostCounters counters;
  // Per phase name, counters accumulated during this stage.
  std::map<std::string, bsp::CostCounters> breakdown;
  std::uint64_t supersteps = 0;
  std::uint64_t executions = 0;
  // TD-Orch only.
  std::uint32_t fanout = 0;
  std::uint32_t forest_height = 0;
  std::uint32_t routing_supersteps = 0;
  std::uint32_t max_subset_depth = 0;
};

// Substage 1 result: for every owner, one merged set per requested address.
struct ContentionResult {
  std::vector<std::map<Address, MetaTaskSet>> owner_sets;
  std::uint32_t fanout = 0;
  std::uint32_t height = 0;
  std::uint32_t supersteps = 0;
};

// Sends every task (keyed by its first address) up the tree rooted at the
// address owner, merging sets with equal (node, address) at each hop. Spilled
// groups stay in the spill arenas of the machines that merged them. Tasks
// without addresses are ignored.
ContentionResult substage1_contention_detection(bsp::Cluster& cluster, const TaskBatch& tasks,
                                                const OwnerFn& owner, std::uint32_t chunk_size,
                                                std::uint32_t fanout);

// Runs one TD-Orch stage: contention detection, co-location down the subset
// trees, local execution, and write-backs up the subset trees.
StageResult orchestrate(bsp::Cluster& cluster, const TaskBatch& tasks, const OrchestrationSpec& spec);

// Throws std::invalid_argument when the batch shape does not match the cluster
// or a task's origin/index disagree with its position.
void validate_batch(const bsp::Cluster& cluster, const TaskBatch& tasks);

}  // namespace tdorch
