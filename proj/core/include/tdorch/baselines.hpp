#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "tdorch/orchestrator.hpp"

namespace tdorch {

enum class Strategy { kDirectPush, kDirectPull, kSorting, kTdOrch };

// Names: direct-push, direct-pull, sorting, td-orch.
std::optional<Strategy> parse_strategy(std::string_view name);
std::string to_string(Strategy s);

// Thrown by strategies that cannot run a workload (multi-address tasks under
// direct-push or sorting).
class UnsupportedWorkload : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Requests each distinct remote address once per machine, executes at the
// origin, and sends per-(machine, address) combined partials to the owners.
StageResult direct_pull(bsp::Cluster& cluster, const TaskBatch& tasks, const OrchestrationSpec& spec);

// Ships each task to the owner of its address and executes it there.
// Single-address tasks only.
StageResult direct_push(bsp::Cluster& cluster, const TaskBatch& tasks, const OrchestrationSpec& spec);

// Sample-sorts tasks by (address, task id), broadcasts each value from its
// owner over the contiguous machine range holding its tasks, combines the
// write-backs back along the same binomial trees, and returns outputs to the
// origins. Single-address tasks only.
StageResult sorting_based(bsp::Cluster& cluster, const TaskBatch& tasks, const OrchestrationSpec& spec);

StageResult run_strategy(Strategy s, bsp::Cluster& cluster, const TaskBatch& tasks,
                         const OrchestrationSpec& spec);

}  // namespace tdorch
