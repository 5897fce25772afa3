#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "tdorch/meta_task.hpp"
#include "tdorch/value.hpp"
#include "tdorch/wire.hpp"

namespace tdorch::bsp {

inline constexpr std::size_t kWordSize = 8;
inline constexpr std::uint32_t kMaxMachines = 1u << 16;

// Phases label traffic and work for the per-substage breakdown.
using PhaseId = std::uint8_t;

struct ClusterConfig {
  std::uint32_t num_machines = 1;
  std::uint64_t seed = 0;
  // Worker threads used to run machines within a superstep. Results do not
  // depend on this value.
  std::uint32_t threads = 1;

  void validate() const;
};

struct Message {
  MachineId src = 0;
  MachineId dst = 0;
  std::uint64_t superstep = 0;
  std::uint32_t seq = 0;
  PhaseId phase = 0;
  Bytes payload;

  // Payload length rounded up to whole words.
  std::uint64_t words() const { return (payload.size() + kWordSize - 1) / kWordSize; }
};

struct CostCounters {
  std::vector<std::uint64_t> words_sent;
  std::vector<std::uint64_t> words_received;
  std::vector<std::uint64_t> comp_work;
  // Serialization words plus spill-arena entries written.
  std::vector<std::uint64_t> overhead;
  std::uint64_t messages = 0;  // cross-machine messages only
  std::uint64_t supersteps = 0;

  CostCounters() = default;
  explicit CostCounters(std::size_t machines)
      : words_sent(machines), words_received(machines), comp_work(machines), overhead(machines) {}

  std::size_t num_machines() const { return words_sent.size(); }
  std::uint64_t total_sent() const;
  std::uint64_t total_received() const;
  std::uint64_t total_comp() const;
  std::uint64_t total_overhead() const;
  // max over machines of sent + received
  std::uint64_t max_words() const;

  CostCounters& operator+=(const CostCounters& o);
  friend CostCounters operator-(const CostCounters& a, const CostCounters& b);
  friend bool operator==(const CostCounters&, const CostCounters&) = default;
};

enum class Metric { kSent, kReceived, kComp, kTotalWords };

// max / mean over machines; 1.0 when the metric is zero everywhere.
double load_imbalance(std::span<const std::uint64_t> per_machine);
double load_imbalance(const CostCounters& c, Metric metric);
std::vector<std::uint64_t> metric_values(const CostCounters& c, Metric metric);

struct MachineState {
  explicit MachineState(MachineId id, std::uint64_t seed)
      : id(id), spill_arena(id), rng(hash_combine(seed, id)) {}

  MachineId id;
  std::unordered_map<Address, Value> local_data;
  SpillArena spill_arena;
  std::mt19937_64 rng;
};

class RoutingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StageAborted : public std::runtime_error {
 public:
  StageAborted(MachineId machine, const std::string& what)
      : std::runtime_error("machine " + std::to_string(machine) + ": " + what), machine_(machine) {}
  MachineId machine() const { return machine_; }

 private:
  MachineId machine_;
};

class Cluster;

// Everything a machine may touch during one superstep.
class StepContext {
 public:
  MachineId id() const { return state_->id; }
  std::uint32_t num_machines() const { return num_machines_; }
  std::uint64_t superstep() const { return superstep_; }
  MachineState& state() { return *state_; }
  std::span<const Message> inbox() const { return inbox_; }

  // One batched envelope per (dst, phase), flushed as a single message at the
  // barrier if non-empty.
  ByteWriter& envelope(MachineId dst, PhaseId phase = 0);
  void send(MachineId dst, Bytes payload, PhaseId phase = 0);
  void add_work(std::uint64_t units, PhaseId phase = 0);
  void add_overhead(std::uint64_t units, PhaseId phase = 0);

 private:
  friend class Cluster;
  struct Staged {
    std::vector<Message> raw;
    std::vector<std::pair<PhaseId, std::uint64_t>> work;
    std::vector<std::pair<PhaseId, std::uint64_t>> overhead;
  };

  MachineState* state_ = nullptr;
  std::uint32_t num_machines_ = 0;
  std::uint64_t superstep_ = 0;
  std::span<const Message> inbox_;
  bool allow_send_ = true;
  Staged staged_;
  std::map<std::pair<PhaseId, MachineId>, ByteWriter> writers_;
};

class Cluster {
 public:
  using StepFn = std::function<void(StepContext&)>;

  explicit Cluster(ClusterConfig cfg);

  std::uint32_t num_machines() const { return cfg_.num_machines; }
  const ClusterConfig& config() const { return cfg_; }
  MachineState& machine(MachineId id) { return machines_.at(id); }
  const MachineState& machine(MachineId id) const { return machines_.at(id); }

  // Returns the id for `name`, registering it on first use. Phase 0 is "default".
  PhaseId phase(const std::string& name);
  const std::vector<std::string>& phase_names() const { return phase_names_; }

  // Runs step_fn once per machine on its canonical inbox, then delivers all
  // emitted messages at the barrier. Returns the counter delta.
  CostCounters run_superstep(const StepFn& step_fn);
  // Local computation with no barrier and no messaging; charged to the
  // current superstep.
  void run_local(const StepFn& fn);

  bool has_pending() const;
  std::uint64_t superstep() const { return counters_.supersteps; }

  const CostCounters& counters() const { return counters_; }
  // Per phase; `supersteps` counts the rounds in which the phase sent
  // cross-machine traffic.
  const std::vector<CostCounters>& phase_counters() const { return phase_counters_; }
  void reset_counters();
  // Drops all spill arenas (end of stage).
  void clear_arenas();

 private:
  void run_machines(std::vector<StepContext>& ctxs, const StepFn& fn);
  void charge(std::vector<StepContext>& ctxs, CostCounters& delta);

  ClusterConfig cfg_;
  std::vector<MachineState> machines_;
  std::vector<std::vector<Message>> pending_;
  CostCounters counters_;
  std::vector<CostCounters> phase_counters_;
  std::vector<std::string> phase_names_;
};

}  // namespace tdorch::bsp
