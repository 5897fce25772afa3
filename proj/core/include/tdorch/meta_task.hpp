#pragma once

#include <cstdint>
#include <stdexcept>
#include <variant>
#include <vector>

#include "tdorch/task.hpp"
#include "tdorch/value.hpp"
#include "tdorch/wire.hpp"

namespace tdorch {

inline constexpr std::uint32_t kDefaultChunkSize = 8;

// Pointer to a spilled group of level-(l-1) meta-tasks living on `machine`.
struct RemoteRef {
  MachineId machine = 0;
  std::uint32_t handle = 0;
  std::uint64_t child_count = 0;  // L0 descendants beneath this reference

  friend bool operator==(const RemoteRef&, const RemoteRef&) = default;
};

// Level 0 carries a task context; level l >= 1 references a spill slot that
// holds only level-(l-1) meta-tasks.
struct MetaTask {
  std::uint32_t level = 0;
  std::variant<TaskContext, RemoteRef> content;

  static MetaTask leaf(TaskContext t) { return MetaTask{0, std::move(t)}; }
  static MetaTask ref(std::uint32_t level, RemoteRef r) { return MetaTask{level, r}; }

  bool is_leaf() const { return level == 0; }
  const TaskContext& task() const { return std::get<TaskContext>(content); }
  const RemoteRef& remote() const { return std::get<RemoteRef>(content); }
  std::uint64_t l0_count() const { return is_leaf() ? 1 : remote().child_count; }
};

class DanglingHandleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Machine-local storage for spilled meta-task groups. Slots are immutable once
// written and released together by clear() at stage end.
class SpillArena {
 public:
  explicit SpillArena(MachineId owner = 0) : owner_(owner) {}

  MachineId owner() const { return owner_; }
  std::uint32_t store(std::vector<MetaTask> group);
  const std::vector<MetaTask>& at(std::uint32_t handle) const;
  bool contains(std::uint32_t handle) const { return handle < slots_.size(); }
  std::size_t size() const { return slots_.size(); }
  // Total meta-task entries ever written; the spill part of the overhead counter.
  std::uint64_t entries_written() const { return entries_written_; }
  void clear() { slots_.clear(); }

 private:
  MachineId owner_;
  std::vector<std::vector<MetaTask>> slots_;
  std::uint64_t entries_written_ = 0;
};

// Leveled container with at most C meta-tasks per level.
class MetaTaskSet {
 public:
  explicit MetaTaskSet(std::uint32_t chunk_size = kDefaultChunkSize);

  static MetaTaskSet wrap(TaskContext t, std::uint32_t chunk_size = kDefaultChunkSize);

  std::uint32_t chunk_size() const { return chunk_size_; }
  std::uint64_t l0_total() const { return l0_total_; }
  const std::vector<std::vector<MetaTask>>& levels() const { return levels_; }
  std::size_t entry_count() const;
  bool empty() const { return l0_total_ == 0; }
  // Highest populated level, or 0 for an empty set.
  std::uint32_t top_level() const;

  // Combines both inputs, then cascades from the lowest level up: any level
  // holding more than C entries is spilled wholesale into `arena` and replaced
  // by a single reference one level higher. Throws std::invalid_argument on a
  // chunk-size mismatch.
  friend MetaTaskSet merge(MetaTaskSet a, MetaTaskSet b, SpillArena& arena);

  void serialize(ByteWriter& w) const;
  static MetaTaskSet deserialize(ByteReader& r);

 private:
  std::uint32_t chunk_size_;
  std::uint64_t l0_total_ = 0;
  std::vector<std::vector<MetaTask>> levels_;
};

MetaTaskSet merge(MetaTaskSet a, MetaTaskSet b, SpillArena& arena);

// Returns the level-(l-1) meta-tasks stored behind a level-l reference.
// `arena` must belong to the referenced machine.
const std::vector<MetaTask>& expand_children(const MetaTask& mt, const SpillArena& arena);

}  // namespace tdorch
