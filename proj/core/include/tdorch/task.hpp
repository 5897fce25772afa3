#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

#include "tdorch/value.hpp"
#include "tdorch/wire.hpp"

namespace tdorch {

// Upper bound on the number of data chunks one task may touch.
inline constexpr std::size_t kMaxAddresses = 2;

// Globally unique task identity: (origin machine, index in the origin's batch).
using TaskId = std::uint64_t;

constexpr TaskId make_task_id(MachineId origin, std::uint32_t local_index) {
  return (static_cast<std::uint64_t>(origin) << 32) | local_index;
}

// One unit of work with its target data addresses and opaque payload.
class TaskContext {
 public:
  TaskContext() = default;
  // Duplicate addresses are dropped (first occurrence kept). Throws
  // std::invalid_argument when more than kMaxAddresses distinct addresses remain.
  TaskContext(std::span<const Address> addrs, Bytes payload, MachineId origin,
              std::uint32_t local_index);
  TaskContext(std::initializer_list<Address> addrs, Bytes payload, MachineId origin,
              std::uint32_t local_index)
      : TaskContext(std::span<const Address>(addrs.begin(), addrs.size()), std::move(payload),
                    origin, local_index) {}

  std::span<const Address> addrs() const { return {addrs_.data(), num_addrs_}; }
  std::size_t num_addrs() const { return num_addrs_; }
  const Bytes& payload() const { return payload_; }
  MachineId origin() const { return origin_; }
  std::uint32_t local_index() const { return local_index_; }
  TaskId id() const { return make_task_id(origin_, local_index_); }

  void encode(ByteWriter& w) const;
  static TaskContext decode(ByteReader& r);

  friend bool operator==(const TaskContext& a, const TaskContext& b) {
    return a.num_addrs_ == b.num_addrs_ &&
           std::equal(a.addrs_.begin(), a.addrs_.begin() + a.num_addrs_, b.addrs_.begin()) &&
           a.payload_ == b.payload_ && a.origin_ == b.origin_ && a.local_index_ == b.local_index_;
  }

 private:
  std::array<Address, kMaxAddresses> addrs_{};
  std::uint8_t num_addrs_ = 0;
  Bytes payload_;
  MachineId origin_ = 0;
  std::uint32_t local_index_ = 0;
};

// Two-word payload helpers used by the built-in workloads.
Bytes pack_words(std::int64_t a, std::int64_t b);
std::pair<std::int64_t, std::int64_t> unpack_words(const Bytes& payload);

}  // namespace tdorch
