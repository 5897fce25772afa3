#include "tdorch/task.hpp"

#include <algorithm>
#include <string>

namespace tdorch {

TaskContext::TaskContext(std::span<const Address> addrs, Bytes payload, MachineId origin,
                         std::uint32_t local_index)
    : payload_(std::move(payload)), origin_(origin), local_index_(local_index) {
  for (Address a : addrs) {
    const auto end = addrs_.begin() + num_addrs_;
    if (std::find(addrs_.begin(), end, a) != end) continue;
    if (num_addrs_ == kMaxAddresses) {
      throw std::invalid_argument("task touches more than " + std::to_string(kMaxAddresses) +
                                  " distinct addresses");
    }
    addrs_[num_addrs_++] = a;
  }
  if (payload_.size() > 0xffff) throw std::invalid_argument("task payload exceeds 65535 bytes");
}

void TaskContext::encode(ByteWriter& w) const {
  w.u8(num_addrs_);
  for (std::size_t i = 0; i < num_addrs_; ++i) w.uv(addrs_[i]);
  w.uv(origin_);
  w.uv(local_index_);
  w.uv(payload_.size());
  for (auto b : payload_) w.u8(b);
}

TaskContext TaskContext::decode(ByteReader& r) {
  TaskContext t;
  t.num_addrs_ = r.u8();
  if (t.num_addrs_ > kMaxAddresses) throw DecodeError("task address count out of range");
  for (std::size_t i = 0; i < t.num_addrs_; ++i) t.addrs_[i] = r.uv();
  t.origin_ = static_cast<MachineId>(r.uv());
  t.local_index_ = static_cast<std::uint32_t>(r.uv());
  const std::uint64_t n = r.uv();
  if (r.remaining() < n) throw DecodeError("truncated task payload");
  t.payload_.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) t.payload_[i] = r.u8();
  return t;
}

Bytes pack_words(std::int64_t a, std::int64_t b) {
  ByteWriter w;
  w.i64(a);
  w.i64(b);
  return w.take();
}

std::pair<std::int64_t, std::int64_t> unpack_words(const Bytes& payload) {
  ByteReader r(payload);
  const std::int64_t a = r.i64();
  const std::int64_t b = r.i64();
  return {a, b};
}

}  // namespace tdorch
