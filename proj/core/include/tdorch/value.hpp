#pragma once

#include <bit>
#include <cstdint>
#include <functional>

namespace tdorch {

using MachineId = std::uint32_t;
using Address = std::uint64_t;

// Fixed two-word datum. Every data chunk, partial write-back and task output
// in the framework is one Value; operations interpret the words as they need
// (integer, double bit pattern, (key, value), (mul, add), ...).
struct Value {
  std::int64_t first = 0;
  std::int64_t second = 0;

  static constexpr Value of(std::int64_t a, std::int64_t b = 0) { return Value{a, b}; }
  static Value of_double(double d) { return Value{std::bit_cast<std::int64_t>(d), 0}; }

  double as_double() const { return std::bit_cast<double>(first); }

  friend constexpr bool operator==(const Value&, const Value&) = default;
  friend constexpr auto operator<=>(const Value&, const Value&) = default;
};

// Wrapping two's-complement helpers; signed overflow is UB in C++.
constexpr std::int64_t wrap_add(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(b));
}
constexpr std::int64_t wrap_sub(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(b));
}
constexpr std::int64_t wrap_mul(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b));
}

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) {
  return mix64(seed ^ mix64(v));
}

}  // namespace tdorch
