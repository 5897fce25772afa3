#pragma once

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tdorch/value.hpp"

namespace tdorch {

// A write operation `apply` (x ⊕ y) that factors as finalize(x, combine(y1, ..., yn)),
// i.e. x ⊕ y1 ⊕ ... ⊕ yn == x ⊙ (y1 ⊗ ... ⊗ yn). `combine` must be associative;
// when it is not commutative, callers fold operands in canonical order.
struct MergeableOp {
  std::string name;
  std::function<Value(const Value& data, const Value& y)> apply;
  std::function<Value(const Value& a, const Value& b)> combine;
  std::function<Value(const Value& data, const Value& aggregate)> finalize;
  Value identity;
  bool commutative = true;

  bool valid() const { return static_cast<bool>(combine) && static_cast<bool>(finalize); }
  bool is_identity(const Value& v) const { return v == identity; }

  Value fold(std::span<const Value> ys) const;
  // x ⊕ y1 ⊕ ... ⊕ yn, left to right.
  Value apply_all(Value x, std::span<const Value> ys) const;
};

namespace ops {

// Wrapping integer sum on the first word.
MergeableOp add();
// Sum of doubles stored in the first word.
MergeableOp add_f64();
MergeableOp max();
MergeableOp min();
MergeableOp min_f64();
// Concurrent writes where one pseudo-randomly chosen write wins. Operands are
// (value, priority); the data word pair is (value, priority of the winning
// write). Priorities come from random_select_priority so the pick is fixed by
// the seed, not by arrival order.
MergeableOp random_select_write();
// Concurrent writes resolved by smallest key: operands and data are (key, value).
MergeableOp min_key_write();
// Affine maps x -> x*mul + add as (mul, add); combine composes left then right.
// Not commutative.
MergeableOp affine_compose();

}  // namespace ops

// ADD, MAX, MIN, RANDOM_SELECT_WRITE, MIN_KEY_WRITE.
std::vector<MergeableOp> builtin_ops();

std::int64_t random_select_priority(std::uint64_t seed, std::uint64_t task_id);

// Fresh data cell for a write-family op (no write has landed yet).
inline constexpr Value kUnwrittenSelect{0, std::numeric_limits<std::int64_t>::min()};
inline constexpr Value kUnwrittenMinKey{std::numeric_limits<std::int64_t>::max(), 0};

}  // namespace tdorch
