#include "tdorch/mergeable.hpp"

#include <algorithm>

namespace tdorch {

Value MergeableOp::fold(std::span<const Value> ys) const {
  Value acc = identity;
  for (const auto& y : ys) acc = combine(acc, y);
  return acc;
}

Value MergeableOp::apply_all(Value x, std::span<const Value> ys) const {
  for (const auto& y : ys) x = apply(x, y);
  return x;
}

namespace ops {

namespace {

constexpr std::int64_t kMin = std::numeric_limits<std::int64_t>::min();
constexpr std::int64_t kMax = std::numeric_limits<std::int64_t>::max();

// Higher priority wins; ties go to the larger value so the result is a pure
// function of the operand multiset.
Value select_better(const Value& a, const Value& b) {
  if (a.second != b.second) return a.second > b.second ? a : b;
  return a.first >= b.first ? a : b;
}

Value smaller_key(const Value& a, const Value& b) {
  if (a.first != b.first) return a.first < b.first ? a : b;
  return a.second <= b.second ? a : b;
}

}  // namespace

MergeableOp add() {
  auto sum = [](const Value& a, const Value& b) { return Value{wrap_add(a.first, b.first), a.second}; };
  return MergeableOp{"ADD", sum,
                     [](const Value& a, const Value& b) { return Value{wrap_add(a.first, b.first), 0}; },
                     sum, Value{0, 0}, true};
}

MergeableOp add_f64() {
  auto sum = [](const Value& a, const Value& b) {
    return Value{Value::of_double(a.as_double() + b.as_double()).first, a.second};
  };
  return MergeableOp{"ADD_F64", sum,
                     [](const Value& a, const Value& b) { return Value::of_double(a.as_double() + b.as_double()); },
                     sum, Value::of_double(0.0), true};
}

MergeableOp max() {
  auto f = [](const Value& a, const Value& b) { return Value{std::max(a.first, b.first), a.second}; };
  return MergeableOp{"MAX", f,
                     [](const Value& a, const Value& b) { return Value{std::max(a.first, b.first), 0}; },
                     f, Value{kMin, 0}, true};
}

MergeableOp min() {
  auto f = [](const Value& a, const Value& b) { return Value{std::min(a.first, b.first), a.second}; };
  return MergeableOp{"MIN", f,
                     [](const Value& a, const Value& b) { return Value{std::min(a.first, b.first), 0}; },
                     f, Value{kMax, 0}, true};
}

MergeableOp min_f64() {
  auto pick = [](const Value& a, const Value& b) {
    return Value::of_double(std::min(a.as_double(), b.as_double()));
  };
  auto f = [pick](const Value& a, const Value& b) { return Value{pick(a, b).first, a.second}; };
  return MergeableOp{"MIN_F64", f, pick, f,
                     Value::of_double(std::numeric_limits<double>::infinity()), true};
}

MergeableOp random_select_write() {
  return MergeableOp{"RANDOM_SELECT_WRITE", select_better, select_better, select_better,
                     kUnwrittenSelect, true};
}

MergeableOp min_key_write() {
  return MergeableOp{"MIN_KEY_WRITE", smaller_key, smaller_key, smaller_key, kUnwrittenMinKey, true};
}

MergeableOp affine_compose() {
  auto compose = [](const Value& a, const Value& b) {
    return Value{wrap_mul(a.first, b.first), wrap_add(wrap_mul(a.second, b.first), b.second)};
  };
  auto apply = [](const Value& x, const Value& y) {
    return Value{wrap_add(wrap_mul(x.first, y.first), y.second), x.second};
  };
  return MergeableOp{"AFFINE", apply, compose, apply, Value{1, 0}, false};
}

}  // namespace ops

std::vector<MergeableOp> builtin_ops() {
  return {ops::add(), ops::max(), ops::min(), ops::random_select_write(), ops::min_key_write()};
}

std::int64_t random_select_priority(std::uint64_t seed, std::uint64_t task_id) {
  // Never equal to the unwritten marker.
  const auto p = static_cast<std::int64_t>(hash_combine(seed, task_id));
  return p == kUnwrittenSelect.second ? p + 1 : p;
}

}  // namespace tdorch
