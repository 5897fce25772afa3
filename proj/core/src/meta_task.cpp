#include "tdorch/meta_task.hpp"

#include <limits>
#include <string>

namespace tdorch {

std::uint32_t SpillArena::store(std::vector<MetaTask> group) {
  entries_written_ += group.size();
  slots_.push_back(std::move(group));
  return static_cast<std::uint32_t>(slots_.size() - 1);
}

const std::vector<MetaTask>& SpillArena::at(std::uint32_t handle) const {
  if (handle >= slots_.size()) {
    throw DanglingHandleError("spill handle " + std::to_string(handle) + " not present on machine " +
                              std::to_string(owner_));
  }
  return slots_[handle];
}

MetaTaskSet::MetaTaskSet(std::uint32_t chunk_size) : chunk_size_(chunk_size) {
  if (chunk_size == 0) throw std::invalid_argument("chunk size must be positive");
}

MetaTaskSet MetaTaskSet::wrap(TaskContext t, std::uint32_t chunk_size) {
  MetaTaskSet s(chunk_size);
  s.levels_.emplace_back();
  s.levels_[0].push_back(MetaTask::leaf(std::move(t)));
  s.l0_total_ = 1;
  return s;
}

std::size_t MetaTaskSet::entry_count() const {
  std::size_t n = 0;
  for (const auto& l : levels_) n += l.size();
  return n;
}

std::uint32_t MetaTaskSet::top_level() const {
  for (std::size_t l = levels_.size(); l-- > 0;) {
    if (!levels_[l].empty()) return static_cast<std::uint32_t>(l);
  }
  return 0;
}

MetaTaskSet merge(MetaTaskSet a, MetaTaskSet b, SpillArena& arena) {
  if (a.chunk_size_ != b.chunk_size_) {
    throw std::invalid_argument("meta-task set chunk size mismatch");
  }
  const std::uint32_t c = a.chunk_size_;
  MetaTaskSet out = std::move(a);
  out.l0_total_ += b.l0_total_;
  if (out.levels_.size() < b.levels_.size()) out.levels_.resize(b.levels_.size());
  for (std::size_t l = 0; l < b.levels_.size(); ++l) {
    auto& dst = out.levels_[l];
    for (auto& mt : b.levels_[l]) dst.push_back(std::move(mt));
  }

  for (std::size_t l = 0; l < out.levels_.size(); ++l) {
    if (out.levels_[l].size() <= c) continue;
    std::uint64_t children = 0;
    for (const auto& mt : out.levels_[l]) children += mt.l0_count();
    std::vector<MetaTask> spilled;
    spilled.swap(out.levels_[l]);
    const std::uint32_t handle = arena.store(std::move(spilled));
    if (l + 1 == out.levels_.size()) out.levels_.emplace_back();
    out.levels_[l + 1].push_back(MetaTask::ref(static_cast<std::uint32_t>(l + 1),
                                               RemoteRef{arena.owner(), handle, children}));
  }
  while (!out.levels_.empty() && out.levels_.back().empty()) out.levels_.pop_back();
  return out;
}

// Layout (varints): C | l0_total | level count | per level: n, n entries.
// Level-0 entries are encoded task contexts; higher entries are
// machine | handle | child_count.
void MetaTaskSet::serialize(ByteWriter& w) const {
  w.uv(chunk_size_);
  w.uv(l0_total_);
  w.uv(levels_.size());
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    w.uv(levels_[l].size());
    for (const auto& mt : levels_[l]) {
      if (l == 0) {
        mt.task().encode(w);
      } else {
        const auto& r = mt.remote();
        w.uv(r.machine);
        w.uv(r.handle);
        w.uv(r.child_count);
      }
    }
  }
}

MetaTaskSet MetaTaskSet::deserialize(ByteReader& r) {
  const std::uint64_t c64 = r.uv();
  if (c64 == 0 || c64 > std::numeric_limits<std::uint32_t>::max()) throw DecodeError("bad chunk size");
  const auto c = static_cast<std::uint32_t>(c64);
  MetaTaskSet s(c);
  s.l0_total_ = r.uv();
  const std::uint64_t nlevels = r.uv();
  if (nlevels > 64) throw DecodeError("too many levels");
  s.levels_.resize(nlevels);
  std::uint64_t counted = 0;
  for (std::uint32_t l = 0; l < nlevels; ++l) {
    const std::uint64_t n = r.uv();
    if (n > c) throw DecodeError("level exceeds chunk size");
    auto& level = s.levels_[l];
    level.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      if (l == 0) {
        level.push_back(MetaTask::leaf(TaskContext::decode(r)));
        counted += 1;
      } else {
        RemoteRef ref;
        ref.machine = static_cast<MachineId>(r.uv());
        ref.handle = static_cast<std::uint32_t>(r.uv());
        ref.child_count = r.uv();
        counted += ref.child_count;
        level.push_back(MetaTask::ref(l, ref));
      }
    }
  }
  if (counted != s.l0_total_) throw DecodeError("l0_total does not match entries");
  return s;
}

const std::vector<MetaTask>& expand_children(const MetaTask& mt, const SpillArena& arena) {
  if (mt.is_leaf()) throw std::invalid_argument("cannot expand a level-0 meta-task");
  const auto& ref = mt.remote();
  if (ref.machine != arena.owner()) {
    throw DanglingHandleError("reference points at machine " + std::to_string(ref.machine) +
                              ", arena belongs to " + std::to_string(arena.owner()));
  }
  return arena.at(ref.handle);
}

}  // namespace tdorch
