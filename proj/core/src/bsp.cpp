#include "tdorch/bsp.hpp"

#include <algorithm>
#include <exception>
#include <numeric>
#include <optional>
#include <thread>

namespace tdorch::bsp {

void ClusterConfig::validate() const {
  if (num_machines < 1) throw std::invalid_argument("cluster needs at least one machine");
  if (num_machines > kMaxMachines) throw std::invalid_argument("cluster supports at most 2^16 machines");
  if (threads < 1) throw std::invalid_argument("threads must be positive");
}

namespace {

std::uint64_t sum(const std::vector<std::uint64_t>& v) {
  return std::accumulate(v.begin(), v.end(), std::uint64_t{0});
}

void add_into(std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
  if (a.size() < b.size()) a.resize(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) a[i] += b[i];
}

std::vector<std::uint64_t> diff(const std::vector<std::uint64_t>& a,
                                const std::vector<std::uint64_t>& b) {
  std::vector<std::uint64_t> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - (i < b.size() ? b[i] : 0);
  return out;
}

}  // namespace

std::uint64_t CostCounters::total_sent() const { return sum(words_sent); }
std::uint64_t CostCounters::total_received() const { return sum(words_received); }
std::uint64_t CostCounters::total_comp() const { return sum(comp_work); }
std::uint64_t CostCounters::total_overhead() const { return sum(overhead); }

std::uint64_t CostCounters::max_words() const {
  std::uint64_t best = 0;
  for (std::size_t i = 0; i < words_sent.size(); ++i) {
    best = std::max(best, words_sent[i] + words_received[i]);
  }
  return best;
}

CostCounters& CostCounters::operator+=(const CostCounters& o) {
  add_into(words_sent, o.words_sent);
  add_into(words_received, o.words_received);
  add_into(comp_work, o.comp_work);
  add_into(overhead, o.overhead);
  messages += o.messages;
  supersteps += o.supersteps;
  return *this;
}

CostCounters operator-(const CostCounters& a, const CostCounters& b) {
  CostCounters out;
  out.words_sent = diff(a.words_sent, b.words_sent);
  out.words_received = diff(a.words_received, b.words_received);
  out.comp_work = diff(a.comp_work, b.comp_work);
  out.overhead = diff(a.overhead, b.overhead);
  out.messages = a.messages - b.messages;
  out.supersteps = a.supersteps - b.supersteps;
  return out;
}

double load_imbalance(std::span<const std::uint64_t> per_machine) {
  if (per_machine.empty()) return 1.0;
  std::uint64_t total = 0;
  std::uint64_t mx = 0;
  for (auto v : per_machine) {
    total += v;
    mx = std::max(mx, v);
  }
  if (total == 0) return 1.0;
  const double mean = static_cast<double>(total) / static_cast<double>(per_machine.size());
  return static_cast<double>(mx) / mean;
}

std::vector<std::uint64_t> metric_values(const CostCounters& c, Metric metric) {
  switch (metric) {
    case Metric::kSent:
      return c.words_sent;
    case Metric::kReceived:
      return c.words_received;
    case Metric::kComp:
      return c.comp_work;
    case Metric::kTotalWords: {
      std::vector<std::uint64_t> v(c.words_sent.size());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = c.words_sent[i] + c.words_received[i];
      return v;
    }
  }
  return {};
}

double load_imbalance(const CostCounters& c, Metric metric) {
  const auto v = metric_values(c, metric);
  return load_imbalance(std::span<const std::uint64_t>(v));
}

ByteWriter& StepContext::envelope(MachineId dst, PhaseId phase) {
  if (!allow_send_) throw std::logic_error("messaging is not allowed in local computation");
  if (dst >= num_machines_) {
    throw RoutingError("destination machine " + std::to_string(dst) + " out of range");
  }
  return writers_[{phase, dst}];
}

void StepContext::send(MachineId dst, Bytes payload, PhaseId phase) {
  if (!allow_send_) throw std::logic_error("messaging is not allowed in local computation");
  if (dst >= num_machines_) {
    throw RoutingError("destination machine " + std::to_string(dst) + " out of range");
  }
  Message m;
  m.src = id();
  m.dst = dst;
  m.superstep = superstep_;
  m.phase = phase;
  m.payload = std::move(payload);
  staged_.raw.push_back(std::move(m));
}

void StepContext::add_work(std::uint64_t units, PhaseId phase) {
  staged_.work.emplace_back(phase, units);
}

void StepContext::add_overhead(std::uint64_t units, PhaseId phase) {
  staged_.overhead.emplace_back(phase, units);
}

Cluster::Cluster(ClusterConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  machines_.reserve(cfg_.num_machines);
  for (MachineId i = 0; i < cfg_.num_machines; ++i) machines_.emplace_back(i, cfg_.seed);
  pending_.resize(cfg_.num_machines);
  counters_ = CostCounters(cfg_.num_machines);
  phase_names_.push_back("default");
  phase_counters_.emplace_back(cfg_.num_machines);
}

PhaseId Cluster::phase(const std::string& name) {
  for (std::size_t i = 0; i < phase_names_.size(); ++i) {
    if (phase_names_[i] == name) return static_cast<PhaseId>(i);
  }
  if (phase_names_.size() >= 255) throw std::length_error("too many phases");
  phase_names_.push_back(name);
  phase_counters_.emplace_back(cfg_.num_machines);
  return static_cast<PhaseId>(phase_names_.size() - 1);
}

bool Cluster::has_pending() const {
  return std::any_of(pending_.begin(), pending_.end(), [](const auto& q) { return !q.empty(); });
}

void Cluster::reset_counters() {
  counters_ = CostCounters(cfg_.num_machines);
  for (auto& pc : phase_counters_) pc = CostCounters(cfg_.num_machines);
}

void Cluster::clear_arenas() {
  for (auto& m : machines_) m.spill_arena.clear();
}

void Cluster::run_machines(std::vector<StepContext>& ctxs, const StepFn& fn) {
  const std::uint32_t p = cfg_.num_machines;
  std::vector<std::exception_ptr> errors(p);
  auto run_one = [&](MachineId i) {
    try {
      fn(ctxs[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::uint32_t workers = std::min(cfg_.threads, p);
  if (workers <= 1) {
    for (MachineId i = 0; i < p; ++i) run_one(i);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::uint32_t t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        for (MachineId i = t; i < p; i += workers) run_one(i);
      });
    }
  }
  for (MachineId i = 0; i < p; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const RoutingError&) {
      throw;
    } catch (const StageAborted&) {
      throw;
    } catch (const std::exception& e) {
      throw StageAborted(i, e.what());
    } catch (...) {
      throw StageAborted(i, "unknown failure");
    }
  }
}

void Cluster::charge(std::vector<StepContext>& ctxs, CostCounters& delta) {
  for (auto& ctx : ctxs) {
    const MachineId id = ctx.id();
    for (auto [phase, units] : ctx.staged_.work) {
      delta.comp_work[id] += units;
      phase_counters_.at(phase).comp_work[id] += units;
    }
    for (auto [phase, units] : ctx.staged_.overhead) {
      delta.overhead[id] += units;
      phase_counters_.at(phase).overhead[id] += units;
    }
  }
}

CostCounters Cluster::run_superstep(const StepFn& step_fn) {
  const std::uint32_t p = cfg_.num_machines;
  std::vector<std::vector<Message>> inboxes(p);
  inboxes.swap(pending_);
  pending_.assign(p, {});
  for (auto& inbox : inboxes) {
    std::sort(inbox.begin(), inbox.end(), [](const Message& a, const Message& b) {
      return std::tie(a.src, a.seq) < std::tie(b.src, b.seq);
    });
  }

  const std::uint64_t step = counters_.supersteps;
  std::vector<StepContext> ctxs(p);
  for (MachineId i = 0; i < p; ++i) {
    ctxs[i].state_ = &machines_[i];
    ctxs[i].num_machines_ = p;
    ctxs[i].superstep_ = step;
    ctxs[i].inbox_ = inboxes[i];
  }
  run_machines(ctxs, step_fn);

  CostCounters delta(p);
  delta.supersteps = 1;
  charge(ctxs, delta);

  // Barrier: flush envelopes after raw sends, assign per-destination sequence
  // numbers in emission order, deliver.
  std::vector<bool> phase_active(phase_counters_.size(), false);
  for (auto& ctx : ctxs) {
    const MachineId src = ctx.id();
    std::vector<Message> out = std::move(ctx.staged_.raw);
    for (auto& [key, writer] : ctx.writers_) {
      if (writer.empty()) continue;
      Message m;
      m.src = src;
      m.dst = key.second;
      m.superstep = step;
      m.phase = key.first;
      m.payload = writer.take();
      out.push_back(std::move(m));
    }
    std::vector<std::uint32_t> seq(p, 0);
    for (auto& m : out) {
      m.seq = seq[m.dst]++;
      if (m.dst != src) {
        const std::uint64_t w = m.words();
        delta.words_sent[src] += w;
        delta.words_received[m.dst] += w;
        delta.messages += 1;
        auto& pc = phase_counters_.at(m.phase);
        pc.words_sent[src] += w;
        pc.words_received[m.dst] += w;
        pc.messages += 1;
        phase_active[m.phase] = true;
      }
      pending_[m.dst].push_back(std::move(m));
    }
  }
  for (std::size_t i = 0; i < phase_active.size(); ++i) {
    if (phase_active[i]) phase_counters_[i].supersteps += 1;
  }
  counters_ += delta;
  return delta;
}

void Cluster::run_local(const StepFn& fn) {
  const std::uint32_t p = cfg_.num_machines;
  std::vector<StepContext> ctxs(p);
  for (MachineId i = 0; i < p; ++i) {
    ctxs[i].state_ = &machines_[i];
    ctxs[i].num_machines_ = p;
    ctxs[i].superstep_ = counters_.supersteps;
    ctxs[i].allow_send_ = false;
  }
  run_machines(ctxs, fn);
  CostCounters delta(p);
  charge(ctxs, delta);
  counters_ += delta;
}

}  // namespace tdorch::bsp
