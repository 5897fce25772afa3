#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "tdorch/bsp.hpp"

namespace tdorch::cli {

using Json = nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitUnsupported = 3;
inline constexpr int kExitIo = 4;

inline constexpr int kSchemaVersion = 1;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::uint32_t machines = 4;
  std::uint64_t seed = 1;
  bool seed_given = false;
  std::uint32_t threads = 1;
  std::string out;
  std::string csv;
};

// Seed from the flag, else TDORCH_SEED, else 1.
std::uint64_t resolve_seed(const CommonOptions& o);

// Skeleton report: schema, timestamp, command and config echo.
Json new_report(const std::string& command, Json config);

// Per-machine counters, totals, imbalance ratios and the per-phase
// communication / computation / overhead breakdown.
void add_counters(Json& report, const bsp::CostCounters& total,
                  const std::map<std::string, bsp::CostCounters>& by_phase);

std::string hex_digest(std::uint64_t h);

// Writes the report to `path`, or stdout when empty. Throws IoError.
void emit_report(const Json& report, const std::string& path);
// One row per machine: id, words_sent, words_received, comp_work, overhead.
void emit_csv(const bsp::CostCounters& c, const std::string& path);
// Writes `text` to `path`. Throws IoError.
void write_text(const std::string& path, const std::string& text);

}  // namespace tdorch::cli
