#include "report.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>

namespace tdorch::cli {

std::uint64_t resolve_seed(const CommonOptions& o) {
  if (o.seed_given) return o.seed;
  const char* env = std::getenv("TDORCH_SEED");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0') throw UsageError(std::string("TDORCH_SEED is not an integer: ") + env);
  return v;
}

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Json totals(const bsp::CostCounters& c) {
  Json j;
  j["words_sent"] = c.total_sent();
  j["words_received"] = c.total_received();
  j["comp_work"] = c.total_comp();
  j["overhead"] = c.total_overhead();
  j["messages"] = c.messages;
  j["supersteps"] = c.supersteps;
  return j;
}

}  // namespace

Json new_report(const std::string& command, Json config) {
  Json r;
  r["schema_version"] = kSchemaVersion;
  r["timestamp"] = utc_now();
  r["command"] = command;
  r["config"] = std::move(config);
  return r;
}

void add_counters(Json& report, const bsp::CostCounters& total,
                  const std::map<std::string, bsp::CostCounters>& by_phase) {
  Json machines = Json::array();
  for (std::size_t m = 0; m < total.num_machines(); ++m) {
    machines.push_back({{"id", m},
                        {"words_sent", total.words_sent[m]},
                        {"words_received", total.words_received[m]},
                        {"comp_work", total.comp_work[m]},
                        {"overhead", total.overhead[m]}});
  }
  report["supersteps"] = total.supersteps;
  report["machines"] = std::move(machines);
  report["totals"] = totals(total);
  report["imbalance"] = {{"words_sent", bsp::load_imbalance(total, bsp::Metric::kSent)},
                         {"words_received", bsp::load_imbalance(total, bsp::Metric::kReceived)},
                         {"total_words", bsp::load_imbalance(total, bsp::Metric::kTotalWords)},
                         {"comp_work", bsp::load_imbalance(total, bsp::Metric::kComp)}};
  Json phases = Json::object();
  std::uint64_t comm = 0, comp = 0, over = 0;
  for (const auto& [name, c] : by_phase) {
    phases[name] = {{"communication", c.total_sent()},
                    {"computation", c.total_comp()},
                    {"overhead", c.total_overhead()},
                    {"messages", c.messages},
                    {"active_supersteps", c.supersteps}};
    comm += c.total_sent();
    comp += c.total_comp();
    over += c.total_overhead();
  }
  report["breakdown"] = {{"communication", comm}, {"computation", comp}, {"overhead", over}, {"phases", phases}};
}

std::string hex_digest(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << text;
  if (!f) throw IoError("write failure on " + path);
}

void emit_report(const Json& report, const std::string& path) {
  const std::string text = report.dump(2) + "\n";
  if (path.empty()) {
    std::cout << text;
    return;
  }
  write_text(path, text);
}

void emit_csv(const bsp::CostCounters& c, const std::string& path) {
  std::string text = "machine,words_sent,words_received,comp_work,overhead\n";
  for (std::size_t m = 0; m < c.num_machines(); ++m) {
    text += std::to_string(m) + "," + std::to_string(c.words_sent[m]) + "," + std::to_string(c.words_received[m]) +
            "," + std::to_string(c.comp_work[m]) + "," + std::to_string(c.overhead[m]) + "\n";
  }
  write_text(path, text);
}

}  // namespace tdorch::cli
