#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <set>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct Sandbox {
  fs::path dir;
  Sandbox() {
    static int counter = 0;
    dir = fs::temp_directory_path() / ("tdorch_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(dir);
  }
  ~Sandbox() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }

  // Runs the binary inside the sandbox; returns the exit status.
  int run(const std::string& args, const std::string& env = "") const {
    const std::string cmd = "cd '" + dir.string() + "' && " + env + (env.empty() ? "" : " ") + TDORCH_BIN + " " +
                            args + " >stdout.txt 2>stderr.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string read(const std::string& name) const {
    std::ifstream in(dir / name);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  void write(const std::string& name, const std::string& text) const { std::ofstream(dir / name) << text; }
  Json report(const std::string& name) const { return Json::parse(read(name)); }
};

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

void check_reconciles(const Json& r) {
  std::uint64_t sent = 0, received = 0, comp = 0;
  for (const auto& m : r["machines"]) {
    sent += m["words_sent"].get<std::uint64_t>();
    received += m["words_received"].get<std::uint64_t>();
    comp += m["comp_work"].get<std::uint64_t>();
  }
  CHECK(sent == received);
  CHECK(sent == r["totals"]["words_sent"].get<std::uint64_t>());
  CHECK(received == r["totals"]["words_received"].get<std::uint64_t>());
  CHECK(comp == r["totals"]["comp_work"].get<std::uint64_t>());
  std::uint64_t phase_comm = 0;
  for (const auto& [name, ph] : r["breakdown"]["phases"].items()) phase_comm += ph["communication"].get<std::uint64_t>();
  CHECK(phase_comm == r["breakdown"]["communication"].get<std::uint64_t>());
}

void check_schema(const Json& r, const std::string& command) {
  for (const char* key : {"schema_version", "timestamp", "command", "config", "supersteps", "machines", "totals",
                          "imbalance", "breakdown", "result", "digest"}) {
    CHECK_MESSAGE(r.contains(key), key);
  }
  CHECK(r["schema_version"] == 1);
  CHECK(r["command"] == command);
  CHECK(r["machines"].size() == r["config"]["machines"].get<std::size_t>());
  for (const char* key : {"communication", "computation", "overhead", "phases"}) {
    CHECK_MESSAGE(r["breakdown"].contains(key), key);
  }
}

std::string without_timestamp(std::string text) {
  Json r = Json::parse(text);
  r.erase("timestamp");
  r["config"].erase("threads");
  return r.dump();
}

}  // namespace

TEST_CASE("orch-bench report at P=8, gamma=2 under td-orch") {
  Sandbox sb;
  REQUIRE(sb.run("orch-bench --machines 8 --strategy td-orch --gamma 2.0 --out r.json") == 0);
  const Json r = sb.report("r.json");
  check_schema(r, "orch-bench");
  check_reconciles(r);
  CHECK(r["imbalance"]["words_received"].get<double>() <= 3.0);
  CHECK(r["imbalance"]["comp_work"].get<double>() <= 3.0);
  CHECK(r["result"]["tasks"] == 80000);
}

TEST_CASE("one machine moves no words under any strategy") {
  Sandbox sb;
  for (const char* s : {"td-orch", "direct-pull", "direct-push", "sorting"}) {
    CAPTURE(s);
    REQUIRE(sb.run(std::string("orch-bench --machines 1 --gamma 1.5 --tasks-per-machine 2000 --out r.json --strategy ") +
                   s) == 0);
    const Json r = sb.report("r.json");
    CHECK(r["totals"]["words_sent"] == 0);
    CHECK(r["totals"]["words_received"] == 0);
  }
}

TEST_CASE("every strategy reconciles and agrees on the final key values") {
  Sandbox sb;
  std::string first;
  for (const char* s : {"td-orch", "direct-pull", "direct-push", "sorting"}) {
    CAPTURE(s);
    REQUIRE(sb.run(std::string("orch-bench --machines 4 --gamma 1.2 --tasks-per-machine 3000 --out r.json --strategy ") +
                   s) == 0);
    const Json r = sb.report("r.json");
    check_schema(r, "orch-bench");
    check_reconciles(r);
    const std::string shards = r["digest"]["shards"];
    if (first.empty()) first = shards;
    CHECK(shards == first);
  }
}

TEST_CASE("reports are identical across runs apart from the timestamp") {
  Sandbox sb;
  REQUIRE(sb.run("orch-bench --machines 6 --gamma 1.5 --tasks-per-machine 2000 --seed 9 --out a.json") == 0);
  REQUIRE(sb.run("orch-bench --machines 6 --gamma 1.5 --tasks-per-machine 2000 --seed 9 --out b.json --threads 3") ==
          0);
  CHECK(without_timestamp(sb.read("a.json")) == without_timestamp(sb.read("b.json")));
  REQUIRE(sb.run("orch-bench --machines 6 --gamma 1.5 --tasks-per-machine 2000 --out c.json", "TDORCH_SEED=9") == 0);
  CHECK(without_timestamp(sb.read("a.json")) == without_timestamp(sb.read("c.json")));
  REQUIRE(sb.run("orch-bench --machines 6 --gamma 1.5 --tasks-per-machine 2000 --seed 10 --out d.json") == 0);
  CHECK(sb.report("a.json")["digest"] != sb.report("d.json")["digest"]);

  REQUIRE(sb.run("graph --algo cc --gen ba --n 500 --m 3 --seed 4 --out g1.json") == 0);
  REQUIRE(sb.run("graph --algo cc --gen ba --n 500 --m 3 --seed 4 --out g2.json") == 0);
  CHECK(without_timestamp(sb.read("g1.json")) == without_timestamp(sb.read("g2.json")));
}

TEST_CASE("report goes to stdout without --out, csv has one row per machine") {
  Sandbox sb;
  REQUIRE(sb.run("orch-bench --machines 3 --tasks-per-machine 500 --csv m.csv") == 0);
  const Json r = Json::parse(sb.read("stdout.txt"));
  check_reconciles(r);
  const auto rows = lines(sb.read("m.csv"));
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].find("words_sent") != std::string::npos);
}

TEST_CASE("orch-bench dump lists every touched key once") {
  Sandbox sb;
  REQUIRE(sb.run("orch-bench --machines 4 --keys 64 --tasks-per-machine 1000 --dump kv.txt --out r.json") == 0);
  const auto rows = lines(sb.read("kv.txt"));
  CHECK(!rows.empty());
  CHECK(rows.size() <= 64);
  std::set<std::string> keys;
  for (const auto& row : rows) keys.insert(row.substr(0, row.find(' ')));
  CHECK(keys.size() == rows.size());
}

TEST_CASE("bfs on a generated ER graph matches the oracle") {
  Sandbox sb;
  for (const bool undirected : {false, true}) {
    CAPTURE(undirected);
    const std::string flag = undirected ? " --undirected" : "";
    REQUIRE(sb.run("graph --algo bfs --gen er --n 1000 --p 0.01 --machines 4 --start 0 --seed 5 --values v.txt --out r.json" +
                   flag) == 0);
    auto g = tdorch::graph::gen_er(1000, 0.01, 5);
    if (undirected) g = tdorch::graph::symmetrize(g);
    const auto want = oracle::bfs(g, 0);
    const auto got = lines(sb.read("v.txt"));
    REQUIRE(got.size() == want.size());
    for (std::size_t v = 0; v < want.size(); ++v) CHECK(got[v] == std::to_string(want[v]));
    const Json r = sb.report("r.json");
    check_schema(r, "graph");
    check_reconciles(r);
  }
}

TEST_CASE("pagerank on a 2-cycle file") {
  Sandbox sb;
  sb.write("cycle.txt", "# two vertices\n0 1\n1 0\n");
  REQUIRE(sb.run("graph --algo pr --input cycle.txt --machines 2 --values v.txt --out r.json") == 0);
  const auto got = lines(sb.read("v.txt"));
  REQUIRE(got.size() == 2);
  CHECK(std::stod(got[0]) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::stod(got[1]) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("sparse, dense and auto modes write identical values") {
  Sandbox sb;
  sb.run("gen-graph --model ba --n 400 --m 3 --undirected --max-weight 7 --seed 2 --out g.txt");
  const std::vector<std::string> runs = {"--algo bfs --start 3", "--algo sssp --start 3", "--algo bc --start 3",
                                         "--algo cc", "--algo pr --iters 5"};
  for (const auto& algo : runs) {
    CAPTURE(algo);
    std::string base;
    for (const char* mode : {"auto", "sparse", "dense"}) {
      REQUIRE(sb.run("graph --input g.txt --machines 5 --values v.txt --out r.json --mode " + std::string(mode) + " " +
                     algo) == 0);
      const std::string values = sb.read("v.txt");
      CHECK(lines(values).size() == 400);
      if (base.empty()) base = values;
      CHECK(values == base);
    }
  }
}

TEST_CASE("bc on a directed input ingests the transpose") {
  Sandbox sb;
  sb.write("g.txt", "0 1\n1 2\n0 3\n3 2\n2 4\n");
  REQUIRE(sb.run("graph --algo bc --input g.txt --start 0 --machines 3 --values v.txt --out r.json") == 0);
  const auto got = lines(sb.read("v.txt"));
  tdorch::graph::EdgeList g;
  g.n = 5;
  g.edges = {{0, 1}, {1, 2}, {0, 3}, {3, 2}, {2, 4}};
  const auto want = oracle::brandes(g, 0);
  REQUIRE(got.size() == 5);
  for (std::size_t v = 0; v < 5; ++v) CHECK(std::stod(got[v]) == doctest::Approx(want[v]));
  CHECK(sb.report("r.json").contains("ingest_transpose"));
}

TEST_CASE("gen-graph examples") {
  Sandbox sb;
  REQUIRE(sb.run("gen-graph --model er --n 4 --p 1 --out k4.txt") == 0);
  const auto g = tdorch::graph::read_edge_list_file(sb.path("k4.txt"));
  CHECK(g.n == 4);
  CHECK(g.edges.size() == 6);

  REQUIRE(sb.run("gen-graph --model ba --n 1000 --m 5 --seed 8 --out a.txt") == 0);
  REQUIRE(sb.run("gen-graph --model ba --n 1000 --m 5 --seed 8 --out b.txt") == 0);
  CHECK(sb.read("a.txt") == sb.read("b.txt"));
  const auto ba = tdorch::graph::read_edge_list_file(sb.path("a.txt"));
  CHECK(ba.n == 1000);
  CHECK(ba.edges.size() >= 4900);
  CHECK(ba.edges.size() <= 5000);
  std::vector<std::uint64_t> deg(ba.n, 0);
  for (const auto& e : ba.edges) {
    deg[e.u] += 1;
    deg[e.v] += 1;
  }
  const double mean = 2.0 * static_cast<double>(ba.edges.size()) / static_cast<double>(ba.n);
  CHECK(static_cast<double>(*std::max_element(deg.begin(), deg.end())) >= 10 * mean);
}

TEST_CASE("exit codes") {
  Sandbox sb;
  CHECK(sb.run("--help") == 0);
  CHECK(sb.run("orch-bench --help") == 0);
  CHECK(sb.run("") == 2);
  CHECK(sb.run("orch-bench --no-such-flag") == 2);
  CHECK(sb.run("orch-bench --strategy nonsense") == 2);
  CHECK(sb.run("orch-bench --machines 0") == 2);
  CHECK(sb.run("orch-bench --gamma -1") == 2);
  CHECK(sb.run("orch-bench --strategy direct-push --pair-fraction 0.3 --tasks-per-machine 100") == 3);
  CHECK(sb.read("stderr.txt").find("single-address") != std::string::npos);
  CHECK(sb.run("graph --algo bfs --gen er --n 50") == 2);
  CHECK(sb.run("graph --algo sssp --gen er --n 50 --start 50") == 2);
  CHECK(sb.run("graph --algo nope --gen er --n 50") == 2);
  CHECK(sb.run("graph --algo cc --gen er --input x.txt") == 2);
  CHECK(sb.run("graph --algo cc --mode sideways --gen er --n 10") == 2);
  CHECK(sb.run("graph --algo cc --input missing.txt") == 4);
  sb.write("bad.txt", "0 1\nzero one\n");
  CHECK(sb.run("graph --algo cc --input bad.txt") == 4);
  CHECK(sb.run("graph --algo cc --gen er --n 10 --out no/such/dir/r.json") == 4);
  CHECK(sb.run("gen-graph --model er --n 4 --p 1.5 --out x.txt") == 2);
  CHECK(sb.run("gen-graph --model ba --n 5 --m 5 --out x.txt") == 2);
  CHECK(sb.run("gen-graph --model er --n 4") == 2);
  CHECK(sb.run("gen-graph --model er --n 4 --out no/such/dir/x.txt") == 4);
}

// Runs every "tdorch ..." line from the README's shell blocks, in order, in
// one sandbox.
TEST_CASE("README examples run") {
  std::ifstream in(TDORCH_README);
  REQUIRE(in.good());
  Sandbox sb;
  bool in_shell = false;
  int ran = 0;
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("```", 0) == 0) {
      in_shell = line == "```sh";
      continue;
    }
    if (!in_shell || line.rfind("tdorch ", 0) != 0) continue;
    CAPTURE(line);
    CHECK(sb.run(line.substr(7)) == 0);
    ++ran;
  }
  CHECK(ran >= 5);
}
