#include "doctest.h"
#include "shiftband/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("shiftband_test_" + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kStationarySpec = R"({
  "kind": "piecewise", "T": 16, "K": 2, "seed": 3,
  "segments": {"boundaries": [], "means": [[0.8, 0.2]]}
})";

}  // namespace

TEST_CASE("generate-env writes identical rows for a stationary spec") {
  TempDir dir;
  write(dir.file("env.json"), kStationarySpec);
  CHECK(shiftband::cli::run({"generate-env", "--spec", dir.file("env.json"),
                             "--out", dir.file("m.csv")}) == 0);
  std::ifstream in(dir.file("m.csv"));
  std::string header, first, line;
  std::getline(in, header);
  CHECK(header == "t,arm_1,arm_2");
  std::getline(in, first);
  CHECK(first == "1,0.8000000000,0.2000000000");
  int rows = 1;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(line.substr(line.find(',')) == first.substr(first.find(',')));
  }
  CHECK(rows == 16);

  // Same spec, same bytes.
  CHECK(shiftband::cli::run({"generate-env", "--spec", dir.file("env.json"),
                             "--out", dir.file("m2.csv")}) == 0);
  CHECK(slurp(dir.file("m.csv")) == slurp(dir.file("m2.csv")));
}

TEST_CASE("generate-env reports schema errors with the field path") {
  TempDir dir;
  write(dir.file("bad.json"), R"({"kind":"piecewise","T":8,"K":2,"seed":0,
    "segments":{"boundaries":[],"means":[[0.5,0.5]]},"whoops":true})");
  CHECK(shiftband::cli::run({"generate-env", "--spec", dir.file("bad.json"),
                             "--out", dir.file("m.csv")}) == 1);
  write(dir.file("notjson.json"), "{nope");
  CHECK(shiftband::cli::run({"generate-env", "--spec", dir.file("notjson.json"),
                             "--out", dir.file("m.csv")}) == 1);
}

TEST_CASE("ground-truth emits the stationary annotation") {
  TempDir dir;
  write(dir.file("env.json"), kStationarySpec);
  CHECK(shiftband::cli::run({"ground-truth", "--spec", dir.file("env.json"),
                             "--out", dir.file("gt.json")}) == 0);
  const std::string text = slurp(dir.file("gt.json"));
  CHECK(text.find("\"L\": 0") != std::string::npos);
  CHECK(text.find("\"tau\": [\n    1,\n    17\n  ]") != std::string::npos);

  // Above the cap: resource error surfaces as a nonzero exit.
  CHECK(shiftband::cli::run({"ground-truth", "--spec", dir.file("env.json"),
                             "--out", dir.file("gt2.json"), "--cap", "8"}) == 1);
}

TEST_CASE("run executes a small config and reproduces outputs byte-for-byte") {
  TempDir dir;
  write(dir.file("env.json"), kStationarySpec);
  std::ostringstream cfg;
  cfg << R"({
    "env": )" << kStationarySpec << R"(,
    "policy": "meta",
    "eviction": {"C0": 2.0, "scan_mode": "dyadic"},
    "horizons": [16],
    "seeds": 2,
    "out_csv": ")" << dir.file("trials.csv") << R"(",
    "out_json": ")" << dir.file("summary.json") << R"(",
    "events_jsonl": ")" << dir.file("events.jsonl") << R"("
  })";
  write(dir.file("config.json"), cfg.str());

  CHECK(shiftband::cli::run({"run", "--config", dir.file("config.json")}) == 0);
  const std::string csv1 = slurp(dir.file("trials.csv"));
  CHECK(csv1.rfind("T,seed,final_regret,num_restarts,num_replays\n", 0) == 0);
  CHECK(std::count(csv1.begin(), csv1.end(), '\n') == 3);  // header + 2 trials
  const std::string events = slurp(dir.file("events.jsonl"));
  CHECK(events.find("\"type\":\"episode_start\"") != std::string::npos);

  CHECK(shiftband::cli::run({"run", "--config", dir.file("config.json")}) == 0);
  CHECK(slurp(dir.file("trials.csv")) == csv1);
  CHECK(slurp(dir.file("summary.json")).find("per_horizon") != std::string::npos);

  CHECK(shiftband::cli::run({"report", dir.file("summary.json")}) == 0);
}

TEST_CASE("run --dry-run only prints the grid") {
  TempDir dir;
  std::ostringstream cfg;
  cfg << R"({"env": )" << kStationarySpec
      << R"(, "policy": "uniform", "horizons": [8, 16], "seeds": 3,
           "out_csv": ")" << dir.file("t.csv") << R"("})";
  write(dir.file("config.json"), cfg.str());
  CHECK(shiftband::cli::run({"run", "--config", dir.file("config.json"),
                             "--dry-run"}) == 0);
  CHECK(!fs::exists(dir.file("t.csv")));
}

TEST_CASE("run rejects configs with unknown fields") {
  TempDir dir;
  std::ostringstream cfg;
  cfg << R"({"env": )" << kStationarySpec
      << R"(, "policy": "uniform", "horizons": [8], "seeds": 1, "mystery": 1})";
  write(dir.file("config.json"), cfg.str());
  CHECK(shiftband::cli::run({"run", "--config", dir.file("config.json")}) == 1);
}

TEST_CASE("SHIFTBAND_SEED_OFFSET shifts the seed grid") {
  TempDir dir;
  std::ostringstream cfg;
  cfg << R"({"env": )" << kStationarySpec
      << R"(, "policy": "uniform", "horizons": [8], "seeds": 2,
           "out_csv": ")" << dir.file("t.csv") << R"(",
           "out_json": ")" << dir.file("s.json") << R"("})";
  write(dir.file("config.json"), cfg.str());

  setenv("SHIFTBAND_SEED_OFFSET", "100", 1);
  CHECK(shiftband::cli::run({"run", "--config", dir.file("config.json")}) == 0);
  unsetenv("SHIFTBAND_SEED_OFFSET");
  const std::string csv = slurp(dir.file("t.csv"));
  CHECK(csv.find("8,100,") != std::string::npos);
  CHECK(csv.find("8,101,") != std::string::npos);
}
