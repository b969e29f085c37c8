#include "anchor/cli.hpp"
#include "anchor/io.hpp"
#include "test_util.hpp"

#include <json.hpp>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using namespace anchor;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
  nlohmann::json summary() const { return nlohmann::json::parse(out); }
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "anchorctl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("anchorctl-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter_++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CsvTable load_csv(const std::string& path) {
  std::ifstream in(path);
  return read_csv(in);
}

}  // namespace

TEST_CASE("solve appm writes a full log and a -2 slope") {
  TempDir dir;
  const auto r = run({"solve", "--method", "appm", "--op", "rotation", "--iters", "10000", "--out", dir.file("a.csv"),
                      "--summary", dir.file("s.json"), "--svg", dir.file("a.svg")});
  INFO(r.err);
  REQUIRE(r.code == kExitOk);
  const auto table = load_csv(dir.file("a.csv"));
  CHECK(table.rows.size() == 10000);
  CHECK(table.header.size() == 3);
  const auto s = r.summary();
  CHECK(s["method"] == "appm");
  CHECK(s["slope"].get<double>() == doctest::Approx(-2.0).epsilon(0.075));
  CHECK(s["bounds_ok"]["appm_bound"] == true);
  CHECK(nlohmann::json::parse(slurp(dir.file("s.json"))) == s);
  CHECK(slurp(dir.file("a.svg")).find("<polyline") != std::string::npos);
}

TEST_CASE("simulate a power-law flow") {
  TempDir dir;
  const auto r = run({"simulate", "--op", "rotation", "--gamma", "1", "--p", "0.5", "--t-max", "100", "--steps", "20000",
                      "--record-every", "10", "--out", dir.file("t.csv")});
  INFO(r.err);
  REQUIRE(r.code == kExitOk);
  const auto table = load_csv(dir.file("t.csv"));
  CHECK(table.header == std::vector<std::string>{"t", "x_0", "x_1", "resid_sq", "beta"});
  REQUIRE(table.rows.size() == 2001);
  // Curves in toward the origin.
  auto radius = [&](std::size_t i) { return std::hypot(table.rows[i][1], table.rows[i][2]); };
  CHECK(radius(0) == doctest::Approx(1.0));
  CHECK(radius(200) < 0.5);
  CHECK(radius(2000) < 0.2);
  CHECK(radius(2000) < radius(200));
  double winding = 0;
  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    const double a0 = std::atan2(table.rows[i - 1][2], table.rows[i - 1][1]);
    const double a1 = std::atan2(table.rows[i][2], table.rows[i][1]);
    winding += std::remainder(a1 - a0, 2 * std::numbers::pi);
  }
  CHECK(std::abs(winding) > std::numbers::pi / 4);
}

TEST_CASE("invalid input maps to the config exit code") {
  for (const char* p : {"0", "-1"}) {
    const auto r = run({"simulate", "--p", p});
    CHECK(r.code == kExitConfig);
    CHECK(r.err.find("error") != std::string::npos);
  }
  CHECK(run({"solve", "--method", "newton"}).code == kExitConfig);
  CHECK(run({"solve", "--iters", "-5"}).code == kExitConfig);
  CHECK(run({"solve", "--x0", "[1, 2, 3]"}).code == kExitConfig);
  CHECK(run({"solve", "--no-such-flag"}).code == kExitConfig);
  CHECK(run({}).code == kExitConfig);
  CHECK(run({"pgextra", "--alpha", "50", "--iters", "5"}).code == kExitConfig);
  CHECK(run({"solve", "--config", "/nonexistent.cfg"}).code == kExitConfig);
  CHECK(run({"solve", "--help"}).code == kExitOk);
}

TEST_CASE("flags override config values") {
  TempDir dir;
  {
    std::ofstream cfg(dir.file("run.cfg"));
    cfg << "# solve settings\nmethod = generalized\ngamma = 2\np = 1\niters = 300\nop = scaled_identity\nop.mu = 0.1\n";
  }
  const auto base = run({"solve", "--config", dir.file("run.cfg")});
  REQUIRE(base.code == kExitOk);
  CHECK(base.summary()["schedule"].get<std::string>().find("gamma=2") != std::string::npos);
  CHECK(base.summary()["iters"] == 300);

  const auto over = run({"solve", "--config", dir.file("run.cfg"), "--gamma", "0.5", "--iters", "120"});
  REQUIRE(over.code == kExitOk);
  CHECK(over.summary()["schedule"].get<std::string>().find("gamma=0.5") != std::string::npos);
  CHECK(over.summary()["iters"] == 120);
  CHECK(over.summary()["operator"] == base.summary()["operator"]);

  {
    std::ofstream cfg(dir.file("bad.cfg"));
    cfg << "method = appm\nop.M = [[1, 0], [0\n";
  }
  const auto bad = run({"solve", "--config", dir.file("bad.cfg")});
  CHECK(bad.code == kExitConfig);
  CHECK(bad.err.find("bad.cfg:2") != std::string::npos);
}

TEST_CASE("same command gives byte-identical CSV") {
  TempDir dir;
  for (const char* name : {"a.csv", "b.csv"}) {
    REQUIRE(run({"pgextra", "--seed", "3", "--iters", "200", "--out", dir.file(name)}).code != kExitConfig);
  }
  for (const char* variant : {"vanilla", "anchored", "adaptive"}) {
    const std::string a = slurp(dir.file(std::string("a_") + variant + ".csv"));
    CHECK(!a.empty());
    CHECK(a == slurp(dir.file(std::string("b_") + variant + ".csv")));
    CHECK(load_csv(dir.file(std::string("a_") + variant + ".csv")).header.size() == 4);
  }
  REQUIRE(run({"solve", "--method", "adaptive", "--iters", "500", "--out", dir.file("c.csv")}).code == kExitOk);
  REQUIRE(run({"solve", "--method", "adaptive", "--iters", "500", "--out", dir.file("d.csv")}).code == kExitOk);
  CHECK(slurp(dir.file("c.csv")) == slurp(dir.file("d.csv")));
}

TEST_CASE("other subcommands") {
  TempDir dir;
  const auto rates = run({"rates", "--iters", "3000", "--fit-lo", "100", "--pairs", "[[1, 1], [0.5, 1]]", "--jobs", "2",
                          "--out", dir.file("r.csv")});
  INFO(rates.err);
  CHECK(rates.code == kExitOk);
  const auto rt = load_csv(dir.file("r.csv"));
  CHECK(rt.rows.size() == 2);
  CHECK(rt.header.size() == 6);

  const auto worst = run({"worstcase", "--gamma", "1", "--p", "1", "--t-max", "50", "--points", "50"});
  CHECK(worst.code == kExitOk);

  const auto limit = run({"limitcheck", "--h-list", "[0.1, 0.05, 0.025]"});
  CHECK(limit.code == kExitOk);
  CHECK(limit.summary()["bounds_ok"]["deviations_shrink"] == true);

  const auto adaptive = run({"solve", "--method", "adaptive", "--op", "scaled_identity", "--op-mu", "0.2", "--iters",
                             "400"});
  CHECK(adaptive.code == kExitOk);
  CHECK(adaptive.summary()["bounds_ok"].size() == 5);
}
