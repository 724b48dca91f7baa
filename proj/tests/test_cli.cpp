#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <json.hpp>

#include "qms/cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace qms::cli;

namespace {

const char* kPair = R"({
  "seed": 7,
  "q": 2,
  "space": {"points": ["x1", "x2"]},
  "rho": [1.0, 0.5, 1.0],
  "kernel": {"family": "custom"},
  "measures": {"sigma": {"uniform": 1}, "omega": {"uniform": 1}},
  "fields": {"f": {"potential": "omega", "scale": 0.01}, "big": {"constant": 10}},
  "solve": {"f": "f"},
  "znorm": {"f": "f"},
  "criteria": {"epsilon": 0.01, "structural": false},
  "capacity": {"sets": [["x1"]]}
})";

class Sandbox {
 public:
  Sandbox() {
    static int counter = 0;
    root_ = fs::temp_directory_path() / ("qms_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(root_);
  }
  ~Sandbox() {
    std::error_code ec;
    fs::remove_all(root_, ec);
  }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(root_ / name, std::ios::binary) << text;
    return root_ / name;
  }
  fs::path dir(const std::string& name) const { return root_ / name; }

 private:
  fs::path root_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cmd(const std::string& command, const fs::path& scenario, const fs::path& out, std::string* log = nullptr,
            std::optional<std::size_t> threads = std::nullopt) {
  RunOptions o;
  o.command = command;
  o.scenario = scenario;
  o.out = out;
  o.threads = threads;
  std::ostringstream err;
  const int code = run(o, err);
  if (log) *log = err.str();
  return code;
}

json with(const json& base, const json& patch) {
  json j = base;
  j.merge_patch(patch);
  return j;
}

}  // namespace

TEST_CASE("hash is FNV-1a") {
  CHECK(fnv1a64("") == 14695981039346656037ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(commands().size() == 7);
}

TEST_CASE("every command runs on the pair") {
  Sandbox box;
  const auto sc = box.write("pair.json", kPair);
  for (const char* c : {"check-kernel", "solve", "znorm", "criteria", "capacity"}) {
    CAPTURE(c);
    const auto out = box.dir(c);
    REQUIRE(run_cmd(c, sc, out) == kExitOk);
    const json r = json::parse(slurp(out / "report.json"));
    CHECK(r.at("schemaVersion") == 1);
    CHECK(r.at("command") == c);
    CHECK(r.at("seed") == 7);
    CHECK(r.at("scenarioHash").get<std::string>().size() == 16);
    CHECK(fs::exists(out / "witnesses.csv"));
  }
  const json cap = json::parse(slurp(box.dir("capacity") / "report.json"));
  CHECK(cap.dump().find("0.2") != std::string::npos);
  const json crit = json::parse(slurp(box.dir("criteria") / "report.json"));
  CHECK(crit.at("result").at("pointwiseC").at("value").get<double>() == doctest::Approx(9.0));
  const json kern = json::parse(slurp(box.dir("check-kernel") / "report.json"));
  CHECK(kern.at("result").at("kappa").at("used").get<double>() == 1.0);
}

TEST_CASE("identical inputs give identical bytes") {
  Sandbox box;
  const auto sc = box.write("pair.json", kPair);
  REQUIRE(run_cmd("criteria", sc, box.dir("a"), nullptr, 1) == kExitOk);
  REQUIRE(run_cmd("criteria", sc, box.dir("b"), nullptr, 4) == kExitOk);
  CHECK(slurp(box.dir("a") / "report.json") == slurp(box.dir("b") / "report.json"));
  CHECK(slurp(box.dir("a") / "witnesses.csv") == slurp(box.dir("b") / "witnesses.csv"));
}

TEST_CASE("input errors exit with 1") {
  Sandbox box;
  std::string log;
  const auto bad = box.write("bad.json", "{\n  \"q\": 2,\n  \"space\": [,\n}");
  CHECK(run_cmd("solve", bad, box.dir("o1"), &log) == kExitInput);
  CHECK(log.find("line 3") != std::string::npos);

  const json base = json::parse(kPair);
  const auto missing = box.write("missing.json", with(base, {{"solve", {{"sigma", "nope"}}}}).dump());
  CHECK(run_cmd("solve", missing, box.dir("o2"), &log) == kExitInput);
  CHECK(log.find("nope") != std::string::npos);

  CHECK(run_cmd("solve", box.dir("absent.json"), box.dir("o3")) == kExitInput);
  CHECK(run_cmd("frobnicate", missing, box.dir("o4")) == kExitInput);
  const auto asym = box.write("neg.json", with(base, {{"rho", {1.0, -0.5, 1.0}}}).dump());
  CHECK(run_cmd("check-kernel", asym, box.dir("o5")) == kExitInput);
}

TEST_CASE("certified failures exit with 2") {
  Sandbox box;
  const json base = json::parse(kPair);
  // rho(a,c) = 10 against a detour of 2 needs kappa 5
  json tri = with(base, {{"space", {{"points", {"a", "b", "c"}}}},
                         {"rho", {1, 1, 10, 1, 1, 1}},
                         {"kappa", {{"declared", 2}}},
                         {"measures", {{"sigma", {{"uniform", 1}}}, {"omega", {{"uniform", 1}}}}}});
  const auto sc = box.write("tri.json", tri.dump());
  CHECK(run_cmd("check-kernel", sc, box.dir("k")) == kExitCertifiedFailure);
  const json r = json::parse(slurp(box.dir("k") / "report.json"));
  CHECK(r.at("exitCode") == 2);
  CHECK(r.at("result").at("violation").at("ratio").get<double>() == doctest::Approx(5.0));
  CHECK(run_cmd("solve", sc, box.dir("s")) == kExitCertifiedFailure);

  const auto small = box.write("small.json", with(base, {{"solve", {{"f", "big"}, {"method", "small"}}}}).dump());
  CHECK(run_cmd("solve", small, box.dir("h")) == kExitCertifiedFailure);
}

TEST_CASE("divergence is a result, not an error") {
  Sandbox box;
  const json base = json::parse(kPair);
  const auto sc = box.write("div.json", with(base, {{"solve", {{"f", "big"}}}}).dump());
  REQUIRE(run_cmd("solve", sc, box.dir("d")) == kExitOk);
  const json r = json::parse(slurp(box.dir("d") / "report.json"));
  CHECK(r.at("result").at("solve").at("status") == "diverged");
}

TEST_CASE("seed override is recorded") {
  Sandbox box;
  const auto sc = box.write("pair.json", kPair);
  RunOptions o;
  o.command = "check-kernel";
  o.scenario = sc;
  o.out = box.dir("seed");
  o.seed = 99;
  std::ostringstream err;
  REQUIRE(run(o, err) == kExitOk);
  CHECK(json::parse(slurp(box.dir("seed") / "report.json")).at("seed") == 99);
}

TEST_CASE("interval pipelines") {
  Sandbox box;
  const json sc = {{"q", 2},
                   {"dirichlet", {{"grid", {{"cells", 32}}}, {"sigma", 0}, {"omega", 1}, {"richardson", true}}},
                   {"battery", {{"maxSets", 8}, {"maxInterval", 4}}}};
  const auto path = box.write("interval.json", sc.dump());
  REQUIRE(run_cmd("dirichlet1d", path, box.dir("d")) == kExitOk);
  const json r = json::parse(slurp(box.dir("d") / "report.json"));
  CHECK(r.dump().find("transformGap") != std::string::npos);
  json battery = sc;
  battery["dirichlet"]["sigma"] = 1;
  const auto bpath = box.write("battery.json", battery.dump());
  CHECK(run_cmd("battery", bpath, box.dir("b")) == kExitOk);
}
