#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pancraft/error.hpp"
#include "pancraft/parallel.hpp"
#include "pancraft_cli/cli.hpp"
#include "pancraft_cli/run_config.hpp"

using namespace pancraft;
using namespace pancraft::cli;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "pancraft_tests" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("cli argument errors") {
  CHECK(run(std::vector<std::string>{}) == kConfigError);
  CHECK(run({"bogus"}) == kConfigError);
  CHECK(run({"gen-data"}) == kConfigError);
  CHECK(run({"train", "--profile", "huge", "--data", "x", "--out", "y"}) == kConfigError);
  CHECK(run({"train", "--out", "y"}) == kConfigError);
  CHECK(run({"ablate", "--grid", "12"}) == kConfigError);
}

TEST_CASE("cli data errors") {
  const fs::path d = fresh_dir("cli_errors");
  CHECK(run({"train", "--data", (d / "missing").string(), "--out", (d / "run").string()}) == kDataError);
  CHECK(run({"infer", "--ckpt", (d / "none.ckpt").string(), "--in", d.string(), "--out", d.string()}) == kDataError);
  CHECK(run({"gen-data", "--out", (d / "bad").string(), "--size", "30"}) == kDataError);
}

TEST_CASE("cli pipeline") {
  const fs::path d = fresh_dir("cli_pipeline");
  const std::string data = (d / "data").string(), run_dir = (d / "run").string();
  REQUIRE(run({"gen-data", "--out", data, "--scenes", "1", "--size", "64", "--seed", "7", "--export-png"}) == kOk);
  CHECK(fs::exists(d / "data" / "png" / "7_hrms.png"));
  REQUIRE(run({"train", "--data", data, "--out", run_dir, "--iters", "3", "--batch", "2", "--checkpoint-every", "2",
               "--quiet", "--deterministic"}) == kOk);
  CHECK(fs::exists(d / "run" / "final.ckpt"));
  CHECK(fs::exists(d / "run" / "checkpoints" / "iter_000002.ckpt"));
  CHECK(fs::exists(d / "run" / "resolved_config.json"));
  int lines = 0;
  {
    std::ifstream log(d / "run" / "train_log.jsonl");
    for (std::string l; std::getline(log, l);) ++lines;
  }
  CHECK(lines == 3);

  const std::string pred = (d / "pred").string();
  REQUIRE(run({"infer", "--ckpt", run_dir + "/final.ckpt", "--in", data, "--out", pred}) == kOk);
  CHECK(fs::exists(d / "pred" / "s7_p0.pct1"));
  REQUIRE(run({"eval", "--pred", pred, "--ref", data, "--out", (d / "eval").string()}) == kOk);
  const std::string csv = slurp(d / "eval" / "metrics.csv");
  CHECK(csv.rfind("name,", 0) == 0);
  CHECK(csv.find("s7_p0,") != std::string::npos);
  CHECK(fs::exists(d / "eval" / "metrics.json"));

  // Missing prediction for one of the samples.
  fs::remove(d / "pred" / "s7_p0.pct1");
  CHECK(run({"eval", "--pred", pred, "--ref", data}) == kDataError);
}

TEST_CASE("cli resume continues the log") {
  const fs::path d = fresh_dir("cli_resume");
  const std::string data = (d / "data").string();
  REQUIRE(run({"gen-data", "--out", data, "--scenes", "1", "--size", "64"}) == kOk);
  const std::string a = (d / "a").string(), b = (d / "b").string();
  REQUIRE(run({"train", "--data", data, "--out", a, "--iters", "4", "--batch", "2", "--quiet", "--deterministic"}) == kOk);
  REQUIRE(run({"train", "--data", data, "--out", b, "--iters", "4", "--batch", "2", "--checkpoint-every", "2", "--quiet",
               "--deterministic"}) == kOk);
  const std::string c = (d / "c").string();
  REQUIRE(run({"train", "--data", data, "--out", c, "--iters", "4", "--batch", "2", "--quiet", "--deterministic",
               "--resume", b + "/checkpoints/iter_000002.ckpt"}) == kOk);
  CHECK(slurp(d / "a" / "final.ckpt") == slurp(d / "c" / "final.ckpt"));
  set_deterministic(false);
}

TEST_CASE("run config json") {
  const RunConfig desk = RunConfig::for_profile("desk");
  CHECK(desk.model.channels == 16);
  CHECK(RunConfig::for_profile("paper").model.channels == 128);
  CHECK_THROWS_AS(RunConfig::for_profile("tiny"), ConfigError);
  RunConfig r = desk;
  r.train.iters = 12;
  r.train.warmup = 3;
  r.out = "somewhere";
  const RunConfig back = RunConfig::from_json(r.to_json());
  CHECK(back.train == r.train);
  CHECK(back.model == r.model);
  CHECK(back.out == r.out);
  CHECK_THROWS_AS(RunConfig::from_json("{\"modle\": {}}"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json("{\"train\": {\"iters\": \"x\"}}"), ConfigError);
  CHECK(RunConfig::from_json("{\"profile\": \"desk\"}", "paper").model.channels == 128);
}
