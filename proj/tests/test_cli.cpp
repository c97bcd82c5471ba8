#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(MEMBRELAX_CLI) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult res;
  std::array<char, 4096> buf{};
  size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) res.out.append(buf.data(), n);
  const int status = pclose(pipe);
  res.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::string models_dir() { return MEMBRELAX_MODELS_DIR; }

std::string tmp_file(const std::string& name, const std::string& content) {
  const char* dir = std::getenv("TMPDIR");
  const std::string path = std::string(dir ? dir : "/tmp") + "/" + name;
  std::ofstream out(path);
  out << content;
  return path;
}

const char* kTwoRegionScene = R"({
  "domain": [0, 0, 1, 1],
  "regions": [
    {"polygon": [[0,0],[1,0],[1,0.5],[0,0.5]]},
    {"polygon": [[0,0.5],[1,0.5],[1,1],[0,1]], "c": [1, 0, 0]}
  ],
  "jumps": [{"p0": [0,0.5], "p1": [1,0.5], "minus": 0, "plus": 1}]
})";

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run("").code == 2);
  CHECK(run("density").code == 2);               // --model is required
  CHECK(run("frobnicate").code == 2);
  CHECK(run("density --model " + models_dir() + "/convex.json --format yaml").code == 2);
  CHECK(run("--help").code == 0);
}

TEST_CASE("density: point evaluation and missing model") {
  const auto res = run("density --model " + models_dir() + "/convex.json --xi 0 --b 0");
  CHECK(res.code == 0);
  CHECK(std::stod(res.out) == doctest::Approx(1.0));

  const auto rec = run("density --model " + models_dir() + "/convex.json --xi-unit --recession");
  CHECK(rec.code == 0);
  CHECK(std::stod(rec.out) == doctest::Approx(1.0).epsilon(1e-3));

  CHECK(run("density --model /nonexistent.json --xi 0 --b 0").code == 2);
  CHECK(run("density --model " + models_dir() + "/convex.json --samples /nonexistent.csv").code ==
        2);
}

TEST_CASE("cell qstar: convex closed form") {
  const auto res =
      run("cell qstar --model " + models_dir() + "/convex.json --xi 0 --b 0,0,1");
  CHECK(res.code == 0);
  CHECK(std::stod(res.out) == doctest::Approx(std::sqrt(2.0)).epsilon(0.02));
}

TEST_CASE("cell sweep: header plus one row per sample") {
  const std::string samples = tmp_file("membrelax_cli_samples.csv",
                                       "xi11,xi12,xi21,xi22,xi31,xi32,b1,b2,b3\n"
                                       "0,0,0,0,0,0,0,0,1\n");
  const auto res =
      run("cell sweep --model " + models_dir() + "/convex.json --samples " + samples);
  CHECK(res.code == 0);
  CHECK(res.out.rfind("xi11,xi12,xi21,xi22,xi31,xi32,b1,b2,b3,value,lambda,iters,flag\n", 0) ==
        0);
  CHECK(std::count(res.out.begin(), res.out.end(), '\n') == 2);
  std::remove(samples.c_str());
}

TEST_CASE("membrane: scene energy and scene errors") {
  const std::string scene = tmp_file("membrelax_cli_scene.json", kTwoRegionScene);
  const auto res = run("membrane --model " + models_dir() + "/convex.json --scene " + scene);
  CHECK(res.code == 0);
  CHECK(res.out.find("\"total\"") != std::string::npos);
  const auto total_pos = res.out.find("\"total\":");
  const double total = std::stod(res.out.substr(total_pos + 8));
  CHECK(total == doctest::Approx(2.0).epsilon(0.03));
  std::remove(scene.c_str());

  const std::string bad =
      tmp_file("membrelax_cli_bad_scene.json", "{\"domain\": [0,0,1,1], \"regions\": []}");
  CHECK(run("membrane --model " + models_dir() + "/convex.json --scene " + bad).code == 4);
  std::remove(bad.c_str());
}

TEST_CASE("gamma: non-decreasing eps list is a usage error") {
  const std::string scene = tmp_file("membrelax_cli_scene2.json", kTwoRegionScene);
  CHECK(run("gamma --model " + models_dir() + "/convex.json --scene " + scene +
            " --eps 0.125,0.25")
            .code == 2);
  std::remove(scene.c_str());
}

TEST_CASE("verify: subset runs and is deterministic for a fixed seed") {
  const std::string args = "verify --only convex-collapse --seed 3";
  const auto a = run(args);
  CHECK(a.code == 0);
  CHECK(a.out.rfind("PASS convex-collapse", 0) == 0);
  const auto b = run(args);
  CHECK(b.out == a.out);

  CHECK(run("verify --only no-such-check").code == 2);
}
