#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

// Runs the tool with `args`, capturing stdout and stderr together.
Result cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" KAMTORI_CLI_PATH "\" " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t got = 0;
  while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct TempDir {
  TempDir() {
    path = fs::temp_directory_path() / ("kamtori-cli-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
  fs::path path;
  static inline int counter = 0;
};

}  // namespace

TEST_CASE("check reports the example conditions") {
  TempDir t;
  const Result r1 = cli("--preset example1 --out " + (t / "o1") + " check");
  CHECK(r1.code == 0);
  CHECK(r1.out.find("0.0610042") != std::string::npos);  // eta = 2 / (sqrt(432) + 12)
  CHECK(r1.out.find("rank 1 of 2") != std::string::npos);
  CHECK(fs::exists(t / "o1/check.jsonl"));
  const Result r2 = cli("--preset example2 --out " + (t / "o2") + " check");
  CHECK(r2.code == 0);
  CHECK(r2.out.find("rank 2 of 2") != std::string::npos);
}

TEST_CASE("run is deterministic across thread counts") {
  TempDir t;
  const Result a = cli("--preset example1 --jobs 1 --out " + (t / "a") + " run");
  const Result b = cli("--preset example1 --jobs 3 --out " + (t / "b") + " run");
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  for (const char* f : {"tori.jsonl", "steps.jsonl", "summary.jsonl"}) {
    CHECK(slurp(t / (std::string("a/") + f)) == slurp(t / (std::string("b/") + f)));
  }
  const auto tori = nlohmann::json::parse(slurp(t / "a/tori.jsonl"));
  CHECK(tori.at("status") == "converged");
  CHECK(tori.at("drift").get<double>() == 0.0);
}

TEST_CASE("KAMTORI_OUT overrides the configured directory, --out overrides both") {
  TempDir t;
  const Result r = cli("--preset example1 run", "KAMTORI_OUT=" + (t / "env"));
  CHECK(r.code == 0);
  CHECK(fs::exists(t / "env/tori.jsonl"));
  const Result r2 = cli("--preset example1 --out " + (t / "flag") + " run", "KAMTORI_OUT=" + (t / "env2"));
  CHECK(r2.code == 0);
  CHECK(fs::exists(t / "flag/tori.jsonl"));
  CHECK_FALSE(fs::exists(t / "env2"));
}

TEST_CASE("configuration errors exit with code 2 and a line number") {
  TempDir t;
  {
    std::ofstream cfg(t / "bad.yaml");
    cfg << "problem: {preset: example1}\nnumerics:\n  gamma0: 0.1\n  colour: blue\n";
  }
  const Result r = cli("--config " + (t / "bad.yaml") + " run");
  CHECK(r.code == 2);
  CHECK(r.out.find("bad.yaml:4:3: numerics.colour") != std::string::npos);
  CHECK(cli("--config " + (t / "missing.yaml") + " run").code == 2);
  CHECK(cli("--preset example9 run").code == 2);
  CHECK(cli("--preset example1 frobnicate").code == 2);
}

TEST_CASE("a YAML file drives the same run as the preset flag") {
  TempDir t;
  const Result dump = cli("--preset example1 --dump-config");
  REQUIRE(dump.code == 0);
  {
    std::ofstream cfg(t / "cfg.yaml");
    cfg << dump.out;
  }
  REQUIRE(cli("--config " + (t / "cfg.yaml") + " --out " + (t / "a") + " run").code == 0);
  REQUIRE(cli("--preset example1 --out " + (t / "b") + " run").code == 0);
  CHECK(slurp(t / "a/tori.jsonl") == slurp(t / "b/tori.jsonl"));
}

TEST_CASE("verify reads the run records") {
  TempDir t;
  REQUIRE(cli("--preset example1 --out " + (t / "o") + " run").code == 0);
  const Result v = cli("--preset example1 --out " + (t / "o") + " verify");
  CHECK(v.code == 0);
  const auto rec = nlohmann::json::parse(slurp(t / "o/verify.jsonl"));
  CHECK(rec.at("invariance_residual").get<double>() < 1e-8);
  CHECK(rec.at("invariance_residual_probe").get<double>() > 1e4 * rec.at("invariance_residual").get<double>());
  CHECK(rec.at("rotation_error").get<double>() < 1e-6);
  const Result none = cli("--preset example1 --out " + (t / "empty") + " verify");
  CHECK(none.code != 0);
}

TEST_CASE("sieve writes the exclusion table") {
  TempDir t;
  const Result r = cli("--preset example1 --out " + (t / "s") + " sieve");
  CHECK(r.code == 0);
  CHECK(fs::exists(t / "s/sieve.jsonl"));
  CHECK(r.out.find("slope") != std::string::npos);
}
