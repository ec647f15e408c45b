#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "helpers.h"
#include "unireid/data/manifest.h"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

Outcome run_cli(const std::string& args, const fs::path& scratch, const std::string& env = "") {
  const char* bin = std::getenv("UNIREID_CLI");
  REQUIRE_MESSAGE(bin != nullptr, "UNIREID_CLI is not set");
  const auto out = scratch / "stdout.txt";
  const auto err = scratch / "stderr.txt";
  const std::string cmd = env + " " + quote(bin) + " " + args + " >" + quote(out.string()) +
                          " 2>" + quote(err.string());
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = slurp(out);
  o.err = slurp(err);
  return o;
}

bool single_error_line(const std::string& err) {
  return err.rfind("error: ", 0) == 0 && err.find('\n') == err.size() - 1;
}

fs::path write_config(const fs::path& dir, const std::string& extra = "") {
  const auto path = dir / "run.toml";
  std::ofstream(path) << testing::tiny_toml() << extra;
  return path;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit nonzero with one line") {
  testing::TempDir dir("cli_usage");
  auto o = run_cli("", dir.path());
  CHECK(o.code != 0);
  CHECK(single_error_line(o.err));
  o = run_cli("train --stage 3", dir.path());
  CHECK(o.code != 0);
  CHECK(single_error_line(o.err));
}

TEST_CASE("configuration errors are machine-parsable") {
  testing::TempDir dir("cli_cfg");
  const auto bad = dir.path() / "bad.toml";
  std::ofstream(bad) << "[loss]\nlambda9 = 1\n";
  auto o = run_cli("train --config " + quote(bad.string()), dir.path());
  CHECK(o.code == 2);
  CHECK(single_error_line(o.err));
  CHECK(o.err.rfind("error: config: ", 0) == 0);

  const auto cfg = write_config(dir.path(), "\n[ablation]\nenable_hpl = false\nenable_cmpr = true\n");
  o = run_cli("train --config " + quote(cfg.string()), dir.path());
  CHECK(o.code == 2);
  CHECK(o.err.rfind("error: config: ", 0) == 0);
}

TEST_CASE("generate honours counts, seeds and environment overrides") {
  testing::TempDir dir("cli_gen");
  const auto cfg = write_config(dir.path());
  const auto a = dir.path() / "a";
  const auto b = dir.path() / "b";
  auto o = run_cli("generate --config " + quote(cfg.string()) + " --identities 8 --images 8 --out " +
                       quote(a.string()),
                   dir.path());
  REQUIRE(o.code == 0);
  auto m = unireid::load_manifest(a / "data" / "t2i" / "manifest.json");
  CHECK(m.entries.size() == 64);
  o = run_cli("generate --config " + quote(cfg.string()) + " --identities 8 --images 8 --out " +
                  quote(b.string()),
              dir.path());
  REQUIRE(o.code == 0);
  for (const char* f : {"data/t2i/manifest.json", "data/i2i/manifest.json",
                        "data/i2i/images/0003_05.png"}) {
    CHECK(slurp(a / f) == slurp(b / f));
  }

  const auto c = dir.path() / "c";
  o = run_cli("generate --config " + quote(cfg.string()) + " --out " + quote(c.string()),
              dir.path(), "HPL_DATA_IMAGES_PER_IDENTITY=5");
  REQUIRE(o.code == 0);
  CHECK(unireid::load_manifest(c / "data" / "i2i" / "manifest.json").entries.size() == 40);
}

TEST_CASE("train, evaluate and report from one config") {
  testing::TempDir dir("cli_flow");
  const auto cfg = write_config(dir.path());
  const auto run = dir.path() / "run";
  const std::string common = "--config " + quote(cfg.string()) + " --out " + quote(run.string());

  auto o = run_cli("train --stage 2 " + common, dir.path());
  CHECK(o.code == 2);
  CHECK(single_error_line(o.err));

  REQUIRE(run_cli("generate " + common, dir.path()).code == 0);
  o = run_cli("train " + common, dir.path());
  REQUIRE_MESSAGE(o.code == 0, o.err);
  CHECK(fs::exists(run / "stage1" / "metrics.csv"));
  CHECK(fs::exists(run / "stage2" / "metrics.csv"));

  o = run_cli("evaluate " + common, dir.path());
  REQUIRE(o.code == 0);
  auto both = nlohmann::json::parse(o.out);
  CHECK(both.size() == 2);
  auto again = run_cli("evaluate " + common, dir.path());
  CHECK(again.out == o.out);
  o = run_cli("evaluate --task i2i " + common, dir.path());
  auto i2i = nlohmann::json::parse(o.out);
  REQUIRE(i2i.size() == 1);
  CHECK(i2i[0]["task"] == "i2i");

  o = run_cli("report " + quote(run.string()) + " --out " + quote((dir.path() / "rep").string()),
              dir.path());
  CHECK(o.code == 0);
  CHECK(fs::exists(dir.path() / "rep" / "ablation.csv"));
  o = run_cli("report " + quote((dir.path() / "nowhere").string()) + " --out " +
                  quote((dir.path() / "rep2").string()),
              dir.path());
  CHECK(o.code == 2);
  CHECK(single_error_line(o.err));
  CHECK(o.err.find("nowhere") != std::string::npos);
}

}  // TEST_SUITE
