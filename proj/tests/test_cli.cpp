#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>

#include "support.hpp"

using namespace glide;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome cli(const std::string& args) {
  const auto dir = test::temp_dir("cli");
  const auto capture = dir / "capture.txt";
  const std::string cmd = std::string(GLIDE_CLI_PATH) + " " + args + " > " + capture.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, test::slurp(capture)};
}

}  // namespace

TEST(Cli, RunWritesLogAndMetrics) {
  const auto dir = test::temp_dir("cli");
  const auto log = dir / "run.jsonl";
  const Outcome o = cli("run --config " + test::scenario_path("straight_glide").string() + " --seed 3 --out " +
                        log.string());
  EXPECT_EQ(o.code, 0) << o.out;
  EXPECT_NE(o.out.find("\"status\":\"arrived\""), std::string::npos) << o.out;
  EXPECT_TRUE(std::filesystem::exists(dir / "run.metrics.json"));

  const auto again = dir / "again.jsonl";
  const Outcome re = cli("run --inputs " + log.string() + " --config " +
                         test::scenario_path("straight_glide").string() + " --out " + again.string());
  EXPECT_EQ(re.code, 0) << re.out;
  EXPECT_EQ(test::slurp(again), test::slurp(log));

  const Outcome rp = cli("replay " + log.string());
  EXPECT_EQ(rp.code, 0) << rp.out;
  EXPECT_NE(rp.out.find("\"status\":\"arrived\""), std::string::npos);
}

TEST(Cli, ExitCodes) {
  const auto dir = test::temp_dir("cli");
  const Outcome missing = cli("run --config " + (dir / "nope.json").string());
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.out.find("nope.json"), std::string::npos) << missing.out;

  EXPECT_EQ(cli("fly").code, 2);
  EXPECT_EQ(cli("run --seed notanumber").code, 2);

  std::ofstream(dir / "bad_map.json") << "{\"format\": \"glide-map/1\"}";
  const Outcome bad = cli("validate-map " + (dir / "bad_map.json").string());
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.out.find("error"), std::string::npos);
  EXPECT_EQ(cli("validate-map " + test::map_path("corridor_loop").string()).code, 0);

  std::ofstream(dir / "corrupt.jsonl") << "{\"type\":\"tick\"}\n";
  const Outcome corrupt = cli("replay " + (dir / "corrupt.jsonl").string());
  EXPECT_EQ(corrupt.code, 1);
  EXPECT_NE(corrupt.out.find("corrupt log"), std::string::npos) << corrupt.out;

  const Outcome sideways = cli("run --config " + test::scenario_path("straight_glide").string() + " --out " +
                              (dir / "t.jsonl").string() + " --mode sideways");
  EXPECT_EQ(sideways.code, 2);
}
