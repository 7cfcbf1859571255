#include <facerec/bench.hpp>
#include <facerec/cli.hpp>
#include <gtest/gtest.h>
#include <json.hpp>

#include <fstream>
#include <sstream>

#include "test_support.hpp"

namespace facerec {
namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir("cli");
    const CliRun r = run({"make-synth", (dir_->path() / "syn").string(), "--classes", "3", "--probes-per-class", "2",
                       "--seed", "5"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() { delete dir_; }
  static std::string root() { return (dir_->path() / "syn").string(); }
  static testing::TempDir* dir_;
};

testing::TempDir* CliTest::dir_ = nullptr;

TEST(Cli, UsageErrorsExitWithOne) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({"bench"}).code, kExitUsage);
  EXPECT_EQ(run({"identify", "x.pgm", "--gallery", "g", "--format", "xml"}).code, kExitUsage);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
}

TEST(Cli, RuntimeErrorsExitWithTwo) {
  const CliRun r = run({"degrade", "/nonexistent/in.pgm", "/tmp/out.pgm"});
  EXPECT_EQ(r.code, kExitRuntime);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
}

TEST_F(CliTest, MakeSynthWritesTheLayout) {
  EXPECT_TRUE(std::filesystem::exists(dir_->path() / "syn" / "gallery" / "s01" / "g00.pgm"));
  EXPECT_TRUE(std::filesystem::exists(dir_->path() / "syn" / "probe" / "s03" / "p01.pgm"));
}

TEST_F(CliTest, IdentifyFindsTheProbeClass) {
  const std::string probe = root() + "/probe/s02/p00.pgm";
  const CliRun r = run({"identify", probe, "--gallery", root(), "--tsf-radius", "1", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["best_class"], "s02");
  EXPECT_EQ(j["per_class"].size(), 3u);
  const CliRun table = run({"identify", probe, "--gallery", root(), "--tsf-radius", "1", "--algo", "brfr"});
  ASSERT_EQ(table.code, 0) << table.err;
  EXPECT_NE(table.out.find("best: s02 (brfr)"), std::string::npos) << table.out;
}

TEST_F(CliTest, ExpressionPipelineAtStrengthZeroMatchesIlluminationPipeline) {
  const std::string probe = root() + "/probe/s01/p01.pgm";
  const CliRun a = run({"identify", probe, "--gallery", root(), "--tsf-radius", "1", "--algo", "birfr", "--format", "csv"});
  const CliRun b = run({"identify", probe, "--gallery", root(), "--tsf-radius", "1", "--algo", "biefr", "--fer-strength",
                     "0", "--format", "csv"});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
}

TEST_F(CliTest, BenchCsvIsIndependentOfThreadCount) {
  const auto one = dir_->path() / "one.csv";
  const auto eight = dir_->path() / "eight.csv";
  const std::vector<std::string> common = {"bench", root(), "--tsf-radius", "1", "--degrade", "--sigma", "0",
                                           "--tsf-mode", "random-sparse", "--blur-radius", "1", "--relight"};
  auto args = common;
  args.insert(args.end(), {"--threads", "1", "--csv", one.string()});
  ASSERT_EQ(run(args).code, 0);
  args = common;
  args.insert(args.end(), {"--threads", "8", "--csv", eight.string()});
  ASSERT_EQ(run(args).code, 0);
  EXPECT_EQ(slurp(one), slurp(eight));
  EXPECT_NO_THROW(parse_report_csv(slurp(one)));
}

TEST_F(CliTest, ConfigFileSuppliesOptions) {
  const auto cfg = dir_->path() / "run.ini";
  std::ofstream(cfg) << "tsf-radius=1\nalgo=brfr\n";
  const std::string probe = root() + "/probe/s03/p00.pgm";
  const CliRun r = run({"--config", cfg.string(), "identify", probe, "--gallery", root()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("(brfr)"), std::string::npos) << r.out;
}

TEST_F(CliTest, DegradeAndTrainWeights) {
  const auto out = dir_->path() / "deg.pgm";
  ASSERT_EQ(run({"degrade", root() + "/gallery/s01/g00.pgm", out.string(), "--sigma", "2", "--seed", "3"}).code, 0);
  EXPECT_EQ(load_image(out).width(), 64);
  const auto wfile = dir_->path() / "w.txt";
  const CliRun r = run({"train-weights", root(), "--out", wfile.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_weight_map(wfile).blocks_x(), 8);
}

TEST_F(CliTest, NormalMapOption) {
  const std::string probe = root() + "/probe/s01/p00.pgm";
  const auto good = dir_->path() / "n64.txt";
  save_normal_map(default_normal_map(64, 64), good);
  const CliRun ok = run({"identify", probe, "--gallery", root(), "--tsf-radius", "1", "--normals", good.string()});
  ASSERT_EQ(ok.code, 0) << ok.err;
  EXPECT_NE(ok.out.find("best: s01"), std::string::npos) << ok.out;
  const auto bad = dir_->path() / "n32.txt";
  save_normal_map(default_normal_map(32, 32), bad);
  EXPECT_EQ(run({"identify", probe, "--gallery", root(), "--normals", bad.string()}).code, kExitRuntime);
}

}  // namespace
}  // namespace facerec
