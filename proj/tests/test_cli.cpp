#include "fixtures.hpp"

#include "frugalnn/synthetic.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using frugalnn::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

CliRun run(const TempDir& dir, const std::string& args, const std::string& env = "") {
  const auto out = dir.path / "stdout.txt", err = dir.path / "stderr.txt";
  const std::string cmd = env + " " + FRUGALNN_CLI + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

fs::path write_blobs(const TempDir& dir, int n) {
  frugalnn::BlobSpec spec;
  spec.n_points = n;
  spec.seed = 1;
  const auto path = dir.path / "data.csv";
  std::ofstream out(path);
  frugalnn::write_dataset_csv(frugalnn::make_blobs(spec), out);
  return path;
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Cli, MalformedCsvNamesTheCell) {
  TempDir dir("cli-bad");
  std::ofstream(dir.path / "bad.csv") << "a,b\n1,2\n3,oops\n";
  const CliRun r = run(dir, "prepare --dataset " + (dir.path / "bad.csv").string() + " -o " + (dir.path / "out").string());
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("bad.csv:3"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("'oops'"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrorsExitOne) {
  TempDir dir("cli-usage");
  EXPECT_EQ(run(dir, "prepare --no-such-flag").code, 1);
  EXPECT_EQ(run(dir, "").code, 1);
  EXPECT_EQ(run(dir, "prepare").code, 1);  // no dataset
  EXPECT_EQ(run(dir, "--help").code, 0);
  EXPECT_EQ(run(dir, "sweep --agents oracle -o " + dir.path.string()).code, 1);
  EXPECT_EQ(run(dir, "prepare --dataset x.csv", "FRUGALNN_SEED=abc").code, 1);
  std::ofstream(dir.path / "conf.json") << "{ broken";
  EXPECT_EQ(run(dir, "prepare --config " + (dir.path / "conf.json").string()).code, 1);
}

TEST(Cli, PrepareSplitsAndIsReproducible) {
  TempDir dir("cli-prepare");
  const auto data = write_blobs(dir, 303);
  const auto out = dir.path / "out";
  const CliRun first = run(dir, "prepare --dataset " + data.string() + " --seed 4 -o " + out.string());
  ASSERT_EQ(first.code, 0) << first.err;
  EXPECT_NE(first.out.find("train 243 / test 60 rows"), std::string::npos) << first.out;
  EXPECT_EQ(count_lines(slurp(out / "train.csv")), 244);
  EXPECT_EQ(count_lines(slurp(out / "test.csv")), 61);

  std::map<std::string, std::string> before;
  for (const char* f : {"train.csv", "test.csv", "stats.json", "costs.json", "train.csv.meta.json"})
    before[f] = slurp(out / f);
  ASSERT_EQ(run(dir, "prepare --dataset " + data.string() + " --seed 4 -o " + out.string()).code, 0);
  for (const auto& [f, text] : before) EXPECT_EQ(slurp(out / f), text) << f;

  // FRUGALNN_SEED stands in for --seed
  const auto env_out = dir.path / "env";
  ASSERT_EQ(run(dir, "prepare --dataset " + data.string() + " -o " + env_out.string(), "FRUGALNN_SEED=4").code, 0);
  EXPECT_EQ(slurp(env_out / "train.csv"), before["train.csv"]);
  const auto other = dir.path / "other";
  ASSERT_EQ(run(dir, "prepare --dataset " + data.string() + " --seed 5 -o " + other.string(), "FRUGALNN_SEED=4").code, 0);
  EXPECT_NE(slurp(other / "train.csv"), before["train.csv"]);
}

TEST(Cli, FullPipeline) {
  TempDir dir("cli-pipeline");
  const auto data = write_blobs(dir, 200);
  const std::string out = " -o " + (dir.path / "out").string();
  const std::string small = " --episodes 40 --hidden 16 --batch 16";
  ASSERT_EQ(run(dir, "prepare --dataset " + data.string() + out).code, 0);
  ASSERT_EQ(run(dir, "cluster -K 4" + out).code, 0);
  ASSERT_EQ(run(dir, "build-tree" + out).code, 0);
  const CliRun train = run(dir, "train-dqn --budget 0.4" + small + out);
  ASSERT_EQ(train.code, 0) << train.err;

  const CliRun sweep = run(dir, "sweep --agents random --budgets 0.2,0.5 --seeds 1,2" + out);
  ASSERT_EQ(sweep.code, 0) << sweep.err;
  const std::string report = slurp(dir.path / "out/report.csv");
  EXPECT_EQ(count_lines(report), 1 + 2 * 2);
  EXPECT_EQ(report.find("dqn"), std::string::npos);

  const CliRun all = run(dir, "sweep --budgets 0.2,0.5 --trace" + small + out);
  ASSERT_EQ(all.code, 0) << all.err;
  EXPECT_EQ(count_lines(slurp(dir.path / "out/report.csv")), 1 + 2 * 3);
  EXPECT_EQ(count_lines(slurp(dir.path / "out/trace.csv")), 1 + 2 * 3 * 40);

  const CliRun tree = run(dir, "print-tree" + out);
  ASSERT_EQ(tree.code, 0) << tree.err;
  EXPECT_EQ(tree.out.rfind("split #0 ", 0), 0u) << tree.out;

  // every artifact records the configuration it came from
  const auto meta = nlohmann::json::parse(slurp(dir.path / "out/report.csv.meta.json"));
  EXPECT_EQ(meta["config_hash"].get<std::string>().size(), 16u);
  EXPECT_EQ(meta["config"]["budgets"], nlohmann::json::parse("[0.2,0.5]"));
  const auto model = nlohmann::json::parse(slurp(dir.path / "out/dqn_model.json"));
  EXPECT_EQ(model["context"]["config"]["budget"], 0.4);
  EXPECT_TRUE(nlohmann::json::parse(slurp(dir.path / "out/tree.json")).contains("config_hash"));
  EXPECT_TRUE(nlohmann::json::parse(slurp(dir.path / "out/clustering.json")).contains("config_hash"));
  EXPECT_TRUE(fs::exists(dir.path / "out/reward_trace.csv.meta.json"));
}

TEST(Cli, MissingArtifactsAreDataErrors) {
  TempDir dir("cli-missing");
  const std::string out = " -o " + (dir.path / "nothing").string();
  EXPECT_EQ(run(dir, "sweep" + out).code, 2);
  EXPECT_EQ(run(dir, "cluster" + out).code, 2);
  EXPECT_EQ(run(dir, "serve --port 0" + out).code, 2);
}
