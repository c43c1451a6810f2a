#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fastsverl/char_model.h"
#include "fastsverl/config.h"
#include "fastsverl/errors.h"
#include "fastsverl/experiments.h"
#include "fastsverl/metrics.h"
#include "fastsverl/report.h"
#include "test_util.h"

namespace fastsverl {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::Solved;

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string FirstLine(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  return line;
}

fs::path TempDir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("fastsverl_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json Minimal() { return json{{"schema_version", 1}, {"experiment", "accuracy"}}; }

TEST(Config, MinimalUsesDefaults) {
  RunConfig c = ParseConfig(Minimal());
  EXPECT_EQ(c.env.name, "gridworld");
  EXPECT_EQ(c.char_model.batch_size, 64);
  EXPECT_DOUBLE_EQ(c.threshold, 0.01);
  EXPECT_EQ(c.seeds, std::vector<uint64_t>{0});
}

TEST(Config, UnknownKeysAreRejected) {
  json j = Minimal();
  j["unexpected"] = 1;
  EXPECT_THROW(ParseConfig(j), ConfigError);
  j = Minimal();
  j["env"] = {{"name", "gridworld"}, {"colour", "red"}};
  EXPECT_THROW(ParseConfig(j), ConfigError);
  j = Minimal();
  j["char_model"] = {{"learning_rat", 0.1}};
  EXPECT_THROW(ParseConfig(j), ConfigError);
}

TEST(Config, TypeAndRangeErrors) {
  json j = Minimal();
  j["threshold"] = "small";
  EXPECT_THROW(ParseConfig(j), ConfigError);
  j = Minimal();
  j["env"] = {{"name", "chess"}};
  EXPECT_THROW(ParseConfig(j), ConfigError);
  j = Minimal();
  j["env"] = {{"gamma", 1.5}};
  EXPECT_THROW(ParseConfig(j), ConfigError);
  j = Minimal();
  j["char_model"] = {{"batch_size", 0}};
  EXPECT_THROW(ParseConfig(j), ConfigError);
  j = Minimal();
  j["offpolicy"] = {{"is_modes", {"sometimes"}}};
  EXPECT_THROW(ParseConfig(j), ConfigError);
}

TEST(Config, SchemaVersionIsRequired) {
  json j = Minimal();
  j.erase("schema_version");
  EXPECT_THROW(ParseConfig(j), ConfigError);
  j["schema_version"] = 2;
  EXPECT_THROW(ParseConfig(j), ConfigError);
}

TEST(Config, EchoRoundTrips) {
  for (const auto& entry : fs::directory_iterator(FASTSVERL_CONFIG_DIR)) {
    RunConfig c = LoadConfig(entry.path().string());
    json echo = ToJson(c);
    EXPECT_EQ(ToJson(ParseConfig(echo)), echo) << entry.path();
  }
}

TEST(Config, ShippedConfigsBuildTheirEnvironments) {
  for (const auto& entry : fs::directory_iterator(FASTSVERL_CONFIG_DIR)) {
    RunConfig c = LoadConfig(entry.path().string());
    auto env = MakeEnvironment(c.env);
    EXPECT_GT(env->n_features(), 0);
    const auto& names = ExperimentNames();
    EXPECT_NE(std::find(names.begin(), names.end(), c.experiment), names.end());
  }
}

TEST(Config, SeedRanges) {
  EXPECT_EQ(ParseSeedRange("3"), std::vector<uint64_t>{3});
  EXPECT_EQ(ParseSeedRange("0..3"), (std::vector<uint64_t>{0, 1, 2, 3}));
  EXPECT_THROW(ParseSeedRange("5..2"), ConfigError);
  EXPECT_THROW(ParseSeedRange("a..b"), ConfigError);
}

TEST(Metrics, UpdatesToThreshold) {
  EXPECT_EQ(UpdatesToThreshold({{0, 0.005}, {10, 0.001}}, 0.01), 0);
  EXPECT_EQ(UpdatesToThreshold({{0, 1.0}, {10, 0.5}, {20, 0.009}, {30, 0.001}}, 0.01), 20);
  EXPECT_EQ(UpdatesToThreshold({{0, 1.0}, {10, 0.5}}, 0.01), kNotReached);
  EXPECT_EQ(UpdatesToThreshold({{0, 1.0}, {10, 0.01}}, 0.01), 10);
}

TEST(Metrics, SummarizeThreeSeedFixture) {
  // Values 1, 2, 6: mean 3, sample SD sqrt(7), SE sqrt(7/3), median 2.
  Aggregate a = Summarize({1.0, 2.0, 6.0});
  EXPECT_EQ(a.count, 3);
  EXPECT_DOUBLE_EQ(a.mean, 3.0);
  EXPECT_NEAR(a.se, std::sqrt(7.0 / 3.0), 1e-15);
  EXPECT_DOUBLE_EQ(a.median, 2.0);
  Aggregate one = Summarize({4.0});
  EXPECT_EQ(one.se, 0.0);
  EXPECT_DOUBLE_EQ(Median({4.0, 1.0, 3.0, 2.0}), 2.5);
  EXPECT_DOUBLE_EQ(Median({std::nan(""), 1.0, 3.0}), 2.0);
}

TEST(Metrics, ThresholdSummaryCountsUnreachedAsInfinite) {
  ThresholdSummary t = SummarizeThreshold({100, kNotReached, 300});
  EXPECT_EQ(t.reached, 2);
  EXPECT_DOUBLE_EQ(t.reached_stats.mean, 200.0);
  EXPECT_DOUBLE_EQ(t.median, 300.0);
  ThresholdSummary none = SummarizeThreshold({kNotReached, kNotReached, 5});
  EXPECT_TRUE(std::isinf(none.median));
}

TEST(Metrics, SeriesRejectsDecreasingUpdates) {
  MetricSeries s;
  s.Add(0, 10, "m", 1.0);
  s.Add(1, 0, "m", 1.0);
  s.Add(0, 0, "other", 1.0);
  EXPECT_THROW(s.Add(0, 5, "m", 1.0), ContractViolation);
  EXPECT_EQ(s.CurveFor(0, "m"), (Curve{{10, 1.0}}));
  EXPECT_EQ(s.Seeds(), (std::vector<uint64_t>{0, 1}));
}

TEST(Metrics, CsvHeaders) {
  fs::path dir = TempDir("csv_headers");
  MetricSeries series;
  series.Add(0, 0, "m", 0.5);
  series.WriteCsv((dir / "series.csv").string());
  ScalarTable t;
  t.Set(0, "k", 1.0);
  t.Set(1, "k", std::numeric_limits<double>::infinity());
  t.WriteCsv((dir / "scalars.csv").string());
  t.WriteSummaryCsv((dir / "summary.csv").string());
  EXPECT_EQ(FirstLine(dir / "series.csv"), "seed,update,metric,value");
  EXPECT_EQ(FirstLine(dir / "scalars.csv"), "seed,key,value");
  EXPECT_EQ(FirstLine(dir / "summary.csv"), "key,count,mean,se,median");

  Solved s = testing::SolvedGridworld();
  CharacteristicTable table = ExactBehaviourTable(s.dist, s.snapshot);
  table.WriteCsv((dir / "chars.csv").string());
  EXPECT_EQ(FirstLine(dir / "chars.csv"), "state_id,action,coalition_mask,value");
  ShapleyTable(table).WriteCsv((dir / "phi.csv").string());
  EXPECT_EQ(FirstLine(dir / "phi.csv"), "state_id,action,feature,phi");
  fs::remove_all(dir);
}

// The MSE of a constant-zero model equals the mean square of the dumped
// exact table, recomputed from the CSV alone.
TEST(Metrics, MseMatchesRecomputationFromCsv) {
  fs::path dir = TempDir("mse_recompute");
  Solved s = testing::SolvedMastermind222();
  CharacteristicTable table = ExactPredictionTable(s.dist, s.snapshot);
  table.WriteCsv((dir / "chars.csv").string());
  std::ifstream in(dir / "chars.csv");
  std::string line;
  std::getline(in, line);
  double total = 0.0;
  int rows = 0;
  while (std::getline(in, line)) {
    const double v = std::stod(line.substr(line.rfind(',') + 1));
    total += v * v;
    ++rows;
  }
  EXPECT_EQ(rows, table.size() * 256);
  Rng init(0);
  CharModel zero(TargetKind::kPrediction, 8, 1, {4}, -1.0, init);
  zero.net().params().setZero();
  EXPECT_NEAR(CharModelMse(zero, table, *s.sim->registry_ptr()), total / rows, 1e-9);
  fs::remove_all(dir);
}

TEST(Report, StateSpecParsing) {
  EXPECT_EQ(ParseStateSpec("1,0,2", 3), (std::vector<int>{1, 0, 2}));
  EXPECT_THROW(ParseStateSpec("1,0", 3), ConfigError);
  EXPECT_THROW(ParseStateSpec("1,x,2", 3), ConfigError);
}

TEST(Report, ExplanationTextAndHeatmap) {
  Mastermind env(2, 2, 2);
  std::vector<int> board = {1, 2, 3, 1, 0, 0, 0, 0};
  Explanation e;
  e.state = 3;
  e.action = 2;
  e.raw = std::vector<double>(8, 0.1);
  e.corrected = EfficiencyCorrect(e.raw, 1.0, 0.25);
  e.full_value = 1.0;
  e.null_value = 0.25;
  const std::string text = FormatExplanation(e, env, board);
  EXPECT_NE(text.find("action BA"), std::string::npos);
  EXPECT_NE(text.find("residual 0.000000"), std::string::npos);
  const std::string svg = MastermindHeatmapSvg(env, board, e.corrected, 2, "t");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("greedy guess: BA"), std::string::npos);
  EXPECT_EQ(svg, MastermindHeatmapSvg(env, board, e.corrected, 2, "t"));
}

RunConfig TinyConfig(const std::string& experiment) {
  json j = {{"schema_version", 1},
            {"experiment", experiment},
            {"env", {{"name", "gridworld"}, {"gamma", 1.0}}},
            {"agent", {{"kind", "dqn"}, {"total_steps", 3000},
                       {"learning_starts", 200}, {"eps_decay_steps", 1500}}},
            {"char_model", {{"updates", 200}, {"eval_every", 50}, {"hidden", {16}}}},
            {"shapley_model", {{"updates", 200}, {"eval_every", 50}, {"hidden", {16}}}},
            {"outcome", {{"model", {{"updates", 200}, {"eval_every", 50}, {"hidden", {16}}}}}},
            {"offpolicy", {{"is_modes", {"none", "normalized"}}}},
            {"seeds", {0, 1}}};
  return ParseConfig(j);
}

// Same (config, seed) must give byte-identical artifacts.
TEST(Determinism, ExperimentArtifactsAreByteIdentical) {
  for (const std::string name : {"accuracy", "offpolicy", "sampling"}) {
    RunConfig c = TinyConfig(name);
    fs::path a = TempDir("det_a_" + name), b = TempDir("det_b_" + name);
    WriteArtifacts(RunExperiment(name, c, c.seeds), c, c.seeds, a.string());
    WriteArtifacts(RunExperiment(name, c, c.seeds), c, c.seeds, b.string());
    for (const char* file : {"series.csv", "scalars.csv", "summary.csv", "manifest.json"}) {
      const std::string x = ReadFile(a / file), y = ReadFile(b / file);
      EXPECT_FALSE(x.empty()) << name << "/" << file;
      EXPECT_EQ(x, y) << name << "/" << file;
    }
    fs::remove_all(a);
    fs::remove_all(b);
  }
}

TEST(Experiments, UnknownNameIsConfigError) {
  RunConfig c = TinyConfig("accuracy");
  EXPECT_THROW(RunExperiment("nonsense", c, c.seeds), ConfigError);
}

TEST(Experiments, SeedStreamsDiffer) {
  EXPECT_NE(DeriveSeed(0, 1), DeriveSeed(0, 2));
  EXPECT_NE(DeriveSeed(0, 1), DeriveSeed(1, 1));
  EXPECT_EQ(DeriveSeed(7, 3), DeriveSeed(7, 3));
}

}  // namespace
}  // namespace fastsverl
