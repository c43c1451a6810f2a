#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "fastsverl/char_model.h"
#include "fastsverl/shapley_model.h"
#include "test_util.h"

namespace fastsverl {
namespace {

using testing::IdOf;
using testing::Solved;

constexpr int kNorth = 0, kEast = 1;

ModelConfig Config(int64_t updates) {
  ModelConfig c;
  c.updates = updates;
  c.lr_final_factor = 0.1;
  return c;
}

struct GridworldChars {
  Solved s = testing::SolvedGridworld();
  CharacteristicTable behaviour = ExactBehaviourTable(s.dist, s.snapshot);
  ShapleyTable phi{behaviour};
};

const GridworldChars& Grid() {
  static const GridworldChars g;
  return g;
}

// A behaviour characteristic model trained to convergence on the optimal
// Gridworld policy.
const CharModel& TrainedGridworldChar() {
  static const CharModel model = [] {
    const GridworldChars& g = Grid();
    Rng init(1);
    CharModel m(TargetKind::kBehaviour, 2, 4, {64, 64}, -1.0, init);
    DistributionSampler sampler(g.s.dist, DistributionSampler::Weighting::kProbability);
    CharTrainer trainer(m, g.s.snapshot, sampler, Config(4000), 2);
    for (int i = 0; i < 4000; ++i) trainer.Update();
    return m;
  }();
  return model;
}

TEST(CharModel, GridworldConvergesToExactTable) {
  const GridworldChars& g = Grid();
  EXPECT_LT(CharModelMse(TrainedGridworldChar(), g.behaviour, *g.s.sim->registry_ptr()),
            1e-3);
}

TEST(CharModel, FullCoalitionRecoversPolicy) {
  const GridworldChars& g = Grid();
  const StateRegistry& reg = *g.s.sim->registry_ptr();
  for (int id : g.s.dist.ids()) {
    Eigen::VectorXd q = TrainedGridworldChar().Query(reg.features(id), 0b11);
    for (int a = 0; a < 4; ++a) {
      EXPECT_NEAR(q[a], g.s.snapshot.probability(id, a), 0.05);
      EXPECT_GE(q[a], 0.0);
      EXPECT_LE(q[a], 1.0);
    }
  }
}

TEST(CharModel, MseOfZeroModelIsMeanSquare) {
  const GridworldChars& g = Grid();
  Rng init(3);
  CharModel m(TargetKind::kBehaviour, 2, 4, {8}, -1.0, init);
  m.net().params().setZero();
  double expected = 0.0;
  int count = 0;
  for (int pos = 0; pos < g.behaviour.size(); ++pos) {
    for (uint64_t mask = 0; mask < 4; ++mask) {
      for (int a = 0; a < 4; ++a) {
        expected += std::pow(g.behaviour.at(pos, mask, a), 2);
        ++count;
      }
    }
  }
  EXPECT_NEAR(CharModelMse(m, g.behaviour, *g.s.sim->registry_ptr()), expected / count,
              1e-15);
}

TEST(CharModel, CheckpointRoundTrip) {
  const std::string path =
      (std::filesystem::temp_directory_path() / "fastsverl_char.mlp").string();
  SaveCharModel(TrainedGridworldChar(), path);
  CharModel back = LoadCharModel(path);
  EXPECT_EQ(back.kind(), TargetKind::kBehaviour);
  EXPECT_EQ(back.mask_value(), -1.0);
  EXPECT_EQ(back.net().params(), TrainedGridworldChar().net().params());
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".json");
}

TEST(PredictionModel, FullCoalitionRecoversValue) {
  Solved s = testing::SolvedGridworld();
  Rng init(4);
  CharModel m(TargetKind::kPrediction, 2, 1, {64, 64}, -1.0, init);
  DistributionSampler sampler(s.dist, DistributionSampler::Weighting::kProbability);
  CharTrainer trainer(m, s.snapshot, sampler, Config(4000), 5);
  for (int i = 0; i < 4000; ++i) trainer.Update();
  CharacteristicTable table = ExactPredictionTable(s.dist, s.snapshot);
  const StateRegistry& reg = *s.sim->registry_ptr();
  EXPECT_LT(CharModelMse(m, table, reg), 0.01);
  for (int id : s.dist.ids()) {
    EXPECT_NEAR(m.Query(reg.features(id), 0b11)[0], s.snapshot.value(id), 0.1);
  }
}

TEST(PredictionModel, ConstantValueGivesZeroAttribution) {
  Solved s = testing::SolvedGridworld();
  const auto reg = s.sim->registry_ptr();
  std::vector<double> probs(static_cast<size_t>(reg->size()) * 4);
  for (int id = 0; id < reg->size(); ++id) {
    for (int a = 0; a < 4; ++a) probs[id * 4 + a] = s.snapshot.probability(id, a);
  }
  PolicySnapshot flat(reg, 4, probs, std::vector<double>(reg->size(), 3.0));
  Rng init(6);
  CharModel m(TargetKind::kPrediction, 2, 1, {32, 32}, -1.0, init);
  DistributionSampler sampler(s.dist, DistributionSampler::Weighting::kProbability);
  ModelConfig c = Config(3000);
  c.learning_rate = 0.01;
  CharTrainer trainer(m, flat, sampler, c, 7);
  for (int i = 0; i < 3000; ++i) trainer.Update();
  for (int id : s.dist.ids()) {
    for (uint64_t mask = 0; mask < 4; ++mask) {
      EXPECT_NEAR(m.Query(reg->features(id), mask)[0], 3.0, 0.02);
    }
  }
  ModelSource source(m, flat, NullFromDistribution(TargetKind::kPrediction, s.dist, flat));
  CharacteristicTable table = ExactPredictionTable(s.dist, flat);
  ShapleyTable exact(table);
  for (int pos = 0; pos < exact.size(); ++pos) {
    for (double v : exact.at(pos, 0)) EXPECT_NEAR(v, 0.0, 1e-14);
  }
  Rng rng(0);
  for (int id : s.dist.ids()) {
    for (int i = 0; i < 2; ++i) {
      // Marginal contributions under the model are all close to zero.
      const double with = source.Value(id, 0, 0b11, rng);
      const double without = source.Value(id, 0, 0b11 & ~(1u << i), rng);
      EXPECT_NEAR(with - without, 0.0, 0.04);
    }
  }
}

TEST(SampledSource, FullCoalitionIsRawTarget) {
  const GridworldChars& g = Grid();
  SampledSource source(TargetKind::kBehaviour, g.s.dist, g.s.snapshot);
  Rng rng(1);
  for (int id : g.s.dist.ids()) {
    for (int a = 0; a < 4; ++a) {
      for (int i = 0; i < 5; ++i) {
        EXPECT_EQ(source.Value(id, a, 0b11, rng), g.s.snapshot.probability(id, a));
      }
    }
  }
}

TEST(SampledSource, UnbiasedForExactCharacteristic) {
  const GridworldChars& g = Grid();
  SampledSource source(TargetKind::kBehaviour, g.s.dist, g.s.snapshot);
  Rng rng(2);
  const int draws = 100000;
  for (int pos = 0; pos < g.behaviour.size(); ++pos) {
    const int id = g.behaviour.ids()[pos];
    for (uint64_t mask : {0u, 1u, 2u}) {
      for (int a : {kNorth, kEast}) {
        double total = 0.0;
        for (int i = 0; i < draws; ++i) total += source.Value(id, a, mask, rng);
        EXPECT_NEAR(total / draws, g.behaviour.at(pos, mask, a), 0.01);
      }
    }
  }
}

TEST(ExactTableSource, MatchesTableBitwise) {
  const GridworldChars& g = Grid();
  ExactTableSource source(g.behaviour);
  Rng rng(0);
  for (int pos = 0; pos < g.behaviour.size(); ++pos) {
    const int id = g.behaviour.ids()[pos];
    for (uint64_t mask = 0; mask < 4; ++mask) {
      for (int a = 0; a < 4; ++a) {
        EXPECT_EQ(source.Value(id, a, mask, rng), g.behaviour.at(pos, mask, a));
      }
    }
    EXPECT_EQ(source.Null(id, kEast), g.behaviour.at(pos, 0, kEast));
    EXPECT_EQ(source.Full(id, kEast), g.behaviour.at(pos, 3, kEast));
  }
}

TEST(NullValue, UniformPolicyIsOneOverActions) {
  Solved s = testing::SolvedGridworld();
  const auto reg = s.sim->registry_ptr();
  std::vector<double> probs(static_cast<size_t>(reg->size()) * 4, 0.25);
  PolicySnapshot uniform(reg, 4, probs, std::vector<double>(reg->size(), 0.0));
  for (double v : NullFromDistribution(TargetKind::kBehaviour, s.dist, uniform)) {
    EXPECT_DOUBLE_EQ(v, 0.25);
  }
}

TEST(NullValue, EqualsExactEmptyCoalition) {
  const GridworldChars& g = Grid();
  auto null = NullFromDistribution(TargetKind::kBehaviour, g.s.dist, g.s.snapshot);
  for (int a = 0; a < 4; ++a) EXPECT_NEAR(null[a], g.behaviour.at(0, 0, a), 1e-15);
}

TEST(ModelSource, NullIsCachedUntilReset) {
  const GridworldChars& g = Grid();
  ModelSource source(TrainedGridworldChar(), g.s.snapshot, {0.1, 0.2, 0.3, 0.4});
  const int id = g.s.dist.id(0);
  EXPECT_EQ(source.Null(id, 2), source.Null(id, 2));
  EXPECT_EQ(source.Null(id, 2), 0.3);
  Rng rng(0);
  EXPECT_EQ(source.Value(id, 1, 0b01, rng), source.Value(id, 1, 0b01, rng));
  EXPECT_EQ(source.Full(id, kEast), g.s.snapshot.probability(id, kEast));
  source.set_null({0, 0, 0, 1});
  EXPECT_EQ(source.Null(id, 3), 1.0);
}

// Shapley model trained against exact Gridworld behaviour characteristics.
const ShapleyModel& TrainedGridworldShapley() {
  static const ShapleyModel model = [] {
    const GridworldChars& g = Grid();
    Rng init(8);
    ShapleyModel m(TargetKind::kBehaviour, 2, 4, {64, 64}, init);
    static ExactTableSource source(g.behaviour);
    DistributionSampler sampler(g.s.dist, DistributionSampler::Weighting::kUniform);
    ShapleyTrainer trainer(m, source, sampler, *g.s.sim->registry_ptr(), Config(4000), 9);
    for (int i = 0; i < 4000; ++i) trainer.Update();
    return m;
  }();
  return model;
}

TEST(ShapleyModel, GridworldExplanationsMatchExact) {
  const GridworldChars& g = Grid();
  ExactTableSource source(g.behaviour);
  const StateRegistry& reg = *g.s.sim->registry_ptr();
  for (int pos = 0; pos < g.phi.size(); ++pos) {
    for (int a = 0; a < 4; ++a) {
      Explanation e = Explain(TrainedGridworldShapley(), source, reg, g.phi.ids()[pos], a);
      auto exact = g.phi.at(pos, a);
      for (int i = 0; i < 2; ++i) EXPECT_NEAR(e.corrected[i], exact[i], 0.05);
    }
  }
  EXPECT_LT(ShapleyModelMse(TrainedGridworldShapley(), source, g.phi, reg), 1e-3);
}

TEST(ShapleyModel, CorrectedSumIsExact) {
  const GridworldChars& g = Grid();
  ExactTableSource source(g.behaviour);
  Rng init(10);
  ShapleyModel untrained(TargetKind::kBehaviour, 2, 4, {16}, init);
  for (const ShapleyModel* m : {&TrainedGridworldShapley(), static_cast<const ShapleyModel*>(&untrained)}) {
    for (int id : g.s.dist.ids()) {
      for (int a = 0; a < 4; ++a) {
        Explanation e = Explain(*m, source, *g.s.sim->registry_ptr(), id, a);
        double sum = 0.0;
        for (double v : e.corrected) sum += v;
        EXPECT_NEAR(sum, e.full_value - e.null_value, 1e-12);
      }
    }
  }
}

TEST(ShapleyModel, MastermindExactSourceConverges) {
  Solved s = testing::SolvedMastermind222();
  CharacteristicTable table = ExactBehaviourTable(s.dist, s.snapshot);
  ShapleyTable phi(table);
  ExactTableSource source(table);
  Rng init(11);
  ShapleyModel m(TargetKind::kBehaviour, 8, 4, {64, 64}, init);
  DistributionSampler sampler(s.dist, DistributionSampler::Weighting::kUniform);
  ShapleyTrainer trainer(m, source, sampler, *s.sim->registry_ptr(), Config(5000), 12);
  for (int i = 0; i < 5000; ++i) trainer.Update();
  EXPECT_LT(ShapleyModelMse(m, source, phi, *s.sim->registry_ptr()), 0.01);
}

TEST(ShapleyModel, CheckpointRoundTrip) {
  const std::string path =
      (std::filesystem::temp_directory_path() / "fastsverl_shapley.mlp").string();
  SaveShapleyModel(TrainedGridworldShapley(), path);
  ShapleyModel back = LoadShapleyModel(path);
  EXPECT_EQ(back.kind(), TargetKind::kBehaviour);
  EXPECT_EQ(back.n_features(), 2);
  EXPECT_EQ(back.n_actions(), 4);
  EXPECT_EQ(back.net().params(), TrainedGridworldShapley().net().params());
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".json");
}

TEST(Training, LoopEvaluatesAtScheduledPoints) {
  std::vector<int64_t> points;
  int updates = 0;
  TrainLoop(10, 4, [&] { ++updates; }, [&](int64_t u) { points.push_back(u); });
  EXPECT_EQ(updates, 10);
  EXPECT_EQ(points, (std::vector<int64_t>{0, 4, 8, 10}));
}

TEST(Training, LearningRateSchedule) {
  ModelConfig c;
  c.learning_rate = 1.0;
  c.lr_final_factor = 0.1;
  c.updates = 100;
  EXPECT_DOUBLE_EQ(LearningRateAt(c, 0), 1.0);
  EXPECT_NEAR(LearningRateAt(c, 100), 0.1, 1e-15);
  EXPECT_NEAR(LearningRateAt(c, 50), 0.55, 1e-15);
}

TEST(Training, UniformWeightingIgnoresProbabilities) {
  const GridworldChars& g = Grid();
  DistributionSampler sampler(g.s.dist, DistributionSampler::Weighting::kUniform);
  Rng rng(3);
  StateBatch batch;
  std::map<int, int> counts;
  for (int i = 0; i < 2000; ++i) {
    sampler.Sample(64, rng, batch);
    for (int id : batch.states) ++counts[id];
    EXPECT_NEAR(batch.coef.sum(), 1.0, 1e-12);
  }
  for (const auto& [id, c] : counts) EXPECT_NEAR(c / 128000.0, 0.25, 0.01);
}

}  // namespace
}  // namespace fastsverl
