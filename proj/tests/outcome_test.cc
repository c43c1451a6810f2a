#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "fastsverl/errors.h"
#include "fastsverl/outcome.h"
#include "test_util.h"

namespace fastsverl {
namespace {

using testing::IdOf;
using testing::Solved;

struct GridworldOutcome {
  Solved s = testing::SolvedGridworld();
  CharacteristicTable behaviour = ExactBehaviourTable(s.dist, s.snapshot);
  CharacteristicTable outcome = ExactOutcomeTable(s.mdp, s.dist, s.snapshot, behaviour);
};

GridworldOutcome& Grid() {
  static GridworldOutcome g;
  return g;
}

OutcomeConfig Config(int64_t updates) {
  OutcomeConfig c;
  c.model.updates = updates;
  c.model.learning_rate = 2e-3;
  c.model.lr_final_factor = 0.05;
  c.model.batch_size = 128;
  c.env_steps_per_update = 2;
  return c;
}

// Epsilon-greedy transitions around the optimal policy with the true
// behaviour probabilities.
ReplayBuffer EpsilonGreedyBuffer(Solved& s, double eps, int steps, uint64_t seed) {
  ReplayBuffer buf(s.sim->registry_ptr(), steps);
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> any(0, 3);
  int state = -1, len = 0;
  for (int i = 0; i < steps; ++i) {
    if (state < 0) {
      state = s.sim->SampleStart(rng);
      len = 0;
    }
    const int greedy = s.snapshot.greedy(state);
    const int a = u(rng) < eps ? any(rng) : greedy;
    IdTransition t = s.sim->Step(state, a, rng);
    ReplayRecord r;
    r.step = i;
    r.state = state;
    r.action = a;
    r.reward = t.reward;
    r.next_state = t.next;
    r.done = t.terminal;
    r.behaviour_prob = eps / 4.0 + (a == greedy ? 1.0 - eps : 0.0);
    buf.Add(r);
    state = t.terminal || ++len >= 50 ? -1 : t.next;
  }
  return buf;
}

TEST(ConditionedPolicy, FollowsPiAwayFromExplainedState) {
  GridworldOutcome& g = Grid();
  ExactTableSource source(g.behaviour);
  ConditionedPolicy mu(g.s.snapshot, source);
  const StateRegistry& reg = *g.s.sim->registry_ptr();
  const int corner = IdOf(reg, {1, 1});
  Rng rng(1);
  for (int id : g.s.dist.ids()) {
    if (id == corner) continue;
    for (uint64_t mask = 0; mask < 4; ++mask) {
      auto p = mu.Probabilities(id, corner, mask, rng);
      for (int a = 0; a < 4; ++a) EXPECT_EQ(p[a], g.s.snapshot.probability(id, a));
      EXPECT_EQ(mu.Sample(id, corner, mask, rng), g.s.snapshot.greedy(id));
    }
  }
}

TEST(ConditionedPolicy, FullCoalitionIsPi) {
  GridworldOutcome& g = Grid();
  ExactTableSource source(g.behaviour);
  ConditionedPolicy mu(g.s.snapshot, source);
  Rng rng(2);
  for (int id : g.s.dist.ids()) {
    auto p = mu.Probabilities(id, id, 0b11, rng);
    for (int a = 0; a < 4; ++a) EXPECT_DOUBLE_EQ(p[a], g.s.snapshot.probability(id, a));
  }
}

TEST(ConditionedPolicy, EmptyCoalitionIsActionMixture) {
  GridworldOutcome& g = Grid();
  ExactTableSource source(g.behaviour);
  ConditionedPolicy mu(g.s.snapshot, source);
  // Steady-state mixture: East 1/7 from (1,1), North 6/7 elsewhere.
  Rng rng(3);
  const int e = g.s.dist.id(0);
  auto p = mu.Probabilities(e, e, 0, rng);
  EXPECT_NEAR(p[0], 6.0 / 7.0, 1e-12);
  EXPECT_NEAR(p[1], 1.0 / 7.0, 1e-12);
  std::map<int, int> counts;
  for (int i = 0; i < 70000; ++i) ++counts[mu.Sample(e, e, 0, rng)];
  EXPECT_NEAR(counts[1] / 70000.0, 1.0 / 7.0, 0.01);
  EXPECT_EQ(mu.fallbacks(), 0);
}

TEST(ConditionedPolicy, AllZeroCharacteristicFallsBackToUniform) {
  GridworldOutcome& g = Grid();
  CharacteristicTable zero(TargetKind::kBehaviour, 2, 4, g.behaviour.ids());
  ExactTableSource source(zero);
  ConditionedPolicy mu(g.s.snapshot, source);
  Rng rng(4);
  const int e = g.s.dist.id(0);
  auto p = mu.Probabilities(e, e, 0b01, rng);
  for (double v : p) EXPECT_DOUBLE_EQ(v, 0.25);
  EXPECT_EQ(mu.fallbacks(), 1);
}

TEST(OnPolicyOutcome, RecordsCarryFullMasks) {
  GridworldOutcome& g = Grid();
  ExactTableSource source(g.behaviour);
  ConditionedPolicy mu(g.s.snapshot, source);
  Rng init(5);
  OutcomeModel model(OutcomeVariant::kV, 2, 4, {16}, init);
  OnPolicyOutcomeTrainer trainer(model, g.s.sim, mu, g.s.dist, Config(10), 6);
  for (int i = 0; i < 10; ++i) trainer.Update();
  ASSERT_GT(trainer.buffer().size(), 0u);
  const StateRegistry& reg = *g.s.sim->registry_ptr();
  for (size_t i = 0; i < trainer.buffer().size(); ++i) {
    const OutcomeRecord& r = trainer.buffer().at(i);
    EXPECT_EQ(r.mask & ~Coalition::FullMask(2), 0u);
    EXPECT_GE(g.s.dist.position(r.explain_state), 0);
    if (r.state != r.explain_state && !reg.terminal(r.state)) {
      EXPECT_EQ(r.action, g.s.snapshot.greedy(r.state));
    }
  }
  EXPECT_EQ(trainer.env_steps(), static_cast<int64_t>(trainer.buffer().size()));
}

TEST(OnPolicyOutcome, FullCoalitionReturnsMatchPi) {
  // Episodes conditioned on C = F reproduce the return distribution of pi.
  GridworldOutcome& g = Grid();
  ExactTableSource source(g.behaviour);
  ConditionedPolicy mu(g.s.snapshot, source);
  Rng rng(7);
  for (int e : g.s.dist.ids()) {
    int state = e;
    double ret = 0.0;
    for (int k = 0; k < 20; ++k) {
      IdTransition t = g.s.sim->Step(state, mu.Sample(state, e, 0b11, rng), rng);
      ret += t.reward;
      if (t.terminal) break;
      state = t.next;
    }
    EXPECT_DOUBLE_EQ(ret, g.s.snapshot.value(e));
  }
}

TEST(OnPolicyOutcome, LearnsGridworldOutcomes) {
  GridworldOutcome& g = Grid();
  ExactTableSource source(g.behaviour);
  ConditionedPolicy mu(g.s.snapshot, source);
  Rng init(8);
  OutcomeModel model(OutcomeVariant::kV, 2, 4, {64, 64}, init);
  OutcomeConfig c = Config(12000);
  OnPolicyOutcomeTrainer trainer(model, g.s.sim, mu, g.s.dist, c, 9);
  for (int i = 0; i < c.model.updates; ++i) trainer.Update();
  OutcomeModelSource recovered(model, mu, *g.s.sim->registry_ptr());
  Rng rng(0);
  for (int pos = 0; pos < g.outcome.size(); ++pos) {
    const int id = g.outcome.ids()[pos];
    EXPECT_NEAR(recovered.Full(id, 0), g.s.snapshot.value(id), 0.05);
  }
  EXPECT_LT(OutcomeMse(recovered, g.outcome), 0.01);
}

TEST(OffPolicyOutcome, RecoversGridworldOutcomesFromAgentBuffer) {
  GridworldOutcome& g = Grid();
  ReplayBuffer buffer = EpsilonGreedyBuffer(g.s, 1.0, 20000, 10);
  const size_t size_before = buffer.size();
  ExactTableSource source(g.behaviour);
  ConditionedPolicy mu(g.s.snapshot, source);
  Rng init(11);
  OutcomeModel model(OutcomeVariant::kQ, 2, 4, {64, 64}, init);
  OutcomeConfig c = Config(16000);
  OffPolicyOutcomeTrainer trainer(model, buffer, mu, g.s.dist, 1.0, c, 12);
  for (int i = 0; i < c.model.updates; ++i) trainer.Update();
  EXPECT_EQ(buffer.size(), size_before);

  OutcomeModelSource recovered(model, mu, *g.s.sim->registry_ptr());
  Rng rng(0);
  for (int pos = 0; pos < g.outcome.size(); ++pos) {
    const int id = g.outcome.ids()[pos];
    EXPECT_NEAR(recovered.Full(id, 0), g.s.snapshot.value(id), 0.05);
    for (uint64_t mask = 0; mask < 4; ++mask) {
      EXPECT_NEAR(recovered.Value(id, 0, mask, rng), g.outcome.at(pos, mask, 0), 0.05)
          << "state " << id << " mask " << mask;
    }
  }
}

TEST(OffPolicyOutcome, FullCoalitionPicksGreedyQ) {
  GridworldOutcome& g = Grid();
  ExactTableSource source(g.behaviour);
  ConditionedPolicy mu(g.s.snapshot, source);
  Rng init(13);
  OutcomeModel model(OutcomeVariant::kQ, 2, 4, {8}, init);
  OutcomeModelSource recovered(model, mu, *g.s.sim->registry_ptr());
  const StateRegistry& reg = *g.s.sim->registry_ptr();
  for (int id : g.s.dist.ids()) {
    Eigen::VectorXd x(model.net().input_dim());
    model.FillInput(reg.features(id), reg.features(id), 0b11, x);
    const Eigen::VectorXd q = model.net().Forward(x);
    EXPECT_NEAR(recovered.Full(id, 0), q[g.s.snapshot.greedy(id)], 1e-12);
  }
}

TEST(OffPolicyOutcome, RejectsStochasticBehaviourSource) {
  GridworldOutcome& g = Grid();
  SampledSource sampled(TargetKind::kBehaviour, g.s.dist, g.s.snapshot);
  ConditionedPolicy mu(g.s.snapshot, sampled);
  ReplayBuffer buffer = EpsilonGreedyBuffer(g.s, 0.5, 100, 1);
  Rng init(14);
  OutcomeModel model(OutcomeVariant::kQ, 2, 4, {8}, init);
  EXPECT_THROW(OffPolicyOutcomeTrainer(model, buffer, mu, g.s.dist, 1.0, Config(1), 1),
               ContractViolation);
}

TEST(OutcomeMse, ExactSourceIsZero) {
  GridworldOutcome& g = Grid();
  ExactTableSource source(g.outcome);
  EXPECT_EQ(OutcomeMse(source, g.outcome), 0.0);
}

}  // namespace
}  // namespace fastsverl
