#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "fastsverl/env.h"
#include "fastsverl/errors.h"
#include "fastsverl/tabular.h"
#include "test_util.h"

namespace fastsverl {
namespace {

constexpr int kNorth = 0, kEast = 1;

TEST(Gridworld, EastFromStartCorner) {
  Gridworld g;
  TransitionDist d = g.Kernel(Gridworld::At(1, 1), kEast);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].next, Gridworld::At(2, 1));
  EXPECT_DOUBLE_EQ(d[0].reward, -1.0);
  EXPECT_DOUBLE_EQ(d[0].probability, 1.0);
}

TEST(Gridworld, MissingCellBlocksNorth) {
  Gridworld g;
  TransitionDist d = g.Kernel(Gridworld::At(1, 1), kNorth);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].next, Gridworld::At(1, 1));
  EXPECT_DOUBLE_EQ(d[0].reward, -1.0);
}

TEST(Gridworld, GoalRewardOnEntry) {
  Gridworld g;
  TransitionDist d = g.Kernel(Gridworld::At(2, 3), kNorth);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_TRUE(d[0].next.terminal);
  EXPECT_EQ(d[0].next.features, (std::vector<int>{2, 4}));
  EXPECT_DOUBLE_EQ(d[0].reward, 9.0);
}

TEST(Gridworld, EveryKernelIsDeterministic) {
  Gridworld g;
  for (const FeatureState& s : EnumerateStates(g)) {
    if (s.terminal) continue;
    for (int a = 0; a < g.n_actions(); ++a) {
      TransitionDist d = g.Kernel(s, a);
      ASSERT_EQ(d.size(), 1u);
      EXPECT_DOUBLE_EQ(d[0].probability, 1.0);
    }
  }
}

TEST(Gridworld, SevenStates) {
  Gridworld g;
  EXPECT_EQ(EnumerateStates(g).size(), 7u);
}

TEST(Gridworld, StartIsUniformOverBottomRow) {
  Gridworld g;
  auto starts = g.StartDistribution();
  ASSERT_EQ(starts.size(), 2u);
  for (const auto& [s, p] : starts) {
    EXPECT_EQ(s.features[1], 1);
    EXPECT_DOUBLE_EQ(p, 0.5);
  }
}

TEST(Gridworld, TerminalInputIsRejected) {
  Gridworld g;
  FeatureState goal{{2, 4}, true};
  EXPECT_THROW(g.Kernel(goal, kNorth), ContractViolation);
}

TEST(Mastermind, Small222Dimensions) {
  Mastermind m(2, 2, 2);
  EXPECT_EQ(m.n_features(), 8);
  EXPECT_EQ(m.n_actions(), 4);
  EXPECT_EQ(EnumerateStates(m).size(), 53u);
}

TEST(Mastermind, SwappedGuessScoresTwoMisplaced) {
  Mastermind::Clues c = Mastermind::Score({1, 2}, {2, 1});
  EXPECT_EQ(c.position, 0);
  EXPECT_EQ(c.misplaced, 2);
}

TEST(Mastermind, RepeatedLettersCountOnce) {
  Mastermind::Clues c = Mastermind::Score({1, 1, 2}, {2, 1, 1});
  EXPECT_EQ(c.position, 1);
  EXPECT_EQ(c.misplaced, 2);
  c = Mastermind::Score({1, 2, 2}, {1, 1, 1});
  EXPECT_EQ(c.position, 1);
  EXPECT_EQ(c.misplaced, 0);
}

TEST(Mastermind, EmptyBoardGuessAAPartitionsFourCodes) {
  Mastermind m(2, 2, 2);
  auto starts = m.StartDistribution();
  ASSERT_EQ(starts.size(), 1u);
  const FeatureState empty = starts[0].first;
  EXPECT_EQ(empty.features, std::vector<int>(8, 0));

  // Codes AA, AB, BA, BB: one solves, two give a single position hit, one
  // gives nothing.
  TransitionDist d = m.Kernel(empty, /*AA=*/0);
  std::map<std::vector<int>, double> mass;
  double terminal = 0.0, total = 0.0;
  for (const Transition& t : d) {
    total += t.probability;
    if (t.next.terminal) {
      terminal += t.probability;
      EXPECT_DOUBLE_EQ(t.reward, 1.0);
    } else {
      mass[t.next.features] += t.probability;
      EXPECT_DOUBLE_EQ(t.reward, -1.0);
    }
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_NEAR(terminal, 0.25, 1e-12);
  EXPECT_NEAR((mass[{1, 1, 1, 2, 0, 0, 0, 0}]), 0.5, 1e-12);
  EXPECT_NEAR((mass[{1, 1, 1, 1, 0, 0, 0, 0}]), 0.25, 1e-12);
}

TEST(Mastermind, CorrectGuessEndsWithBonus) {
  Mastermind m(2, 2, 2);
  // Board after guessing AB with no position hits and two misplaced: the
  // code must be BA.
  FeatureState s{{1, 2, 3, 1, 0, 0, 0, 0}, false};
  EXPECT_EQ(m.ConsistentCodes(s), (std::vector<int>{2}));
  TransitionDist d = m.Kernel(s, 2);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_TRUE(d[0].next.terminal);
  EXPECT_DOUBLE_EQ(d[0].reward, 1.0);
}

TEST(Mastermind, LastGuessTerminates) {
  Mastermind m(2, 2, 2);
  FeatureState s{{1, 1, 1, 1, 0, 0, 0, 0}, false};  // code is BB
  TransitionDist d = m.Kernel(s, 0);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_TRUE(d[0].next.terminal);
  EXPECT_DOUBLE_EQ(d[0].reward, -1.0);
}

TEST(Mastermind, CoalitionOverflowIsConfigError) {
  EXPECT_THROW(Mastermind(6, 11, 2), ConfigError);
}

TEST(Hypercube, StateAndActionCounts) {
  Hypercube h(2, 3);
  EXPECT_EQ(h.n_actions(), 4);
  EXPECT_EQ(EnumerateStates(h).size(), 9u);
  EXPECT_EQ(EnumerateStates(Hypercube(3, 4)).size(), 64u);
}

TEST(Hypercube, SmallestCubeOptimalReturn) {
  auto solved = testing::Solve(std::make_shared<Hypercube>(1, 2));
  EXPECT_EQ(solved.mdp.size(), 2);
  EXPECT_NEAR(solved.optimal.expected_return, 9.0, 1e-12);
}

TEST(Hypercube, WallClamps) {
  Hypercube h(2, 3);
  TransitionDist d = h.Kernel(FeatureState{{2, 0}, false}, /*+x=*/0);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].next.features, (std::vector<int>{2, 0}));
  EXPECT_DOUBLE_EQ(d[0].reward, -1.0);
}

TEST(Hypercube, BudgetOverflowIsConfigError) {
  EXPECT_THROW(Hypercube(10, 10), ConfigError);
}

TEST(Kernels, ProbabilitiesSumToOne) {
  std::vector<std::shared_ptr<Environment>> envs = {
      std::make_shared<Gridworld>(), std::make_shared<Mastermind>(2, 2, 2),
      std::make_shared<Mastermind>(2, 3, 3), std::make_shared<Hypercube>(3, 3)};
  for (const auto& env : envs) {
    for (const FeatureState& s : EnumerateStates(*env)) {
      if (s.terminal) continue;
      for (int a = 0; a < env->n_actions(); ++a) {
        double total = 0.0;
        for (const Transition& t : env->Kernel(s, a)) {
          EXPECT_GT(t.probability, 0.0);
          EXPECT_TRUE(std::isfinite(t.reward));
          total += t.probability;
        }
        EXPECT_NEAR(total, 1.0, 1e-12) << env->spec().name;
      }
    }
  }
}

TEST(Kernels, StatesRespectFeatureDomains) {
  Mastermind m(2, 3, 3);
  for (const FeatureState& s : EnumerateStates(m)) {
    ASSERT_EQ(static_cast<int>(s.features.size()), m.n_features());
    for (int i = 0; i < m.n_features(); ++i) {
      const auto& dom = m.spec().feature_domains[i];
      EXPECT_TRUE(std::binary_search(dom.begin(), dom.end(), s.features[i]));
    }
  }
}

TEST(Enumeration, BudgetIsEnforced) {
  EXPECT_THROW(EnumerateStates(Mastermind(2, 2, 2), 10), ConfigError);
}

TEST(Enumeration, NonTerminalStatesComeFirst) {
  auto states = EnumerateStates(Mastermind(2, 2, 2));
  bool seen_terminal = false;
  for (const FeatureState& s : states) {
    if (s.terminal) seen_terminal = true;
    else EXPECT_FALSE(seen_terminal);
  }
}

TEST(Simulator, StepMatchesKernelFrequencies) {
  auto env = std::make_shared<Mastermind>(2, 2, 2);
  auto reg = std::make_shared<StateRegistry>(env->n_features());
  Simulator sim(env, reg);
  Rng rng(3);
  const int start = sim.SampleStart(rng);
  std::map<int, int> counts;
  const int draws = 40000;
  for (int i = 0; i < draws; ++i) ++counts[sim.Step(start, 0, rng).next];
  for (const IdTransition& t : sim.Kernel(start, 0)) {
    EXPECT_NEAR(counts[t.next] / static_cast<double>(draws), t.probability, 0.01);
  }
}

}  // namespace
}  // namespace fastsverl
