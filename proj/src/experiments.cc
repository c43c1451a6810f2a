#include "fastsverl/experiments.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>

#include "fastsverl/errors.h"

#ifndef FASTSVERL_VERSION
#define FASTSVERL_VERSION "0.0.0"
#endif
#ifndef FASTSVERL_GIT_REVISION
#define FASTSVERL_GIT_REVISION "unknown"
#endif

namespace fastsverl {

uint64_t DeriveSeed(uint64_t seed, uint64_t stream) {
  // splitmix64 over the pair.
  uint64_t z = seed * 0x9e3779b97f4a7c15ull + (stream + 1) * 0xd1b54a32d192ed03ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::string ToolVersion() {
  return std::string("fastsverl ") + FASTSVERL_VERSION + " (" +
         FASTSVERL_GIT_REVISION + ")";
}

AgentSetup PrepareAgent(const RunConfig& config, uint64_t seed, bool tabular) {
  AgentSetup agent;
  std::shared_ptr<Environment> env = MakeEnvironment(config.env);
  auto registry = std::make_shared<StateRegistry>(env->n_features());
  agent.sim = std::make_shared<Simulator>(env, registry);
  std::optional<OptimalSolution> optimal;
  if (tabular) {
    agent.mdp = BuildTabularMdp(*agent.sim);
    optimal = ValueIteration(*agent.mdp);
    agent.optimal_return = optimal->expected_return;
  }
  if (config.agent.kind == "optimal") {
    if (!tabular) throw ConfigError("the optimal agent needs an enumerable MDP");
    const TabularMdp& mdp = *agent.mdp;
    const int a_count = mdp.n_actions;
    std::vector<double> probs(static_cast<size_t>(registry->size()) * a_count, 0.0);
    std::vector<double> values(registry->size(), 0.0);
    for (int pos = 0; pos < mdp.n_nonterminal; ++pos) {
      const int id = mdp.ids[pos];
      for (int a = 0; a < a_count; ++a) {
        probs[static_cast<size_t>(id) * a_count + a] = optimal->policy(pos, a);
      }
      values[id] = optimal->values[pos];
    }
    agent.snapshot = PolicySnapshot(registry, a_count, std::move(probs),
                                    std::move(values));
    agent.expected_return = optimal->expected_return;
    return agent;
  }
  AgentRun run = DqnTrain(agent.sim, config.agent.dqn, seed);
  agent.policy = run.policy;
  agent.buffer = run.buffer;
  agent.snapshot = PolicySnapshot(*agent.policy, registry);
  if (tabular) {
    try {
      Eigen::VectorXd v =
          EvaluatePolicy(*agent.mdp, PolicyFromSnapshot(*agent.mdp, agent.snapshot));
      agent.expected_return = ExpectedReturn(*agent.mdp, v);
    } catch (const DataError&) {
      throw DataError("seed " + std::to_string(seed) +
                      ": the trained greedy policy never terminates; "
                      "increase agent.total_steps");
    }
  } else {
    agent.expected_return = std::numeric_limits<double>::quiet_NaN();
  }
  return agent;
}

StateDistribution SteadyState(const RunConfig& config, AgentSetup& agent,
                              uint64_t seed) {
  if (config.steady_state.mode == StateDistribution::Mode::kAnalytic) {
    if (!agent.mdp) throw ConfigError("analytic steady state needs an enumerable MDP");
    return AnalyticSteadyState(*agent.mdp, agent.snapshot);
  }
  Rng rng(DeriveSeed(seed, 99));
  StateDistribution dist = EmpiricalSteadyState(
      *agent.sim, agent.snapshot, config.steady_state.episodes, rng);
  agent.snapshot.Refresh();
  return dist;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct SeedContext {
  const RunConfig& config;
  uint64_t seed;
  ExperimentResult& result;
  uint64_t stream = 0;

  uint64_t NextSeed() { return DeriveSeed(seed, ++stream); }
};

// Trains for `total` updates, evaluating every `every`, and records the curve
// under `metric` with update indices shifted by `offset`.
double Track(SeedContext& ctx, const std::string& metric, int64_t total,
             int64_t every, const std::function<void()>& update,
             const std::function<double()>& evaluate, int64_t offset = 0) {
  double last = 0.0;
  TrainLoop(total, every, update, [&](int64_t u) {
    last = evaluate();
    if (!std::isfinite(last)) {
      throw DataError(metric + " became non-finite at update " + std::to_string(u));
    }
    ctx.result.series.Add(ctx.seed, offset + u, metric, last);
  });
  const Curve curve = ctx.result.series.CurveFor(ctx.seed, metric);
  const int64_t hit = UpdatesToThreshold(curve, ctx.config.threshold);
  ctx.result.scalars.Set(ctx.seed, metric + "_final", last);
  ctx.result.scalars.Set(ctx.seed, metric + "_updates_to_threshold",
                         hit == kNotReached ? kInf : static_cast<double>(hit));
  return last;
}

void RecordAgent(SeedContext& ctx, const AgentSetup& agent) {
  ctx.result.scalars.Set(ctx.seed, "agent_return", agent.expected_return);
  if (agent.mdp) {
    ctx.result.scalars.Set(ctx.seed, "optimal_return", agent.optimal_return);
    ctx.result.scalars.Set(ctx.seed, "agent_return_gap",
                           agent.optimal_return - agent.expected_return);
  }
}

bool Wants(const RunConfig& config, TargetKind kind) {
  for (TargetKind k : config.targets) {
    if (k == kind) return true;
  }
  return false;
}

int Outputs(TargetKind kind, const Environment& env) {
  return kind == TargetKind::kBehaviour ? env.n_actions() : 1;
}

// Characteristic model, then Shapley models on exact and on learned
// characteristics.
void CharAndShapley(SeedContext& ctx, const AgentSetup& agent,
                    const StateDistribution& dist, TargetKind kind,
                    const CharacteristicTable& table) {
  const RunConfig& c = ctx.config;
  const Environment& env = agent.sim->env();
  const StateRegistry& reg = *agent.sim->registry_ptr();
  const std::string prefix = ToString(kind);
  const ShapleyTable phi(table);

  Rng init(ctx.NextSeed());
  CharModel cm(kind, env.n_features(), Outputs(kind, env), c.char_model.hidden,
               c.char_model.mask_value, init);
  DistributionSampler char_sampler(dist, c.char_weighting);
  CharTrainer ct(cm, agent.snapshot, char_sampler, c.char_model, ctx.NextSeed());
  Track(ctx, prefix + "_char", c.char_model.updates, c.char_model.eval_every,
        [&] { ct.Update(); }, [&] { return CharModelMse(cm, table, reg); });

  DistributionSampler sampler(dist, c.shapley_weighting);
  const uint64_t shapley_init = ctx.NextSeed();
  const uint64_t shapley_seed = ctx.NextSeed();

  ExactTableSource exact(table);
  Rng init_exact(shapley_init);
  ShapleyModel se(kind, env.n_features(), env.n_actions(), c.shapley_model.hidden,
                  init_exact);
  ShapleyTrainer te(se, exact, sampler, reg, c.shapley_model, shapley_seed);
  Track(ctx, prefix + "_shapley_exact_char", c.shapley_model.updates,
        c.shapley_model.eval_every, [&] { te.Update(); },
        [&] { return ShapleyModelMse(se, exact, phi, reg); });

  ModelSource learned(cm, agent.snapshot,
                      NullFromDistribution(kind, dist, agent.snapshot));
  Rng init_model(shapley_init);
  ShapleyModel sm(kind, env.n_features(), env.n_actions(), c.shapley_model.hidden,
                  init_model);
  ShapleyTrainer tm(sm, learned, sampler, reg, c.shapley_model, shapley_seed);
  Track(ctx, prefix + "_shapley_model_char", c.shapley_model.updates,
        c.shapley_model.eval_every, [&] { tm.Update(); },
        [&] { return ShapleyModelMse(sm, learned, phi, reg); });
}

void OutcomeArms(SeedContext& ctx, AgentSetup& agent,
                 const StateDistribution& dist,
                 const CharacteristicTable& behaviour) {
  const RunConfig& c = ctx.config;
  const Environment& env = agent.sim->env();
  const StateRegistry& reg = *agent.sim->registry_ptr();
  const TabularMdp& mdp = *agent.mdp;
  const CharacteristicTable table =
      ExactOutcomeTable(mdp, dist, agent.snapshot, behaviour);
  const ShapleyTable phi(table);
  ExactTableSource upstream(behaviour);
  ConditionedPolicy policy(agent.snapshot, upstream);
  const int n = env.n_features();

  std::vector<std::unique_ptr<OutcomeModel>> models;
  for (OutcomeVariant variant : c.outcome_variants) {
    Rng init(ctx.NextSeed());
    auto model = std::make_unique<OutcomeModel>(variant, n, env.n_actions(),
                                                c.outcome.model.hidden, init);
    OutcomeModelSource source(*model, policy, reg);
    std::function<void()> update;
    std::unique_ptr<OnPolicyOutcomeTrainer> on;
    std::unique_ptr<OffPolicyOutcomeTrainer> off;
    if (variant == OutcomeVariant::kV) {
      on = std::make_unique<OnPolicyOutcomeTrainer>(*model, agent.sim, policy,
                                                    dist, c.outcome, ctx.NextSeed());
      update = [&] { on->Update(); };
    } else {
      if (!agent.buffer) {
        throw ConfigError("off-policy outcome training needs a dqn agent buffer");
      }
      off = std::make_unique<OffPolicyOutcomeTrainer>(
          *model, *agent.buffer, policy, dist, mdp.gamma, c.outcome, ctx.NextSeed());
      update = [&] { off->Update(); };
    }
    Track(ctx, "outcome_char_" + ToString(variant), c.outcome.model.updates,
          c.outcome.model.eval_every, update, [&] {
            source.ClearCache();
            return OutcomeMse(source, table);
          });
    if (on) {
      ctx.result.scalars.Set(ctx.seed, "outcome_char_v_env_steps",
                             static_cast<double>(on->env_steps()));
    }
    models.push_back(std::move(model));
  }

  DistributionSampler sampler(dist, c.shapley_weighting);
  const uint64_t shapley_init = ctx.NextSeed();
  const uint64_t shapley_seed = ctx.NextSeed();
  ExactTableSource exact(table);
  Rng init_exact(shapley_init);
  ShapleyModel se(TargetKind::kOutcome, n, env.n_actions(),
                  c.shapley_model.hidden, init_exact);
  ShapleyTrainer te(se, exact, sampler, reg, c.shapley_model, shapley_seed);
  Track(ctx, "outcome_shapley_exact_char", c.shapley_model.updates,
        c.shapley_model.eval_every, [&] { te.Update(); },
        [&] { return ShapleyModelMse(se, exact, phi, reg); });

  if (models.empty()) return;
  // The off-policy model when present, else the on-policy one.
  const OutcomeModel& upstream_model = *models.back();
  OutcomeModelSource learned(upstream_model, policy, reg);
  Rng init_model(shapley_init);
  ShapleyModel sm(TargetKind::kOutcome, n, env.n_actions(),
                  c.shapley_model.hidden, init_model);
  ShapleyTrainer tm(sm, learned, sampler, reg, c.shapley_model, shapley_seed);
  Track(ctx, "outcome_shapley_model_char", c.shapley_model.updates,
        c.shapley_model.eval_every, [&] { tm.Update(); },
        [&] { return ShapleyModelMse(sm, learned, phi, reg); });
}

void AccuracySeed(SeedContext& ctx) {
  AgentSetup agent = PrepareAgent(ctx.config, ctx.seed);
  RecordAgent(ctx, agent);
  StateDistribution dist = SteadyState(ctx.config, agent, ctx.seed);
  ctx.result.scalars.Set(ctx.seed, "support_size", dist.size());
  const CharacteristicTable behaviour = ExactBehaviourTable(dist, agent.snapshot);
  if (Wants(ctx.config, TargetKind::kBehaviour)) {
    CharAndShapley(ctx, agent, dist, TargetKind::kBehaviour, behaviour);
  }
  if (Wants(ctx.config, TargetKind::kPrediction)) {
    CharAndShapley(ctx, agent, dist, TargetKind::kPrediction,
                   ExactPredictionTable(dist, agent.snapshot));
  }
  if (Wants(ctx.config, TargetKind::kOutcome)) {
    OutcomeArms(ctx, agent, dist, behaviour);
  }
}

void OffPolicySeed(SeedContext& ctx) {
  const RunConfig& c = ctx.config;
  if (c.agent.kind != "dqn") throw ConfigError("offpolicy needs a dqn agent");
  AgentSetup agent = PrepareAgent(c, ctx.seed);
  RecordAgent(ctx, agent);
  StateDistribution dist = SteadyState(c, agent, ctx.seed);
  const Environment& env = agent.sim->env();
  const StateRegistry& reg = *agent.sim->registry_ptr();
  for (TargetKind kind : c.targets) {
    if (kind == TargetKind::kOutcome) continue;
    const CharacteristicTable table = kind == TargetKind::kBehaviour
                                          ? ExactBehaviourTable(dist, agent.snapshot)
                                          : ExactPredictionTable(dist, agent.snapshot);
    // Every arm starts from the same weights and minibatch stream.
    const uint64_t init_seed = ctx.NextSeed();
    const uint64_t train_seed = ctx.NextSeed();
    auto run_arm = [&](const std::string& arm, StateSampler& sampler) {
      Rng init(init_seed);
      CharModel cm(kind, env.n_features(), Outputs(kind, env), c.char_model.hidden,
                   c.char_model.mask_value, init);
      CharTrainer ct(cm, agent.snapshot, sampler, c.char_model, train_seed);
      Track(ctx, ToString(kind) + "_char_" + arm, c.char_model.updates,
            c.char_model.eval_every, [&] { ct.Update(); },
            [&] { return CharModelMse(cm, table, reg); });
    };
    DistributionSampler onpolicy(dist, c.char_weighting);
    run_arm("onpolicy", onpolicy);
    for (const ISConfig& is : c.offpolicy.is_modes) {
      OffPolicySampler sampler(*agent.buffer, agent.snapshot, is);
      run_arm("is_" + ToString(is), sampler);
    }
  }
}

void ContinualSeed(SeedContext& ctx) {
  const RunConfig& c = ctx.config;
  for (int ratio : c.continual.ratios) {
    std::shared_ptr<Environment> env = MakeEnvironment(c.env);
    auto sim = std::make_shared<Simulator>(
        env, std::make_shared<StateRegistry>(env->n_features()));
    ContinualConfig cc;
    cc.kind = c.continual.kind;
    cc.agent = c.agent.dqn;
    cc.char_model = c.char_model;
    cc.shapley_model = c.shapley_model;
    cc.ratio = ratio;
    cc.is = c.continual.is;
    cc.eval_every = c.continual.eval_every;
    ContinualResult run = ContinualTrain(sim, cc, ctx.seed);

    const std::string prefix = "ratio" + std::to_string(ratio);
    double peak_shapley = -kInf, peak_char = -kInf;
    int64_t peak_update = 0, jump_update = 0;
    double best_jump = -kInf;
    const ContinualCheckpoint* previous = nullptr;
    for (const ContinualCheckpoint& cp : run.checkpoints) {
      auto& s = ctx.result.series;
      s.Add(ctx.seed, cp.agent_updates, prefix + "_return", cp.expected_return);
      s.Add(ctx.seed, cp.agent_updates, prefix + "_dqn_loss", cp.dqn_loss);
      if (!cp.exact_available) continue;
      s.Add(ctx.seed, cp.agent_updates, prefix + "_char", cp.char_mse);
      s.Add(ctx.seed, cp.agent_updates, prefix + "_shapley", cp.shapley_mse);
      // Every ratio shares the untrained models at update 0, so peaks are
      // taken once the explainers have started learning.
      if (cp.agent_updates > 0 && cp.shapley_mse > peak_shapley) {
        peak_shapley = cp.shapley_mse;
        peak_update = cp.agent_updates;
      }
      if (cp.agent_updates > 0) peak_char = std::max(peak_char, cp.char_mse);
      if (previous && cp.expected_return - previous->expected_return > best_jump) {
        best_jump = cp.expected_return - previous->expected_return;
        jump_update = cp.agent_updates;
      }
      previous = &cp;
    }
    ScalarTable& t = ctx.result.scalars;
    t.Set(ctx.seed, prefix + "_peak_shapley", peak_shapley);
    t.Set(ctx.seed, prefix + "_peak_char", peak_char);
    t.Set(ctx.seed, prefix + "_peak_update", static_cast<double>(peak_update));
    t.Set(ctx.seed, prefix + "_return_jump_update", static_cast<double>(jump_update));
    t.Set(ctx.seed, prefix + "_return_jump", best_jump);
    t.Set(ctx.seed, prefix + "_spike_offset",
          run.agent_updates > 0
              ? std::abs(static_cast<double>(peak_update - jump_update)) /
                    static_cast<double>(run.agent_updates)
              : 0.0);
    t.Set(ctx.seed, prefix + "_agent_updates", static_cast<double>(run.agent_updates));
    t.Set(ctx.seed, prefix + "_char_updates", static_cast<double>(run.char_updates));
    t.Set(ctx.seed, prefix + "_shapley_updates",
          static_cast<double>(run.shapley_updates));
    t.Set(ctx.seed, prefix + "_final_return",
          run.checkpoints.back().expected_return);
  }
}

void SamplingSeed(SeedContext& ctx) {
  const RunConfig& c = ctx.config;
  AgentSetup agent = PrepareAgent(c, ctx.seed);
  RecordAgent(ctx, agent);
  StateDistribution dist = SteadyState(c, agent, ctx.seed);
  const Environment& env = agent.sim->env();
  const StateRegistry& reg = *agent.sim->registry_ptr();
  const TargetKind kind = TargetKind::kBehaviour;
  const CharacteristicTable table = ExactBehaviourTable(dist, agent.snapshot);
  const ShapleyTable phi(table);
  const int n = env.n_features();
  DistributionSampler sampler(dist, c.shapley_weighting);
  const uint64_t shapley_init = ctx.NextSeed();
  const uint64_t shapley_seed = ctx.NextSeed();

  auto shapley_arm = [&](const std::string& metric, CharSource& source,
                         int64_t offset) {
    Rng init(shapley_init);
    ShapleyModel model(kind, n, env.n_actions(), c.shapley_model.hidden, init);
    ShapleyTrainer trainer(model, source, sampler, reg, c.shapley_model,
                           shapley_seed);
    Track(ctx, metric, c.shapley_model.updates, c.shapley_model.eval_every,
          [&] { trainer.Update(); },
          [&] { return ShapleyModelMse(model, source, phi, reg); }, offset);
  };

  ExactTableSource exact(table);
  shapley_arm("sampling_exact_char", exact, 0);
  SampledSource sampled(kind, dist, agent.snapshot);
  shapley_arm("sampling_sampled", sampled, 0);

  // The model-based arm spends its first updates on the characteristic.
  Rng init(ctx.NextSeed());
  CharModel cm(kind, n, env.n_actions(), c.char_model.hidden,
               c.char_model.mask_value, init);
  DistributionSampler char_sampler(dist, c.char_weighting);
  CharTrainer ct(cm, agent.snapshot, char_sampler, c.char_model, ctx.NextSeed());
  Track(ctx, "sampling_char_pretraining", c.char_model.updates,
        c.char_model.eval_every, [&] { ct.Update(); },
        [&] { return CharModelMse(cm, table, reg); });
  ModelSource learned(cm, agent.snapshot,
                      NullFromDistribution(kind, dist, agent.snapshot));
  shapley_arm("sampling_model_char", learned, c.char_model.updates);
  ctx.result.scalars.Set(ctx.seed, "sampling_model_char_pretraining_updates",
                         static_cast<double>(c.char_model.updates));
}

void HypercubeSeed(SeedContext& ctx) {
  const RunConfig& base = ctx.config;
  for (int dims : base.hypercube.dims) {
    for (int side : base.hypercube.sides) {
      RunConfig c = base;
      c.env.name = "hypercube";
      c.env.dims = dims;
      c.env.side = side;
      AgentSetup agent = PrepareAgent(c, ctx.seed);
      StateDistribution dist = SteadyState(c, agent, ctx.seed);
      const Environment& env = agent.sim->env();
      const StateRegistry& reg = *agent.sim->registry_ptr();
      const CharacteristicTable table = ExactBehaviourTable(dist, agent.snapshot);
      const ShapleyTable phi(table);
      const std::string prefix =
          "n" + std::to_string(dims) + "_l" + std::to_string(side);
      ScalarTable& t = ctx.result.scalars;
      t.Set(ctx.seed, prefix + "_states", std::pow(side, dims));
      t.Set(ctx.seed, prefix + "_support", dist.size());
      t.Set(ctx.seed, prefix + "_agent_return_gap",
            agent.optimal_return - agent.expected_return);

      Rng init(ctx.NextSeed());
      CharModel cm(TargetKind::kBehaviour, dims, env.n_actions(),
                   c.char_model.hidden, c.char_model.mask_value, init);
      DistributionSampler char_sampler(dist, c.char_weighting);
      CharTrainer ct(cm, agent.snapshot, char_sampler, c.char_model, ctx.NextSeed());
      ExactTableSource exact(table);
      ShapleyModel sm(TargetKind::kBehaviour, dims, env.n_actions(),
                      c.shapley_model.hidden, init);
      DistributionSampler sampler(dist, c.shapley_weighting);
      ShapleyTrainer st(sm, exact, sampler, reg, c.shapley_model, ctx.NextSeed());

      // Stops each model once it reaches the threshold.
      auto run = [&](const std::string& metric, int64_t every,
                     const std::function<void()>& update,
                     const std::function<double()>& evaluate) {
        double hit = kInf;
        for (int64_t u = 0;; ++u) {
          if (u % every == 0 || u == base.hypercube.max_updates) {
            const double mse = evaluate();
            ctx.result.series.Add(ctx.seed, u, metric, mse);
            if (mse <= base.threshold) {
              hit = static_cast<double>(u);
              break;
            }
          }
          if (u == base.hypercube.max_updates) break;
          update();
        }
        t.Set(ctx.seed, metric + "_updates_to_threshold", hit);
      };
      run(prefix + "_char", c.char_model.eval_every, [&] { ct.Update(); },
          [&] { return CharModelMse(cm, table, reg); });
      run(prefix + "_shapley", c.shapley_model.eval_every, [&] { st.Update(); },
          [&] { return ShapleyModelMse(sm, exact, phi, reg); });
    }
  }
}

// Training-loss curves only; no exact oracle.
void LargeScaleSeed(SeedContext& ctx) {
  const RunConfig& c = ctx.config;
  if (c.agent.kind != "dqn") throw ConfigError("large-scale runs need a dqn agent");
  AgentSetup agent = PrepareAgent(c, ctx.seed, /*tabular=*/false);
  const StateDistribution dist = BufferStateDistribution(*agent.buffer);
  agent.snapshot.Refresh();
  const Environment& env = agent.sim->env();
  const StateRegistry& reg = *agent.sim->registry_ptr();
  const TargetKind kind = TargetKind::kBehaviour;
  ctx.result.scalars.Set(ctx.seed, "buffer_states", dist.size());

  auto track_loss = [&](const std::string& metric, const ModelConfig& m,
                        const std::function<double()>& update) {
    double window = 0.0;
    int64_t count = 0;
    double last = 0.0;
    for (int64_t u = 1; u <= m.updates; ++u) {
      window += update();
      ++count;
      if (u % m.eval_every == 0 || u == m.updates) {
        last = window / count;
        ctx.result.series.Add(ctx.seed, u, metric, last);
        window = 0.0;
        count = 0;
      }
    }
    ctx.result.scalars.Set(ctx.seed, metric + "_final", last);
  };

  Rng init(ctx.NextSeed());
  CharModel cm(kind, env.n_features(), env.n_actions(), c.char_model.hidden,
               c.char_model.mask_value, init);
  DistributionSampler char_sampler(dist, c.char_weighting);
  CharTrainer ct(cm, agent.snapshot, char_sampler, c.char_model, ctx.NextSeed());
  track_loss("behaviour_char_loss", c.char_model, [&] { return ct.Update(); });

  ModelSource learned(cm, agent.snapshot,
                      NullFromDistribution(kind, dist, agent.snapshot));
  ShapleyModel sm(kind, env.n_features(), env.n_actions(), c.shapley_model.hidden,
                  init);
  DistributionSampler sampler(dist, c.shapley_weighting);
  ShapleyTrainer st(sm, learned, sampler, reg, c.shapley_model, ctx.NextSeed());
  track_loss("behaviour_shapley_loss", c.shapley_model, [&] { return st.Update(); });
}

using SeedRunner = void (*)(SeedContext&);

SeedRunner FindRunner(const std::string& name) {
  if (name == "accuracy") return AccuracySeed;
  if (name == "offpolicy") return OffPolicySeed;
  if (name == "continual") return ContinualSeed;
  if (name == "sampling") return SamplingSeed;
  if (name == "hypercube-scaling") return HypercubeSeed;
  if (name == "large-scale-convergence") return LargeScaleSeed;
  throw ConfigError("unknown experiment '" + name + "'");
}

const char* kPlotScript = R"(import csv
import math
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "series.csv"
curves = defaultdict(lambda: defaultdict(list))
with open(path) as f:
    for row in csv.DictReader(f):
        curves[row["metric"]][int(row["update"])].append(float(row["value"]))

fig, ax = plt.subplots(figsize=(7, 4.5))
for metric, points in sorted(curves.items()):
    xs = sorted(points)
    mean = [sum(points[x]) / len(points[x]) for x in xs]
    se = []
    for x, m in zip(xs, mean):
        v = points[x]
        sd = math.sqrt(sum((y - m) ** 2 for y in v) / (len(v) - 1)) if len(v) > 1 else 0.0
        se.append(sd / math.sqrt(len(v)))
    ax.plot(xs, mean, label=metric)
    ax.fill_between(xs, [m - s for m, s in zip(mean, se)],
                    [m + s for m, s in zip(mean, se)], alpha=0.2)
ax.set_xlabel("update")
ax.set_ylabel("value")
ax.set_yscale("log")
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
)";

}  // namespace

const std::vector<std::string>& ExperimentNames() {
  static const std::vector<std::string> names = {
      "accuracy", "offpolicy", "continual", "sampling", "hypercube-scaling",
      "large-scale-convergence"};
  return names;
}

ExperimentResult RunExperiment(const std::string& name, const RunConfig& config,
                               const std::vector<uint64_t>& seeds) {
  SeedRunner runner = FindRunner(name);
  ExperimentResult result;
  result.name = name;
  for (uint64_t seed : seeds) {
    SeedContext ctx{config, seed, result};
    runner(ctx);
  }
  return result;
}

void WriteArtifacts(const ExperimentResult& result, const RunConfig& config,
                    const std::vector<uint64_t>& seeds, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path root(dir);
  result.series.WriteCsv((root / "series.csv").string());
  result.scalars.WriteCsv((root / "scalars.csv").string());
  result.scalars.WriteSummaryCsv((root / "summary.csv").string());
  nlohmann::json manifest = {
      {"experiment", result.name},
      {"seeds", seeds},
      {"tool_version", ToolVersion()},
      {"config", ToJson(config)},
      {"files", {"series.csv", "scalars.csv", "summary.csv", "plot.py"}}};
  std::ofstream out(root / "manifest.json");
  if (!out) throw DataError("cannot write manifest in " + dir);
  out << manifest.dump(2) << '\n';
  std::ofstream plot(root / "plot.py");
  plot << kPlotScript;
}

}  // namespace fastsverl
