#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "fastsverl/errors.h"
#include "fastsverl/experiments.h"
#include "fastsverl/report.h"

namespace fs = std::filesystem;
using namespace fastsverl;

namespace {

struct Common {
  std::string config_path;
  uint64_t seed = 0;
  std::string seeds;
  std::string out = "out";
  std::string agent_dir;
};

RunConfig Load(const Common& o) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : LoadConfig(o.config_path);
  if (!o.seeds.empty()) c.seeds = ParseSeedRange(o.seeds);
  return c;
}

fs::path OutDir(const Common& o) {
  fs::create_directories(o.out);
  return fs::path(o.out);
}

// Trains the configured agent, or restores one written by train-agent.
AgentSetup Agent(const RunConfig& c, const Common& o, bool tabular = true) {
  if (o.agent_dir.empty()) return PrepareAgent(c, o.seed, tabular);
  AgentSetup agent;
  std::shared_ptr<Environment> env = MakeEnvironment(c.env);
  auto registry = std::make_shared<StateRegistry>(env->n_features());
  agent.sim = std::make_shared<Simulator>(env, registry);
  if (tabular) {
    agent.mdp = BuildTabularMdp(*agent.sim);
    agent.optimal_return = ValueIteration(*agent.mdp).expected_return;
  }
  const fs::path dir(o.agent_dir);
  agent.policy = LoadAgent((dir / "agent.mlp").string());
  if (agent.policy->q_net().input_dim() != env->n_features() ||
      agent.policy->n_actions() != env->n_actions()) {
    throw DataError("agent checkpoint does not match the configured environment");
  }
  if (fs::exists(dir / "buffer.csv")) {
    agent.buffer = std::make_shared<ReplayBuffer>(
        ReplayBuffer::ReadCsv((dir / "buffer.csv").string(), registry));
  }
  agent.snapshot = PolicySnapshot(*agent.policy, registry);
  if (agent.mdp) {
    agent.expected_return = ExpectedReturn(
        *agent.mdp, EvaluatePolicy(*agent.mdp,
                                   PolicyFromSnapshot(*agent.mdp, agent.snapshot)));
  }
  return agent;
}

CharacteristicTable ExactTable(TargetKind kind, const AgentSetup& agent,
                               const StateDistribution& dist) {
  switch (kind) {
    case TargetKind::kBehaviour:
      return ExactBehaviourTable(dist, agent.snapshot);
    case TargetKind::kPrediction:
      return ExactPredictionTable(dist, agent.snapshot);
    case TargetKind::kOutcome:
      return ExactOutcomeTable(*agent.mdp, dist, agent.snapshot,
                               ExactBehaviourTable(dist, agent.snapshot));
  }
  throw ContractViolation("unknown target kind");
}

int TrainAgent(const Common& o) {
  RunConfig c = Load(o);
  if (c.agent.kind != "dqn") throw ConfigError("train-agent needs agent.kind = dqn");
  AgentSetup agent = PrepareAgent(c, o.seed);
  const fs::path dir = OutDir(o);
  SaveAgent(*agent.policy, agent.sim->env().spec().name, c.agent.dqn,
            (dir / "agent.mlp").string());
  agent.buffer->WriteCsv((dir / "buffer.csv").string());
  std::cout << "expected return " << agent.expected_return << " (optimal "
            << agent.optimal_return << ")\n";
  return 0;
}

int Exact(const Common& o) {
  RunConfig c = Load(o);
  AgentSetup agent = Agent(c, o);
  StateDistribution dist = SteadyState(c, agent, o.seed);
  const fs::path dir = OutDir(o);
  {
    std::ofstream out(dir / "steady_state.csv");
    out << std::setprecision(17) << "state_id,probability\n";
    for (int i = 0; i < dist.size(); ++i) out << dist.id(i) << ',' << dist.prob(i) << '\n';
  }
  for (TargetKind kind : c.targets) {
    CharacteristicTable table = ExactTable(kind, agent, dist);
    table.WriteCsv((dir / (ToString(kind) + "_char.csv")).string());
    ShapleyTable(table).WriteCsv((dir / (ToString(kind) + "_shapley.csv")).string());
    std::cout << ToString(kind) << ": " << table.size() << " states x "
              << table.n_masks() << " coalitions\n";
  }
  return 0;
}

int TrainChar(const Common& o, const std::string& kind_name) {
  RunConfig c = Load(o);
  const TargetKind kind = ParseTargetKind(kind_name);
  if (kind == TargetKind::kOutcome) {
    throw ConfigError("outcome characteristics are trained with train-outcome");
  }
  AgentSetup agent = Agent(c, o);
  StateDistribution dist = SteadyState(c, agent, o.seed);
  const Environment& env = agent.sim->env();
  CharacteristicTable table = ExactTable(kind, agent, dist);
  Rng init(DeriveSeed(o.seed, 1));
  CharModel model(kind, env.n_features(),
                  kind == TargetKind::kBehaviour ? env.n_actions() : 1,
                  c.char_model.hidden, c.char_model.mask_value, init);
  DistributionSampler sampler(dist, c.char_weighting);
  CharTrainer trainer(model, agent.snapshot, sampler, c.char_model,
                      DeriveSeed(o.seed, 2));
  MetricSeries series;
  TrainLoop(c.char_model.updates, c.char_model.eval_every,
            [&] { trainer.Update(); }, [&](int64_t u) {
              series.Add(o.seed, u, ToString(kind) + "_char",
                         CharModelMse(model, table, agent.sim->registry()));
            });
  const fs::path dir = OutDir(o);
  SaveCharModel(model, (dir / (ToString(kind) + "_char.mlp")).string());
  series.WriteCsv((dir / "series.csv").string());
  std::cout << "final MSE " << series.rows().back().value << "\n";
  return 0;
}

int TrainShapley(const Common& o, const std::string& kind_name,
                 const std::string& source_name, const std::string& char_path) {
  RunConfig c = Load(o);
  const TargetKind kind = ParseTargetKind(kind_name);
  AgentSetup agent = Agent(c, o);
  StateDistribution dist = SteadyState(c, agent, o.seed);
  const Environment& env = agent.sim->env();
  const StateRegistry& reg = agent.sim->registry();
  CharacteristicTable table = ExactTable(kind, agent, dist);
  ShapleyTable phi(table);
  std::unique_ptr<CharSource> source;
  CharModel char_model;
  if (source_name == "exact") {
    source = std::make_unique<ExactTableSource>(table);
  } else if (source_name == "sampled") {
    if (kind == TargetKind::kOutcome) {
      throw ConfigError("sampled sources cover behaviour and prediction");
    }
    source = std::make_unique<SampledSource>(kind, dist, agent.snapshot);
  } else if (source_name == "model") {
    if (char_path.empty()) throw ConfigError("--char-source model needs --char PATH");
    char_model = LoadCharModel(char_path);
    if (char_model.kind() != kind || char_model.n_features() != env.n_features()) {
      throw DataError("characteristic checkpoint does not match the target");
    }
    source = std::make_unique<ModelSource>(
        char_model, agent.snapshot, NullFromDistribution(kind, dist, agent.snapshot));
  } else {
    throw ConfigError("--char-source must be exact, model or sampled");
  }
  Rng init(DeriveSeed(o.seed, 3));
  ShapleyModel model(kind, env.n_features(), env.n_actions(),
                     c.shapley_model.hidden, init);
  DistributionSampler sampler(dist, c.shapley_weighting);
  ShapleyTrainer trainer(model, *source, sampler, reg, c.shapley_model,
                         DeriveSeed(o.seed, 4));
  MetricSeries series;
  TrainLoop(c.shapley_model.updates, c.shapley_model.eval_every,
            [&] { trainer.Update(); }, [&](int64_t u) {
              series.Add(o.seed, u, ToString(kind) + "_shapley",
                         ShapleyModelMse(model, *source, phi, reg));
            });
  const fs::path dir = OutDir(o);
  SaveShapleyModel(model, (dir / (ToString(kind) + "_shapley.mlp")).string());
  series.WriteCsv((dir / "series.csv").string());
  std::cout << "final MSE " << series.rows().back().value << "\n";
  return 0;
}

int TrainOutcome(const Common& o, const std::string& variant_name) {
  RunConfig c = Load(o);
  const OutcomeVariant variant = ParseOutcomeVariant(variant_name);
  AgentSetup agent = Agent(c, o);
  StateDistribution dist = SteadyState(c, agent, o.seed);
  const Environment& env = agent.sim->env();
  CharacteristicTable behaviour = ExactBehaviourTable(dist, agent.snapshot);
  CharacteristicTable table =
      ExactOutcomeTable(*agent.mdp, dist, agent.snapshot, behaviour);
  ExactTableSource upstream(behaviour);
  ConditionedPolicy policy(agent.snapshot, upstream);
  Rng init(DeriveSeed(o.seed, 5));
  OutcomeModel model(variant, env.n_features(), env.n_actions(),
                     c.outcome.model.hidden, init);
  OutcomeModelSource source(model, policy, agent.sim->registry());
  std::function<void()> update;
  std::unique_ptr<OnPolicyOutcomeTrainer> on;
  std::unique_ptr<OffPolicyOutcomeTrainer> off;
  if (variant == OutcomeVariant::kV) {
    on = std::make_unique<OnPolicyOutcomeTrainer>(model, agent.sim, policy, dist,
                                                  c.outcome, DeriveSeed(o.seed, 6));
    update = [&] { on->Update(); };
  } else {
    if (!agent.buffer) throw ConfigError("off-policy training needs an agent buffer");
    off = std::make_unique<OffPolicyOutcomeTrainer>(
        model, *agent.buffer, policy, dist, agent.mdp->gamma, c.outcome,
        DeriveSeed(o.seed, 6));
    update = [&] { off->Update(); };
  }
  MetricSeries series;
  TrainLoop(c.outcome.model.updates, c.outcome.model.eval_every, update,
            [&](int64_t u) {
              source.ClearCache();
              series.Add(o.seed, u, "outcome_char_" + ToString(variant),
                         OutcomeMse(source, table));
            });
  const fs::path dir = OutDir(o);
  SaveMlp(model.net(), (dir / ("outcome_" + ToString(variant) + ".mlp")).string());
  series.WriteCsv((dir / "series.csv").string());
  std::cout << "final MSE " << series.rows().back().value << "\n";
  return 0;
}

int Experiment(const Common& o, const std::string& name) {
  RunConfig c = Load(o);
  std::vector<uint64_t> seeds = o.seeds.empty() ? c.seeds : ParseSeedRange(o.seeds);
  ExperimentResult result = RunExperiment(name, c, seeds);
  std::string dir = o.out;
  if (dir.empty()) dir = c.output_dir;
  WriteArtifacts(result, c, seeds, dir);
  std::cout << "wrote " << dir << "/series.csv, scalars.csv, summary.csv\n";
  for (const std::string& key : result.scalars.Keys()) {
    Aggregate a = Summarize(result.scalars.Values(key));
    std::cout << key << ": median " << Median(result.scalars.Values(key))
              << " mean " << a.mean << " +/- " << a.se << "\n";
  }
  return 0;
}

int Explain(const Common& o, const std::string& shapley_path,
            const std::string& state_text, int action, const std::string& svg) {
  RunConfig c = Load(o);
  AgentSetup agent = Agent(c, o);
  StateDistribution dist = SteadyState(c, agent, o.seed);
  const Environment& env = agent.sim->env();
  ShapleyModel model = LoadShapleyModel(shapley_path);
  if (model.n_features() != env.n_features() ||
      (model.kind() == TargetKind::kBehaviour && model.n_actions() != env.n_actions())) {
    throw DataError("Shapley checkpoint does not match the configured environment");
  }
  std::vector<int> features = ParseStateSpec(state_text, env.n_features());
  const int state = agent.sim->registry().Find(FeatureState{features, false});
  if (state < 0 || dist.position(state) < 0) {
    throw DataError("state " + state_text + " is outside the explained support");
  }
  CharacteristicTable table = ExactTable(model.kind(), agent, dist);
  ExactTableSource source(table);
  const int greedy = agent.snapshot.greedy(state);
  std::vector<Explanation> explanations;
  if (model.kind() == TargetKind::kBehaviour) {
    if (action >= 0) {
      explanations.push_back(Explain(model, source, agent.sim->registry(), state, action));
    } else {
      for (int a = 0; a < env.n_actions(); ++a) {
        explanations.push_back(Explain(model, source, agent.sim->registry(), state, a));
      }
    }
  } else {
    explanations.push_back(Explain(model, source, agent.sim->registry(), state, -1));
  }
  for (const Explanation& e : explanations) {
    std::cout << FormatExplanation(e, env, features);
    double sum = 0.0;
    for (double v : e.corrected) sum += v;
    FASTSVERL_REQUIRE(std::abs(sum - (e.full_value - e.null_value)) < 1e-9,
                      "corrected attributions do not sum to full - null");
  }
  const fs::path dir = OutDir(o);
  WriteExplanationCsv((dir / "explanation.csv").string(), explanations);
  if (const auto* mm = dynamic_cast<const Mastermind*>(&env)) {
    const Explanation* shown = &explanations.front();
    for (const Explanation& e : explanations) {
      if (e.action == greedy) shown = &e;
    }
    std::ofstream out(svg.empty() ? dir / "heatmap.svg" : fs::path(svg));
    out << MastermindHeatmapSvg(*mm, features, shown->corrected, greedy,
                                ToString(model.kind()) + " explanation, state " +
                                    std::to_string(state));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact and amortised Shapley explanations for tabular RL agents"};
  app.require_subcommand(1);
  Common o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "run config (JSON)");
    sub->add_option("--seed", o.seed, "seed");
    sub->add_option("--out", o.out, "output directory");
  };
  auto add_agent = [&](CLI::App* sub) {
    sub->add_option("--agent", o.agent_dir,
                    "directory written by train-agent (default: train from config)");
  };

  auto* train_agent = app.add_subcommand("train-agent", "train the DQN agent");
  add_common(train_agent);

  auto* exact = app.add_subcommand("exact", "write exact characteristic and Shapley tables");
  add_common(exact);
  add_agent(exact);

  std::string kind = "behaviour";
  auto* train_char = app.add_subcommand("train-char", "train a characteristic model");
  add_common(train_char);
  add_agent(train_char);
  train_char->add_option("--kind", kind, "behaviour or prediction");

  std::string source = "exact", char_path;
  auto* train_shapley = app.add_subcommand("train-shapley", "train a Shapley model");
  add_common(train_shapley);
  add_agent(train_shapley);
  train_shapley->add_option("--kind", kind, "behaviour, prediction or outcome");
  train_shapley->add_option("--char-source", source, "exact, model or sampled");
  train_shapley->add_option("--char", char_path, "characteristic checkpoint");

  std::string variant = "q";
  auto* train_outcome = app.add_subcommand("train-outcome", "train an outcome model");
  add_common(train_outcome);
  add_agent(train_outcome);
  train_outcome->add_option("--variant", variant, "v (on-policy) or q (off-policy)");

  std::string name;
  auto* experiment = app.add_subcommand("experiment", "run an experiment pipeline");
  add_common(experiment);
  experiment->add_option("name", name, "experiment name")
      ->required()
      ->check(CLI::IsMember(ExperimentNames()));
  experiment->add_option("--seeds", o.seeds, "seed range N..M");

  std::string shapley_path, state_text, svg;
  int action = -1;
  auto* explain = app.add_subcommand("explain", "explain one state");
  add_common(explain);
  add_agent(explain);
  explain->add_option("--shapley", shapley_path, "Shapley checkpoint")->required();
  explain->add_option("--state", state_text, "comma-separated feature values")
      ->required();
  explain->add_option("--action", action, "action to explain (default: all)");
  explain->add_option("--svg", svg, "heatmap path (Mastermind only)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train_agent) return TrainAgent(o);
    if (*exact) return Exact(o);
    if (*train_char) return TrainChar(o, kind);
    if (*train_shapley) return TrainShapley(o, kind, source, char_path);
    if (*train_outcome) return TrainOutcome(o, variant);
    if (*experiment) return Experiment(o, name);
    if (*explain) return Explain(o, shapley_path, state_text, action, svg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
