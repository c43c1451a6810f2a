#include "fastsverl/regimes.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fastsverl/errors.h"
#include "fastsverl/tabular.h"

namespace fastsverl {

ISConfig ParseISConfig(const std::string& text) {
  ISConfig config;
  if (text == "none") return config;
  if (text == "raw") {
    config.mode = ISConfig::Mode::kRaw;
    return config;
  }
  if (text == "normalized") {
    config.mode = ISConfig::Mode::kNormalized;
    return config;
  }
  const std::string prefix = "clipped:";
  if (text.rfind(prefix, 0) == 0) {
    config.mode = ISConfig::Mode::kClipped;
    try {
      size_t used = 0;
      config.clip = std::stod(text.substr(prefix.size()), &used);
      if (used != text.size() - prefix.size()) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      throw ConfigError("bad clipping threshold in '" + text + "'");
    }
    if (!(config.clip >= 0.0 && config.clip < 1.0)) {
      throw ConfigError("clipping threshold must lie in [0, 1)");
    }
    return config;
  }
  throw ConfigError("unknown importance sampling mode '" + text +
                    "' (expected none, raw, normalized or clipped:<c>)");
}

std::string ToString(const ISConfig& config) {
  switch (config.mode) {
    case ISConfig::Mode::kNone:
      return "none";
    case ISConfig::Mode::kRaw:
      return "raw";
    case ISConfig::Mode::kNormalized:
      return "normalized";
    case ISConfig::Mode::kClipped: {
      std::string c = std::to_string(config.clip);
      c.erase(c.find_last_not_of('0') + 1);
      if (c.back() == '.') c.pop_back();
      return "clipped:" + c;
    }
  }
  return "unknown";
}

namespace {

double RawWeight(const ReplayRecord& r, const PolicySnapshot& target) {
  if (!(r.behaviour_prob > 0.0)) {
    throw DataError("replay record at step " + std::to_string(r.step) +
                    " has zero behaviour probability");
  }
  return target.probability(r.state, r.action) / r.behaviour_prob;
}

}  // namespace

Eigen::VectorXd IsWeights(std::span<const ReplayRecord* const> records,
                          const PolicySnapshot& target, const ISConfig& config) {
  const Eigen::Index n = static_cast<Eigen::Index>(records.size());
  Eigen::VectorXd w(n);
  if (config.mode == ISConfig::Mode::kNone) {
    w.setOnes();
    return w;
  }
  for (Eigen::Index i = 0; i < n; ++i) w[i] = RawWeight(*records[i], target);
  switch (config.mode) {
    case ISConfig::Mode::kNormalized: {
      const double total = w.sum();
      if (total > 0.0) w /= total;
      break;
    }
    case ISConfig::Mode::kClipped:
      for (Eigen::Index i = 0; i < n; ++i) {
        w[i] = std::clamp(w[i], 1.0 - config.clip, 1.0 + config.clip);
      }
      break;
    default:
      break;
  }
  return w;
}

OffPolicySampler::OffPolicySampler(const ReplayBuffer& buffer,
                                   const PolicySnapshot& target,
                                   ISConfig config)
    : buffer_(&buffer), target_(&target), config_(config) {}

void OffPolicySampler::Sample(int batch_size, Rng& rng, StateBatch& out) {
  rows_.resize(batch_size);
  out.states.resize(batch_size);
  for (int b = 0; b < batch_size; ++b) {
    rows_[b] = &buffer_->Sample(rng);
    out.states[b] = rows_[b]->state;
  }
  const double inv = 1.0 / batch_size;
  if (config_.mode == ISConfig::Mode::kNone) {
    out.coef.setConstant(batch_size, inv);
    return;
  }
  out.coef = IsWeights(rows_, *target_, config_);
  if (config_.mode != ISConfig::Mode::kNormalized) out.coef *= inv;
}

std::vector<double> NullFromBuffer(TargetKind kind, const ReplayBuffer& buffer,
                                   const PolicySnapshot& target,
                                   const ISConfig& config) {
  FASTSVERL_REQUIRE(!buffer.empty(), "empty replay buffer");
  const int outputs = kind == TargetKind::kBehaviour ? target.n_actions() : 1;
  std::vector<const ReplayRecord*> rows(buffer.size());
  for (size_t i = 0; i < buffer.size(); ++i) rows[i] = &buffer.at(i);
  ISConfig weights = config;
  // The whole-buffer mean normalises once over every record.
  if (weights.mode == ISConfig::Mode::kNormalized) weights.mode = ISConfig::Mode::kRaw;
  Eigen::VectorXd w = IsWeights(rows, target, weights);
  double denom = static_cast<double>(rows.size());
  if (config.mode == ISConfig::Mode::kNormalized) {
    denom = w.sum();
    if (!(denom > 0.0)) {
      // No record agrees with the target policy; fall back to the plain mean.
      return NullFromBuffer(kind, buffer, target, ISConfig{});
    }
  }
  std::vector<double> null(outputs, 0.0);
  for (size_t i = 0; i < rows.size(); ++i) {
    for (int o = 0; o < outputs; ++o) {
      null[o] += w[i] * RawTarget(kind, target, rows[i]->state, o);
    }
  }
  for (double& v : null) v /= denom;
  return null;
}

// ---------------------------------------------------------------------------

ContinualResult ContinualTrain(std::shared_ptr<Simulator> sim,
                               const ContinualConfig& config, uint64_t seed) {
  FASTSVERL_REQUIRE(config.ratio >= 1, "update ratio must be positive");
  FASTSVERL_REQUIRE(config.kind != TargetKind::kOutcome,
                    "continual training covers behaviour and prediction");
  TabularMdp mdp = BuildTabularMdp(*sim);
  const StateRegistry& registry = *sim->registry_ptr();
  const int n = sim->env().n_features();
  const int n_actions = sim->env().n_actions();
  const int outputs = config.kind == TargetKind::kBehaviour ? n_actions : 1;

  DqnTrainer agent(sim, config.agent, seed);
  Rng init(seed ^ 0x9e3779b97f4a7c15ull);
  CharModel char_model(config.kind, n, outputs, config.char_model.hidden,
                       config.char_model.mask_value, init);
  ShapleyModel shapley(config.kind, n, n_actions, config.shapley_model.hidden,
                       init);
  PolicySnapshot snapshot(agent.policy(), sim->registry_ptr());
  OffPolicySampler sampler(agent.buffer(), snapshot, config.is);
  CharTrainer char_trainer(char_model, snapshot, sampler, config.char_model,
                           seed + 1);
  ModelSource source(char_model, snapshot, std::vector<double>(outputs, 0.0));
  ShapleyTrainer shapley_trainer(shapley, source, sampler, registry,
                                 config.shapley_model, seed + 2);

  ContinualResult result;
  auto checkpoint = [&]() {
    ContinualCheckpoint c;
    c.agent_updates = agent.updates();
    c.env_steps = agent.steps();
    c.dqn_loss = agent.last_loss();
    try {
      Eigen::VectorXd values = EvaluatePolicy(mdp, PolicyFromSnapshot(mdp, snapshot));
      c.expected_return = ExpectedReturn(mdp, values);
      StateDistribution dist = AnalyticSteadyState(mdp, snapshot);
      CharacteristicTable table = config.kind == TargetKind::kBehaviour
                                      ? ExactBehaviourTable(dist, snapshot)
                                      : ExactPredictionTable(dist, snapshot);
      ShapleyTable exact(table);
      c.char_mse = CharModelMse(char_model, table, registry);
      c.shapley_mse = ShapleyModelMse(shapley, source, exact, registry);
    } catch (const DataError&) {
      // A greedy policy that never terminates has no steady state.
      c.exact_available = false;
      c.expected_return = std::numeric_limits<double>::quiet_NaN();
    }
    result.checkpoints.push_back(c);
  };

  checkpoint();
  while (!agent.finished()) {
    if (!agent.Step()) continue;
    snapshot = PolicySnapshot(agent.policy(), sim->registry_ptr());
    source.set_null(NullFromBuffer(config.kind, agent.buffer(), snapshot, config.is));
    for (int k = 0; k < config.ratio; ++k) {
      char_trainer.Update();
      shapley_trainer.Update();
    }
    if (agent.updates() % config.eval_every == 0) checkpoint();
  }
  if (result.checkpoints.back().agent_updates != agent.updates()) checkpoint();
  result.agent_updates = agent.updates();
  result.char_updates = char_trainer.updates();
  result.shapley_updates = shapley_trainer.updates();
  return result;
}

}  // namespace fastsverl
