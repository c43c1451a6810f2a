#ifndef FASTSVERL_CONFIG_H_
#define FASTSVERL_CONFIG_H_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fastsverl/outcome.h"
#include "fastsverl/regimes.h"
#include "json.hpp"

namespace fastsverl {

inline constexpr int kSchemaVersion = 1;

struct EnvConfig {
  // gridworld, mastermind or hypercube.
  std::string name = "gridworld";
  int code_len = 2;
  int max_guesses = 2;
  int alphabet_size = 2;
  int dims = 2;
  int side = 3;
  // Negative keeps the environment default.
  double gamma = -1.0;
  int max_episode_steps = 0;
};

struct AgentConfig {
  // "dqn" trains a network; "optimal" uses the value-iteration policy.
  std::string kind = "dqn";
  DqnConfig dqn;
};

struct SteadyStateConfig {
  StateDistribution::Mode mode = StateDistribution::Mode::kAnalytic;
  int64_t episodes = 10000;
};

struct OffPolicyConfig {
  std::vector<ISConfig> is_modes = {ISConfig{}};
};

struct ContinualSection {
  TargetKind kind = TargetKind::kPrediction;
  std::vector<int> ratios = {1};
  ISConfig is;
  int64_t eval_every = 100;
};

struct HypercubeSection {
  std::vector<int> dims = {2, 3};
  std::vector<int> sides = {3, 5, 7};
  int64_t max_updates = 20000;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  std::string experiment;
  EnvConfig env;
  AgentConfig agent;
  SteadyStateConfig steady_state;
  ModelConfig char_model;
  DistributionSampler::Weighting char_weighting =
      DistributionSampler::Weighting::kProbability;
  ModelConfig shapley_model;
  DistributionSampler::Weighting shapley_weighting =
      DistributionSampler::Weighting::kUniform;
  OutcomeConfig outcome;
  std::vector<OutcomeVariant> outcome_variants = {OutcomeVariant::kV,
                                                  OutcomeVariant::kQ};
  std::vector<TargetKind> targets = {TargetKind::kBehaviour,
                                     TargetKind::kPrediction,
                                     TargetKind::kOutcome};
  OffPolicyConfig offpolicy;
  ContinualSection continual;
  HypercubeSection hypercube;
  double threshold = 0.01;
  std::vector<uint64_t> seeds = {0};
  std::string output_dir;
};

// Throws ConfigError on unknown keys, wrong types, out-of-range values or a
// schema_version mismatch.
RunConfig ParseConfig(const nlohmann::json& j);
RunConfig LoadConfig(const std::string& path);
// Fully resolved echo; ParseConfig(ToJson(c)) reproduces c.
nlohmann::json ToJson(const RunConfig& config);

// "N..M" (inclusive) or a single "N".
std::vector<uint64_t> ParseSeedRange(const std::string& text);

std::shared_ptr<Environment> MakeEnvironment(const EnvConfig& config);

}  // namespace fastsverl

#endif  // FASTSVERL_CONFIG_H_
