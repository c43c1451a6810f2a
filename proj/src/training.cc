#include "fastsverl/training.h"

#include "fastsverl/errors.h"

namespace fastsverl {

OptimizerState MakeOptimizer(const ModelConfig& config) {
  return config.optimizer == OptimizerKind::kAdam
             ? OptimizerState::Adam(config.learning_rate)
             : OptimizerState::Sgd(config.learning_rate);
}

double LearningRateAt(const ModelConfig& config, int64_t update) {
  if (config.lr_final_factor == 1.0 || config.updates <= 0) {
    return config.learning_rate;
  }
  const double t = std::min(1.0, static_cast<double>(update) /
                                     static_cast<double>(config.updates));
  return config.learning_rate * (1.0 - (1.0 - config.lr_final_factor) * t);
}

DistributionSampler::DistributionSampler(const StateDistribution& dist,
                                         Weighting weighting)
    : dist_(&dist),
      weighting_(weighting),
      by_prob_(dist.probs().begin(), dist.probs().end()) {
  FASTSVERL_REQUIRE(dist.size() > 0, "empty state distribution");
}

void DistributionSampler::Sample(int batch_size, Rng& rng, StateBatch& out) {
  out.states.resize(batch_size);
  out.coef.setConstant(batch_size, 1.0 / batch_size);
  std::uniform_int_distribution<int> uniform(0, dist_->size() - 1);
  for (int b = 0; b < batch_size; ++b) {
    const int pos = weighting_ == Weighting::kProbability ? by_prob_(rng)
                                                          : uniform(rng);
    out.states[b] = dist_->id(pos);
  }
}

DistributionSampler::Weighting ParseWeighting(const std::string& name) {
  if (name == "probability") return DistributionSampler::Weighting::kProbability;
  if (name == "uniform") return DistributionSampler::Weighting::kUniform;
  throw ConfigError("unknown state weighting '" + name +
                    "' (expected probability or uniform)");
}

void TrainLoop(int64_t total, int64_t every,
               const std::function<void()>& update,
               const std::function<void(int64_t)>& evaluate) {
  if (evaluate) evaluate(0);
  for (int64_t t = 1; t <= total; ++t) {
    update();
    if (evaluate && ((every > 0 && t % every == 0) || t == total)) evaluate(t);
  }
}

}  // namespace fastsverl
