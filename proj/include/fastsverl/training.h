#ifndef FASTSVERL_TRAINING_H_
#define FASTSVERL_TRAINING_H_

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "fastsverl/exact.h"
#include "fastsverl/mlp.h"

namespace fastsverl {

// Hyperparameters shared by the characteristic, Shapley and outcome models.
struct ModelConfig {
  std::vector<int> hidden = {64, 64};
  double learning_rate = 1e-3;
  // Learning rate decays linearly to learning_rate * lr_final_factor over
  // `updates`. 1 keeps it constant.
  double lr_final_factor = 1.0;
  int batch_size = 64;
  int64_t updates = 5000;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  int64_t eval_every = 250;
  double mask_value = -1.0;
};

OptimizerState MakeOptimizer(const ModelConfig& config);
double LearningRateAt(const ModelConfig& config, int64_t update);

// A batch of training states with per-sample loss coefficients. Plain
// minibatches use coef = 1/B; importance-sampled batches fold their weights
// into coef.
struct StateBatch {
  std::vector<int> states;
  Eigen::VectorXd coef;
};

class StateSampler {
 public:
  virtual ~StateSampler() = default;
  virtual void Sample(int batch_size, Rng& rng, StateBatch& out) = 0;
};

// Draws states from a StateDistribution, either by probability (the
// distribution itself) or uniformly over its de-duplicated support.
class DistributionSampler : public StateSampler {
 public:
  enum class Weighting { kProbability, kUniform };

  DistributionSampler(const StateDistribution& dist, Weighting weighting);
  void Sample(int batch_size, Rng& rng, StateBatch& out) override;

 private:
  const StateDistribution* dist_;
  Weighting weighting_;
  std::discrete_distribution<int> by_prob_;
};

DistributionSampler::Weighting ParseWeighting(const std::string& name);

// Runs `update` `total` times, calling `evaluate(update_index)` at index 0,
// every `every` updates and after the last one.
void TrainLoop(int64_t total, int64_t every,
               const std::function<void()>& update,
               const std::function<void(int64_t)>& evaluate);

}  // namespace fastsverl

#endif  // FASTSVERL_TRAINING_H_
