#ifndef FASTSVERL_REGIMES_H_
#define FASTSVERL_REGIMES_H_

#include <memory>
#include <string>
#include <vector>

#include "fastsverl/char_model.h"
#include "fastsverl/shapley_model.h"

namespace fastsverl {

// Importance weights pi(s_t, a_t) / pi_t(s_t, a_t) and their variants.
struct ISConfig {
  enum class Mode { kNone, kRaw, kNormalized, kClipped };
  Mode mode = Mode::kNone;
  // Clipped mode keeps weights in [1 - clip, 1 + clip].
  double clip = 0.0;
};

// "none", "raw", "normalized" or "clipped:<c>".
ISConfig ParseISConfig(const std::string& text);
std::string ToString(const ISConfig& config);

// Per-record weights for a batch. Normalized weights sum to 1 (all zero when
// every raw weight is zero). Throws DataError for a non-positive behaviour
// probability.
Eigen::VectorXd IsWeights(std::span<const ReplayRecord* const> records,
                          const PolicySnapshot& target, const ISConfig& config);

// Samples records uniformly from an agent buffer and turns their importance
// weights into loss coefficients: 1/B (none), w/B (raw, clipped) or w/sum(w)
// (normalized), so the normalized loss is a weighted sum rather than a mean.
class OffPolicySampler : public StateSampler {
 public:
  OffPolicySampler(const ReplayBuffer& buffer, const PolicySnapshot& target,
                   ISConfig config);
  void Sample(int batch_size, Rng& rng, StateBatch& out) override;
  void set_target(const PolicySnapshot& target) { target_ = &target; }

 private:
  const ReplayBuffer* buffer_;
  const PolicySnapshot* target_;
  ISConfig config_;
  std::vector<const ReplayRecord*> rows_;
};

// Importance-weighted mean of the raw target over a whole buffer.
std::vector<double> NullFromBuffer(TargetKind kind, const ReplayBuffer& buffer,
                                   const PolicySnapshot& target,
                                   const ISConfig& config);

struct ContinualConfig {
  TargetKind kind = TargetKind::kPrediction;
  DqnConfig agent;
  ModelConfig char_model;
  ModelConfig shapley_model;
  // Explainer updates (of each model) per agent update.
  int ratio = 1;
  ISConfig is;
  // Agent updates between evaluation checkpoints.
  int64_t eval_every = 100;
};

struct ContinualCheckpoint {
  int64_t agent_updates = 0;
  int64_t env_steps = 0;
  double char_mse = 0.0;
  double shapley_mse = 0.0;
  double expected_return = 0.0;
  double dqn_loss = 0.0;
  bool exact_available = true;
};

struct ContinualResult {
  std::vector<ContinualCheckpoint> checkpoints;
  int64_t agent_updates = 0;
  int64_t char_updates = 0;
  int64_t shapley_updates = 0;
};

// Trains the agent and a characteristic + Shapley model pair together. After
// every agent update the explainers take `ratio` importance-weighted steps on
// the agent's buffer against the agent's current greedy policy. Checkpoints
// recompute the exact explanations of that policy.
ContinualResult ContinualTrain(std::shared_ptr<Simulator> sim,
                               const ContinualConfig& config, uint64_t seed);

}  // namespace fastsverl

#endif  // FASTSVERL_REGIMES_H_
