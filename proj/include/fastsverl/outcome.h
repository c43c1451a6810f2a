#ifndef FASTSVERL_OUTCOME_H_
#define FASTSVERL_OUTCOME_H_

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "fastsverl/char_source.h"
#include "fastsverl/training.h"

namespace fastsverl {

// Follows pi everywhere except at the state being explained, where it acts by
// the behaviour characteristic at (s_e, C). Characteristic vectors are
// clamped to [0, 1] and renormalised; an all-zero vector falls back to the
// uniform distribution.
class ConditionedPolicy {
 public:
  ConditionedPolicy(const PolicySnapshot& pi, CharSource& behaviour);

  std::vector<double> Probabilities(int state, int explain_state, uint64_t mask,
                                    Rng& rng);
  int Sample(int state, int explain_state, uint64_t mask, Rng& rng);
  int64_t fallbacks() const { return fallbacks_; }
  const PolicySnapshot& base() const { return *pi_; }
  CharSource& behaviour() { return *behaviour_; }

 private:
  const PolicySnapshot* pi_;
  CharSource* behaviour_;
  int64_t fallbacks_ = 0;
};

enum class OutcomeVariant { kV, kQ };

std::string ToString(OutcomeVariant variant);
OutcomeVariant ParseOutcomeVariant(const std::string& name);

// V(s | s_e, C) or Q(s, . | s_e, C). Inputs are the state features, the
// explained state's features and the n coalition bits.
class OutcomeModel {
 public:
  OutcomeModel() = default;
  OutcomeModel(OutcomeVariant variant, int n_features, int n_actions,
               const std::vector<int>& hidden, Rng& rng);

  OutcomeVariant variant() const { return variant_; }
  int n_features() const { return n_features_; }
  int n_outputs() const { return net_.output_dim(); }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  const Mlp& target() const { return target_; }
  void SyncTarget() { target_ = net_; }

  void FillInput(std::span<const int> state, std::span<const int> explain_state,
                 uint64_t mask, Eigen::Ref<Eigen::VectorXd> column) const;

 private:
  OutcomeVariant variant_ = OutcomeVariant::kV;
  int n_features_ = 0;
  Mlp net_;
  Mlp target_;
};

struct OutcomeRecord {
  int state = -1;
  int action = 0;
  double reward = 0.0;
  int next_state = -1;
  bool done = false;
  int explain_state = -1;
  uint64_t mask = 0;
};

// FIFO of conditioned-policy transitions.
class OutcomeBuffer {
 public:
  explicit OutcomeBuffer(size_t capacity);

  void Add(const OutcomeRecord& record);
  size_t size() const { return records_.size(); }
  const OutcomeRecord& at(size_t i) const;
  const OutcomeRecord& Sample(Rng& rng) const;

  // state_id,s_*,action,reward,next_id,next_*,done,explain_id,coalition_mask
  void WriteCsv(const std::string& path, const StateRegistry& registry) const;

 private:
  size_t capacity_;
  size_t head_ = 0;
  std::vector<OutcomeRecord> records_;
};

struct OutcomeConfig {
  ModelConfig model;
  int target_sync = 100;
  // On-policy only: environment steps collected before each update.
  int env_steps_per_update = 1;
  size_t buffer_capacity = 100000;
  int64_t learning_starts = 256;
};

// Rolls out the conditioned policy from s_e with (s_e, C) redrawn every
// episode (s_e uniform over the explained support, C uniform over all 2^n
// subsets) and fits V by TD(0) against a target network.
class OnPolicyOutcomeTrainer {
 public:
  OnPolicyOutcomeTrainer(OutcomeModel& model, std::shared_ptr<Simulator> sim,
                         ConditionedPolicy& policy,
                         const StateDistribution& support,
                         const OutcomeConfig& config, uint64_t seed);

  double Update();
  int64_t updates() const { return updates_; }
  int64_t env_steps() const { return env_steps_; }
  const OutcomeBuffer& buffer() const { return buffer_; }

 private:
  void StepEnv();

  OutcomeModel* model_;
  std::shared_ptr<Simulator> sim_;
  ConditionedPolicy* policy_;
  const StateDistribution* support_;
  OutcomeConfig config_;
  Rng rng_;
  OptimizerState opt_;
  OutcomeBuffer buffer_;
  int state_ = -1;
  int explain_state_ = -1;
  uint64_t mask_ = 0;
  int episode_steps_ = 0;
  int64_t env_steps_ = 0;
  int64_t updates_ = 0;
};

// Fits Q on the agent's replay buffer. Each sampled transition gets its own
// (s_e, C); the bootstrap averages Q(s', .) under the conditioned policy.
class OffPolicyOutcomeTrainer {
 public:
  OffPolicyOutcomeTrainer(OutcomeModel& model, const ReplayBuffer& agent_buffer,
                          ConditionedPolicy& policy,
                          const StateDistribution& support, double gamma,
                          const OutcomeConfig& config, uint64_t seed);

  double Update();
  int64_t updates() const { return updates_; }

 private:
  OutcomeModel* model_;
  const ReplayBuffer* agent_buffer_;
  ConditionedPolicy* policy_;
  const StateDistribution* support_;
  double gamma_;
  OutcomeConfig config_;
  Rng rng_;
  OptimizerState opt_;
  int64_t updates_ = 0;
};

// Recovered outcome characteristic: V(s_e | s_e, C), or
// sum_a pi-hat(s_e, a | C) Q(s_e, a | s_e, C).
class OutcomeModelSource : public CharSource {
 public:
  OutcomeModelSource(const OutcomeModel& model, ConditionedPolicy& policy,
                     const StateRegistry& registry);

  TargetKind kind() const override { return TargetKind::kOutcome; }
  int n_features() const override { return model_->n_features(); }
  int n_outputs() const override { return 1; }
  void Values(std::span<const CharQuery> queries, std::span<double> out,
              Rng& rng) override;
  double Null(int state, int output) override;
  double Full(int state, int output) override;
  // Drops cached null and full values after the model changes.
  void ClearCache();

 private:
  double Cached(int state, uint64_t mask);

  const OutcomeModel* model_;
  ConditionedPolicy* policy_;
  const StateRegistry* registry_;
  Rng rng_{0};
  std::unordered_map<int, double> null_;
  std::unordered_map<int, double> full_;
};

// Uniform mean squared error of a source against an exact outcome table over
// support states and every coalition.
double OutcomeMse(CharSource& source, const CharacteristicTable& exact);

}  // namespace fastsverl

#endif  // FASTSVERL_OUTCOME_H_
