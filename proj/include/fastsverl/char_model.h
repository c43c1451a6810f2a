#ifndef FASTSVERL_CHAR_MODEL_H_
#define FASTSVERL_CHAR_MODEL_H_

#include <string>
#include <vector>

#include "fastsverl/char_source.h"
#include "fastsverl/training.h"

namespace fastsverl {

// Learned characteristic function over masked states. Behaviour models have
// one output per action, prediction models a single output. Features outside
// the coalition are replaced by `mask_value`.
class CharModel {
 public:
  CharModel() = default;
  CharModel(TargetKind kind, int n_features, int n_outputs,
            const std::vector<int>& hidden, double mask_value, Rng& rng);
  CharModel(TargetKind kind, Mlp net, double mask_value);

  TargetKind kind() const { return kind_; }
  int n_features() const { return net_.input_dim(); }
  int n_outputs() const { return net_.output_dim(); }
  double mask_value() const { return mask_value_; }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

  void FillInput(std::span<const int> features, uint64_t mask,
                 Eigen::Ref<Eigen::VectorXd> column) const;
  // Raw outputs (n_outputs x batch) for already built inputs.
  Eigen::MatrixXd Forward(const Eigen::MatrixXd& inputs) const;
  // Query-time outputs: behaviour values are clamped to [0, 1].
  Eigen::VectorXd Query(std::span<const int> features, uint64_t mask) const;
  double Clamp(double value) const;

 private:
  TargetKind kind_ = TargetKind::kBehaviour;
  Mlp net_;
  double mask_value_ = -1.0;
};

// Regresses the raw target pi(s, .) or vhat(s) on masked inputs with
// coalitions drawn uniformly from all 2^n subsets.
class CharTrainer {
 public:
  CharTrainer(CharModel& model, const PolicySnapshot& snapshot,
              StateSampler& sampler, const ModelConfig& config, uint64_t seed);

  // One gradient step; returns the batch loss.
  double Update();
  int64_t updates() const { return updates_; }
  void set_snapshot(const PolicySnapshot& snapshot) { snapshot_ = &snapshot; }
  void set_sampler(StateSampler& sampler) { sampler_ = &sampler; }

 private:
  CharModel* model_;
  const PolicySnapshot* snapshot_;
  StateSampler* sampler_;
  ModelConfig config_;
  Rng rng_;
  OptimizerState opt_;
  StateBatch batch_;
  int64_t updates_ = 0;
};

// Uniform mean squared error against an exact table over support states,
// outputs and every coalition.
double CharModelMse(const CharModel& model, const CharacteristicTable& exact,
                    const StateRegistry& registry);

// CharSource over a trained CharModel. C = F returns the raw target; the
// null value is a cached mean that only changes through set_null().
class ModelSource : public CharSource {
 public:
  ModelSource(const CharModel& model, const PolicySnapshot& snapshot,
              std::vector<double> null);

  TargetKind kind() const override { return model_->kind(); }
  int n_features() const override { return model_->n_features(); }
  int n_outputs() const override { return model_->n_outputs(); }
  void Values(std::span<const CharQuery> queries, std::span<double> out,
              Rng& rng) override;
  double Null(int, int output) override { return null_[output]; }
  double Full(int state, int output) override;

  void set_null(std::vector<double> null) { null_ = std::move(null); }
  void set_snapshot(const PolicySnapshot& snapshot) { snapshot_ = &snapshot; }

 private:
  const CharModel* model_;
  const PolicySnapshot* snapshot_;
  std::vector<double> null_;
  Eigen::MatrixXd inputs_;
};

// Checkpoint in the mlp format plus a JSON sidecar at path + ".json" holding
// the target kind, mask value and feature count.
void SaveCharModel(const CharModel& model, const std::string& path);
CharModel LoadCharModel(const std::string& path);

}  // namespace fastsverl

#endif  // FASTSVERL_CHAR_MODEL_H_
