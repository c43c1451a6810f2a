#ifndef FASTSVERL_SHAPLEY_MODEL_H_
#define FASTSVERL_SHAPLEY_MODEL_H_

#include <string>
#include <vector>

#include "fastsverl/char_source.h"
#include "fastsverl/training.h"

namespace fastsverl {

// phi-hat(s[, a]) -> R^n. Behaviour models see the action as a one-hot block
// appended to the state features.
class ShapleyModel {
 public:
  ShapleyModel() = default;
  ShapleyModel(TargetKind kind, int n_features, int n_actions,
               const std::vector<int>& hidden, Rng& rng);
  ShapleyModel(TargetKind kind, int n_features, Mlp net);

  TargetKind kind() const { return kind_; }
  int n_features() const { return n_features_; }
  // Width of the action one-hot (0 for outcome and prediction).
  int n_actions() const { return net_.input_dim() - n_features_; }
  int n_outputs() const { return kind_ == TargetKind::kBehaviour ? n_actions() : 1; }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

  void FillInput(std::span<const int> features, int action,
                 Eigen::Ref<Eigen::VectorXd> column) const;
  Eigen::VectorXd Raw(std::span<const int> features, int action) const;

 private:
  TargetKind kind_ = TargetKind::kBehaviour;
  int n_features_ = 0;
  Mlp net_;
};

// Minimises |char(C) - char(empty) - sum_{i in C} phi-hat_i|^2 with C drawn
// from the Shapley kernel subset distribution and, for behaviour, actions
// drawn uniformly.
class ShapleyTrainer {
 public:
  ShapleyTrainer(ShapleyModel& model, CharSource& source, StateSampler& sampler,
                 const StateRegistry& registry, const ModelConfig& config,
                 uint64_t seed);

  double Update();
  int64_t updates() const { return updates_; }
  void set_source(CharSource& source) { source_ = &source; }
  void set_sampler(StateSampler& sampler) { sampler_ = &sampler; }

 private:
  ShapleyModel* model_;
  CharSource* source_;
  StateSampler* sampler_;
  const StateRegistry* registry_;
  ModelConfig config_;
  Rng rng_;
  OptimizerState opt_;
  SubsetDistribution subsets_;
  StateBatch batch_;
  std::vector<CharQuery> queries_;
  std::vector<double> values_;
  int64_t updates_ = 0;
};

struct Explanation {
  int state = -1;
  int action = -1;  // -1 for scalar targets
  std::vector<double> raw;
  std::vector<double> corrected;
  double full_value = 0.0;
  double null_value = 0.0;
};

// Forward pass followed by the efficiency correction with char(F) and
// char(empty) taken from `source`.
Explanation Explain(const ShapleyModel& model, CharSource& source,
                    const StateRegistry& registry, int state, int action);

// Uniform mean squared error of corrected attributions against exact
// Shapley values over support states, outputs and features.
double ShapleyModelMse(const ShapleyModel& model, CharSource& source,
                       const ShapleyTable& exact, const StateRegistry& registry);

// Checkpoint in the mlp format plus a JSON sidecar at path + ".json".
void SaveShapleyModel(const ShapleyModel& model, const std::string& path);
ShapleyModel LoadShapleyModel(const std::string& path);

}  // namespace fastsverl

#endif  // FASTSVERL_SHAPLEY_MODEL_H_
