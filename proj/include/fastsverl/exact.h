#ifndef FASTSVERL_EXACT_H_
#define FASTSVERL_EXACT_H_

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "fastsverl/agent.h"
#include "fastsverl/coalition.h"
#include "fastsverl/tabular.h"

namespace fastsverl {

enum class TargetKind { kBehaviour, kOutcome, kPrediction };

std::string ToString(TargetKind kind);
TargetKind ParseTargetKind(const std::string& name);

// A distribution over non-terminal registry states. Serves as the steady-state
// distribution p^pi (analytic or empirical) and as the support that
// explanations are trained and evaluated on.
class StateDistribution {
 public:
  enum class Mode { kAnalytic, kEmpirical };

  StateDistribution() = default;
  // Weights are normalised; zero-weight states are dropped.
  StateDistribution(std::shared_ptr<const StateRegistry> registry,
                    const std::vector<int>& ids,
                    const std::vector<double>& weights, Mode mode);

  const StateRegistry& registry() const { return *registry_; }
  const std::shared_ptr<const StateRegistry>& registry_ptr() const {
    return registry_;
  }
  Mode mode() const { return mode_; }
  int size() const { return static_cast<int>(ids_.size()); }
  int id(int pos) const { return ids_[pos]; }
  double prob(int pos) const { return probs_[pos]; }
  const std::vector<int>& ids() const { return ids_; }
  const std::vector<double>& probs() const { return probs_; }
  // Support position of a registry id, or -1.
  int position(int id) const;

  double TotalVariation(const StateDistribution& other) const;

 private:
  std::shared_ptr<const StateRegistry> registry_;
  Mode mode_ = Mode::kAnalytic;
  std::vector<int> ids_;
  std::vector<double> probs_;
  std::unordered_map<int, int> position_;
};

// Normalised undiscounted occupancy of `snapshot`'s policy (or the discounted
// occupancy when `discounted`).
StateDistribution AnalyticSteadyState(const TabularMdp& mdp,
                                      const PolicySnapshot& snapshot,
                                      bool discounted = false);

// Visit frequencies of non-terminal states over `episodes` rollouts of the
// snapshot policy.
StateDistribution EmpiricalSteadyState(Simulator& sim,
                                       const PolicySnapshot& snapshot,
                                       int64_t episodes, Rng& rng);

// Visit frequencies of the `state` field of every buffer record.
StateDistribution BufferStateDistribution(const ReplayBuffer& buffer);

// Partition of a StateDistribution's support by the values of the features in
// one coalition. Each group carries the normalised conditional distribution
// p(s' | s^C) over its members.
struct MaskPartition {
  std::vector<int> group_of;  // per support position
  struct Group {
    std::vector<int> members;        // support positions
    std::vector<double> conditional;  // sums to 1
    std::vector<double> cumulative;
  };
  std::vector<Group> groups;
  std::unordered_map<std::string, int> group_by_key;
};

std::string MaskedKey(std::span<const int> features, uint64_t mask);

// Lazily builds and caches one MaskPartition per coalition mask.
class ConditionalIndex {
 public:
  explicit ConditionalIndex(const StateDistribution& dist) : dist_(&dist) {}

  const StateDistribution& distribution() const { return *dist_; }
  const MaskPartition& Partition(uint64_t mask);

  // p(. | s^C) as (registry id, probability) pairs. Empty when no support
  // state matches s on C.
  std::vector<std::pair<int, double>> Conditional(int state, uint64_t mask);
  // Draws s' ~ p(. | s^C); -1 when nothing matches.
  int Sample(int state, uint64_t mask, Rng& rng);

 private:
  const MaskPartition::Group* GroupFor(int state, uint64_t mask);

  const StateDistribution* dist_;
  std::unordered_map<uint64_t, MaskPartition> cache_;
};

// Dense characteristic values over support x 2^n coalitions x outputs.
// Behaviour tables have one output per action; the other kinds have one.
class CharacteristicTable {
 public:
  CharacteristicTable() = default;
  CharacteristicTable(TargetKind kind, int n_features, int n_outputs,
                      std::vector<int> ids);

  TargetKind kind() const { return kind_; }
  int n_features() const { return n_features_; }
  int n_outputs() const { return n_outputs_; }
  uint64_t n_masks() const { return uint64_t{1} << n_features_; }
  const std::vector<int>& ids() const { return ids_; }
  int size() const { return static_cast<int>(ids_.size()); }
  int position(int id) const;

  double& at(int pos, uint64_t mask, int output) {
    return values_[Offset(pos, mask, output)];
  }
  double at(int pos, uint64_t mask, int output) const {
    return values_[Offset(pos, mask, output)];
  }
  // Throws DataError if `id` is not covered.
  double Lookup(int id, uint64_t mask, int output) const;

  // state_id,action,coalition_mask,value ; action is -1 for scalar kinds.
  void WriteCsv(const std::string& path) const;

 private:
  size_t Offset(int pos, uint64_t mask, int output) const {
    return (static_cast<size_t>(pos) * n_masks() + mask) * n_outputs_ + output;
  }

  TargetKind kind_ = TargetKind::kBehaviour;
  int n_features_ = 0;
  int n_outputs_ = 1;
  std::vector<int> ids_;
  std::unordered_map<int, int> position_;
  std::vector<double> values_;
};

// Largest support x 2^n x outputs table the oracles will allocate.
inline constexpr uint64_t kTableBudget = uint64_t{1} << 27;

// sum_{s'} p(s' | s^C) pi(s', a).
double ExactBehaviourChar(ConditionalIndex& index,
                          const PolicySnapshot& snapshot, int state,
                          int action, uint64_t mask);
// sum_{s'} p(s' | s^C) vhat(s').
double ExactPredictionChar(ConditionalIndex& index,
                           const PolicySnapshot& snapshot, int state,
                           uint64_t mask);

CharacteristicTable ExactBehaviourTable(const StateDistribution& dist,
                                        const PolicySnapshot& snapshot);
CharacteristicTable ExactPredictionTable(const StateDistribution& dist,
                                         const PolicySnapshot& snapshot);

// v^mu(s_e), where mu follows the behaviour characteristic at s_e and pi
// elsewhere, from one Bellman linear solve.
double ExactOutcomeChar(const TabularMdp& mdp, const PolicySnapshot& snapshot,
                        const CharacteristicTable& behaviour, int state,
                        uint64_t mask);
CharacteristicTable ExactOutcomeTable(const TabularMdp& mdp,
                                      const StateDistribution& dist,
                                      const PolicySnapshot& snapshot,
                                      const CharacteristicTable& behaviour);

using CharFunction = std::function<double(uint64_t mask)>;

// Direct weighted sum of marginal contributions over all coalitions.
std::vector<double> ExactShapley(int n, const CharFunction& value);
// Efficiency-constrained weighted least squares over every proper non-empty
// coalition, solved through its KKT system. Requires n >= 2.
std::vector<double> WlsShapley(int n, const CharFunction& value);

// Shapley vectors for every (support state, output) of a table.
class ShapleyTable {
 public:
  ShapleyTable() = default;
  explicit ShapleyTable(const CharacteristicTable& chars);

  TargetKind kind() const { return kind_; }
  int n_features() const { return n_features_; }
  int n_outputs() const { return n_outputs_; }
  const std::vector<int>& ids() const { return ids_; }
  int size() const { return static_cast<int>(ids_.size()); }
  int position(int id) const;
  std::span<const double> at(int pos, int output) const {
    return {values_.data() +
                (static_cast<size_t>(pos) * n_outputs_ + output) * n_features_,
            static_cast<size_t>(n_features_)};
  }

  // state_id,action,feature,phi ; action is -1 for scalar kinds.
  void WriteCsv(const std::string& path) const;

 private:
  TargetKind kind_ = TargetKind::kBehaviour;
  int n_features_ = 0;
  int n_outputs_ = 1;
  std::vector<int> ids_;
  std::unordered_map<int, int> position_;
  std::vector<double> values_;
};

}  // namespace fastsverl

#endif  // FASTSVERL_EXACT_H_
