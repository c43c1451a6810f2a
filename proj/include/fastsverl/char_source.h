#ifndef FASTSVERL_CHAR_SOURCE_H_
#define FASTSVERL_CHAR_SOURCE_H_

#include <span>
#include <vector>

#include "fastsverl/exact.h"

namespace fastsverl {

// One characteristic query. `output` is the action for behaviour targets and
// 0 otherwise.
struct CharQuery {
  int state = -1;
  int output = 0;
  uint64_t mask = 0;
};

// pi(s, a) for behaviour, vhat(s) for prediction.
double RawTarget(TargetKind kind, const PolicySnapshot& snapshot, int state,
                 int output);

// Mean raw target per output under a distribution (the null value of the
// behaviour and prediction characteristics).
std::vector<double> NullFromDistribution(TargetKind kind,
                                         const StateDistribution& dist,
                                         const PolicySnapshot& snapshot);

// Where characteristic values come from during Shapley training and
// explanation.
class CharSource {
 public:
  virtual ~CharSource() = default;

  virtual TargetKind kind() const = 0;
  virtual int n_features() const = 0;
  virtual int n_outputs() const = 0;

  virtual void Values(std::span<const CharQuery> queries, std::span<double> out,
                      Rng& rng) = 0;
  // char(empty) and char(F) for one state and output.
  virtual double Null(int state, int output) = 0;
  virtual double Full(int state, int output) = 0;
  // True when Values() returns noisy single-sample estimates.
  virtual bool stochastic() const { return false; }

  double Value(int state, int output, uint64_t mask, Rng& rng);
  // Behaviour sources: the action vector at (state, mask), clamped to [0, 1].
  // Not normalised.
  virtual std::vector<double> ActionValues(int state, uint64_t mask, Rng& rng);
};

// Exact table lookups.
class ExactTableSource : public CharSource {
 public:
  explicit ExactTableSource(const CharacteristicTable& table) : table_(&table) {}

  TargetKind kind() const override { return table_->kind(); }
  int n_features() const override { return table_->n_features(); }
  int n_outputs() const override { return table_->n_outputs(); }
  void Values(std::span<const CharQuery> queries, std::span<double> out,
              Rng& rng) override;
  double Null(int state, int output) override;
  double Full(int state, int output) override;

 private:
  const CharacteristicTable* table_;
};

// Single-sample estimates: draws s' ~ p(. | s^C) from a state distribution
// (typically a buffer's visit counts) and returns the raw target at s'.
// C = F returns the raw target at s. The null value is the exact mean over
// the distribution.
class SampledSource : public CharSource {
 public:
  SampledSource(TargetKind kind, const StateDistribution& buffer,
                const PolicySnapshot& snapshot);

  TargetKind kind() const override { return kind_; }
  int n_features() const override { return n_features_; }
  int n_outputs() const override { return static_cast<int>(null_.size()); }
  bool stochastic() const override { return true; }
  void Values(std::span<const CharQuery> queries, std::span<double> out,
              Rng& rng) override;
  double Null(int, int output) override { return null_[output]; }
  double Full(int state, int output) override;
  // pi(s', .) for one draw of s'.
  std::vector<double> ActionValues(int state, uint64_t mask, Rng& rng) override;

  int SampleState(int state, uint64_t mask, Rng& rng);

 private:
  TargetKind kind_;
  int n_features_;
  ConditionalIndex index_;
  const PolicySnapshot* snapshot_;
  std::vector<double> null_;
};

}  // namespace fastsverl

#endif  // FASTSVERL_CHAR_SOURCE_H_
