#ifndef FASTSVERL_STATE_REGISTRY_H_
#define FASTSVERL_STATE_REGISTRY_H_

#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "fastsverl/env.h"

namespace fastsverl {

// Interns FeatureStates into dense integer ids. Ids are assigned in
// insertion order and never change.
class StateRegistry {
 public:
  explicit StateRegistry(int n_features) : n_features_(n_features) {}

  int Intern(const FeatureState& s);
  // -1 when unknown.
  int Find(const FeatureState& s) const;

  int size() const { return static_cast<int>(terminal_.size()); }
  int n_features() const { return n_features_; }
  std::span<const int> features(int id) const {
    return {features_.data() + static_cast<size_t>(id) * n_features_,
            static_cast<size_t>(n_features_)};
  }
  bool terminal(int id) const { return terminal_[id]; }
  FeatureState state(int id) const;

 private:
  int n_features_;
  std::vector<int> features_;
  std::vector<bool> terminal_;
  std::unordered_map<FeatureState, int, FeatureStateHash> index_;
};

struct IdTransition {
  int next = -1;
  double reward = 0.0;
  double probability = 0.0;
  bool terminal = false;
};

// Environment view over registry ids with a lazily filled kernel cache.
// Not thread-safe: each training run owns its own simulator.
class Simulator {
 public:
  Simulator(std::shared_ptr<const Environment> env,
            std::shared_ptr<StateRegistry> registry);

  const Environment& env() const { return *env_; }
  const std::shared_ptr<const Environment>& env_ptr() const { return env_; }
  StateRegistry& registry() { return *registry_; }
  const std::shared_ptr<StateRegistry>& registry_ptr() const {
    return registry_;
  }

  const std::vector<IdTransition>& Kernel(int state, int action);
  int SampleStart(Rng& rng);
  IdTransition Step(int state, int action, Rng& rng);

 private:
  std::shared_ptr<const Environment> env_;
  std::shared_ptr<StateRegistry> registry_;
  std::vector<std::pair<int, double>> starts_;
  // kernels_[state * n_actions + action]; empty until first use.
  std::vector<std::vector<IdTransition>> kernels_;
  std::vector<bool> cached_;
};

}  // namespace fastsverl

#endif  // FASTSVERL_STATE_REGISTRY_H_
