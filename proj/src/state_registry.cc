#include "fastsverl/state_registry.h"

#include "fastsverl/errors.h"

namespace fastsverl {

int StateRegistry::Intern(const FeatureState& s) {
  FASTSVERL_REQUIRE(static_cast<int>(s.features.size()) == n_features_,
                    "feature count mismatch");
  auto [it, inserted] = index_.try_emplace(s, size());
  if (inserted) {
    features_.insert(features_.end(), s.features.begin(), s.features.end());
    terminal_.push_back(s.terminal);
  }
  return it->second;
}

int StateRegistry::Find(const FeatureState& s) const {
  auto it = index_.find(s);
  return it == index_.end() ? -1 : it->second;
}

FeatureState StateRegistry::state(int id) const {
  auto f = features(id);
  return FeatureState{std::vector<int>(f.begin(), f.end()), terminal_[id]};
}

Simulator::Simulator(std::shared_ptr<const Environment> env,
                     std::shared_ptr<StateRegistry> registry)
    : env_(std::move(env)), registry_(std::move(registry)) {
  FASTSVERL_REQUIRE(registry_->n_features() == env_->n_features(),
                    "registry/environment feature count mismatch");
  for (auto& [s, p] : env_->StartDistribution()) {
    starts_.emplace_back(registry_->Intern(s), p);
  }
}

const std::vector<IdTransition>& Simulator::Kernel(int state, int action) {
  const size_t n_actions = static_cast<size_t>(env_->n_actions());
  const size_t slot = static_cast<size_t>(state) * n_actions + action;
  if (slot >= cached_.size()) {
    size_t grow = static_cast<size_t>(registry_->size()) * n_actions;
    kernels_.resize(std::max(grow, slot + 1));
    cached_.resize(kernels_.size(), false);
  }
  if (!cached_[slot]) {
    TransitionDist dist = env_->Kernel(registry_->state(state), action);
    std::vector<IdTransition> out;
    out.reserve(dist.size());
    for (auto& t : dist) {
      out.push_back(IdTransition{registry_->Intern(t.next), t.reward,
                                 t.probability, t.next.terminal});
    }
    kernels_[slot] = std::move(out);
    cached_[slot] = true;
  }
  return kernels_[slot];
}

int Simulator::SampleStart(Rng& rng) {
  if (starts_.size() == 1) return starts_.front().first;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  double acc = 0.0;
  for (auto& [id, p] : starts_) {
    acc += p;
    if (u < acc) return id;
  }
  return starts_.back().first;
}

IdTransition Simulator::Step(int state, int action, Rng& rng) {
  const auto& dist = Kernel(state, action);
  if (dist.size() == 1) return dist.front();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  double acc = 0.0;
  for (const auto& t : dist) {
    acc += t.probability;
    if (u < acc) return t;
  }
  return dist.back();
}

}  // namespace fastsverl
