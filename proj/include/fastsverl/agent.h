#ifndef FASTSVERL_AGENT_H_
#define FASTSVERL_AGENT_H_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fastsverl/mlp.h"
#include "fastsverl/state_registry.h"

namespace fastsverl {

// One agent transition. States are registry ids; `behaviour_prob` is the
// probability the collecting epsilon-greedy policy gave `action` at `state`.
struct ReplayRecord {
  int64_t step = 0;
  int state = -1;
  int action = 0;
  double reward = 0.0;
  int next_state = -1;
  bool done = false;
  double behaviour_prob = 1.0;
};

// Fixed-capacity FIFO of ReplayRecords.
class ReplayBuffer {
 public:
  ReplayBuffer(std::shared_ptr<StateRegistry> registry, size_t capacity);

  void Add(const ReplayRecord& record);
  size_t size() const { return records_.size(); }
  size_t capacity() const { return capacity_; }
  bool empty() const { return records_.empty(); }
  // Oldest first.
  const ReplayRecord& at(size_t i) const;
  const ReplayRecord& Sample(Rng& rng) const;

  const StateRegistry& registry() const { return *registry_; }
  const std::shared_ptr<StateRegistry>& registry_ptr() const {
    return registry_;
  }

  // Columnar CSV, one row per record:
  //   step,s_0..s_{n-1},action,reward,next_0..next_{n-1},done,behaviour_prob
  // `done` marks a terminal next state; truncated episodes keep done = 0.
  void WriteCsv(const std::string& path) const;
  static ReplayBuffer ReadCsv(const std::string& path,
                              std::shared_ptr<StateRegistry> registry);

 private:
  std::shared_ptr<StateRegistry> registry_;
  size_t capacity_;
  size_t head_ = 0;
  std::vector<ReplayRecord> records_;
};

// Deterministic argmax policy over a Q-network; ties go to the lowest index.
class GreedyPolicy {
 public:
  GreedyPolicy() = default;
  explicit GreedyPolicy(Mlp q_net) : q_net_(std::move(q_net)) {}

  const Mlp& q_net() const { return q_net_; }
  Mlp& q_net() { return q_net_; }
  int n_actions() const { return q_net_.output_dim(); }

  Eigen::VectorXd QValues(std::span<const int> features) const;
  int Action(std::span<const int> features) const;
  double Probability(std::span<const int> features, int action) const;
  // max_a Q(s, a).
  double Value(std::span<const int> features) const;

 private:
  Mlp q_net_;
};

int ArgmaxLowest(const Eigen::VectorXd& values);

// Policy and value tables over registry ids, materialised from a frozen
// GreedyPolicy. Terminal ids carry zero probability and zero value.
class PolicySnapshot {
 public:
  PolicySnapshot() = default;
  PolicySnapshot(const GreedyPolicy& policy,
                 std::shared_ptr<const StateRegistry> registry);
  // A table-defined policy (used by oracles and tests). `probs` is
  // registry-size x n_actions, row-major.
  PolicySnapshot(std::shared_ptr<const StateRegistry> registry, int n_actions,
                 std::vector<double> probs, std::vector<double> values);

  // Extends the tables to registry ids added since construction.
  void Refresh();

  int n_actions() const { return n_actions_; }
  int size() const { return static_cast<int>(values_.size()); }
  double probability(int state, int action) const {
    return probs_[static_cast<size_t>(state) * n_actions_ + action];
  }
  std::span<const double> probabilities(int state) const {
    return {probs_.data() + static_cast<size_t>(state) * n_actions_,
            static_cast<size_t>(n_actions_)};
  }
  double value(int state) const { return values_[state]; }
  int greedy(int state) const;
  const StateRegistry& registry() const { return *registry_; }

 private:
  std::optional<GreedyPolicy> policy_;
  std::shared_ptr<const StateRegistry> registry_;
  int n_actions_ = 0;
  std::vector<double> probs_;
  std::vector<double> values_;
};

struct DqnConfig {
  int64_t total_steps = 20000;
  int64_t learning_starts = 500;
  int train_every = 1;
  int batch_size = 64;
  double learning_rate = 1e-3;
  std::vector<int> hidden = {64, 64};
  double eps_start = 1.0;
  double eps_end = 0.05;
  // Linear decay length in environment steps.
  int64_t eps_decay_steps = 10000;
  // Target network sync period, in gradient updates.
  int target_sync = 250;
  size_t buffer_capacity = 50000;
  // Copies of the online network taken every this many environment steps
  // (0 disables); used to audit stored behaviour probabilities.
  int64_t snapshot_every = 0;
};

struct EpisodeLog {
  int64_t end_step = 0;
  double episode_return = 0.0;
};

// Epsilon-greedy DQN with a target network and uniform replay. Step() advances
// one environment step so callers can interleave their own updates.
class DqnTrainer {
 public:
  DqnTrainer(std::shared_ptr<Simulator> sim, DqnConfig config, uint64_t seed);

  // One environment step; returns true when a gradient update was applied.
  bool Step();
  bool finished() const { return steps_ >= config_.total_steps; }
  void Run();

  double Epsilon() const;
  int64_t steps() const { return steps_; }
  int64_t updates() const { return updates_; }
  double last_loss() const { return last_loss_; }

  const GreedyPolicy& policy() const { return policy_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const std::vector<EpisodeLog>& episodes() const { return episodes_; }
  const std::vector<std::pair<int64_t, Mlp>>& snapshots() const {
    return snapshots_;
  }
  Simulator& simulator() { return *sim_; }

 private:
  void Update();

  std::shared_ptr<Simulator> sim_;
  DqnConfig config_;
  Rng rng_;
  GreedyPolicy policy_;
  Mlp target_;
  OptimizerState opt_;
  ReplayBuffer buffer_;
  int64_t steps_ = 0;
  int64_t updates_ = 0;
  double last_loss_ = 0.0;
  int state_ = -1;
  int episode_steps_ = 0;
  double episode_return_ = 0.0;
  std::vector<EpisodeLog> episodes_;
  std::vector<std::pair<int64_t, Mlp>> snapshots_;
};

struct AgentRun {
  GreedyPolicy policy;
  std::shared_ptr<ReplayBuffer> buffer;
  std::vector<EpisodeLog> episodes;
};

AgentRun DqnTrain(std::shared_ptr<Simulator> sim, const DqnConfig& config,
                  uint64_t seed);

// Agent checkpoint: the Q-network in the binary mlp format plus a JSON echo
// of the environment name and DqnConfig at `path + ".json"`.
void SaveAgent(const GreedyPolicy& policy, const std::string& env_name,
               const DqnConfig& config, const std::string& path);
GreedyPolicy LoadAgent(const std::string& path);

}  // namespace fastsverl

#endif  // FASTSVERL_AGENT_H_
