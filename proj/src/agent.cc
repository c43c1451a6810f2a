#include "fastsverl/agent.h"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fastsverl/errors.h"
#include "json.hpp"

namespace fastsverl {

namespace {

Eigen::VectorXd ToInput(std::span<const int> features) {
  Eigen::VectorXd x(features.size());
  for (size_t i = 0; i < features.size(); ++i) x[i] = features[i];
  return x;
}

void AppendFeatures(std::ostream& out, std::span<const int> features) {
  for (int v : features) out << ',' << v;
}

}  // namespace

// ---------------------------------------------------------------------------
// ReplayBuffer

ReplayBuffer::ReplayBuffer(std::shared_ptr<StateRegistry> registry,
                           size_t capacity)
    : registry_(std::move(registry)), capacity_(capacity) {
  FASTSVERL_REQUIRE(capacity_ > 0, "replay buffer capacity must be positive");
}

void ReplayBuffer::Add(const ReplayRecord& record) {
  if (!(record.behaviour_prob > 0.0 && record.behaviour_prob <= 1.0)) {
    throw DataError("behaviour probability must lie in (0, 1]");
  }
  if (!std::isfinite(record.reward)) throw DataError("non-finite reward");
  if (records_.size() < capacity_) {
    records_.push_back(record);
  } else {
    records_[head_] = record;
    head_ = (head_ + 1) % capacity_;
  }
}

const ReplayRecord& ReplayBuffer::at(size_t i) const {
  FASTSVERL_REQUIRE(i < records_.size(), "replay index out of range");
  return records_[(head_ + i) % records_.size()];
}

const ReplayRecord& ReplayBuffer::Sample(Rng& rng) const {
  FASTSVERL_REQUIRE(!records_.empty(), "sampling from an empty buffer");
  std::uniform_int_distribution<size_t> pick(0, records_.size() - 1);
  return records_[pick(rng)];
}

void ReplayBuffer::WriteCsv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  const int n = registry_->n_features();
  out << "step";
  for (int i = 0; i < n; ++i) out << ",s_" << i;
  out << ",action,reward";
  for (int i = 0; i < n; ++i) out << ",next_" << i;
  out << ",done,behaviour_prob\n";
  out << std::setprecision(17);
  for (size_t i = 0; i < size(); ++i) {
    const ReplayRecord& r = at(i);
    out << r.step;
    AppendFeatures(out, registry_->features(r.state));
    out << ',' << r.action << ',' << r.reward;
    AppendFeatures(out, registry_->features(r.next_state));
    out << ',' << (r.done ? 1 : 0) << ',' << r.behaviour_prob << '\n';
  }
}

ReplayBuffer ReplayBuffer::ReadCsv(const std::string& path,
                                   std::shared_ptr<StateRegistry> registry) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  const int n = registry->n_features();
  std::string line;
  std::getline(in, line);
  std::vector<ReplayRecord> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (static_cast<int>(cells.size()) != 2 * n + 5) {
      throw DataError("malformed replay row in " + path);
    }
    ReplayRecord r;
    size_t k = 0;
    r.step = std::stoll(cells[k++]);
    FeatureState s{std::vector<int>(n), false};
    for (int i = 0; i < n; ++i) s.features[i] = std::stoi(cells[k++]);
    r.action = std::stoi(cells[k++]);
    r.reward = std::stod(cells[k++]);
    FeatureState next{std::vector<int>(n), false};
    for (int i = 0; i < n; ++i) next.features[i] = std::stoi(cells[k++]);
    r.done = std::stoi(cells[k++]) != 0;
    next.terminal = r.done;
    r.behaviour_prob = std::stod(cells[k++]);
    r.state = registry->Intern(s);
    r.next_state = registry->Intern(next);
    rows.push_back(r);
  }
  ReplayBuffer buffer(registry, std::max<size_t>(rows.size(), 1));
  for (const auto& r : rows) buffer.Add(r);
  return buffer;
}

// ---------------------------------------------------------------------------
// GreedyPolicy

int ArgmaxLowest(const Eigen::VectorXd& values) {
  int best = 0;
  for (int a = 1; a < values.size(); ++a) {
    if (values[a] > values[best]) best = a;
  }
  return best;
}

Eigen::VectorXd GreedyPolicy::QValues(std::span<const int> features) const {
  return q_net_.Forward(ToInput(features));
}

int GreedyPolicy::Action(std::span<const int> features) const {
  return ArgmaxLowest(QValues(features));
}

double GreedyPolicy::Probability(std::span<const int> features,
                                 int action) const {
  return Action(features) == action ? 1.0 : 0.0;
}

double GreedyPolicy::Value(std::span<const int> features) const {
  return QValues(features).maxCoeff();
}

// ---------------------------------------------------------------------------
// PolicySnapshot

PolicySnapshot::PolicySnapshot(const GreedyPolicy& policy,
                               std::shared_ptr<const StateRegistry> registry)
    : policy_(policy),
      registry_(std::move(registry)),
      n_actions_(policy.n_actions()) {
  Refresh();
}

PolicySnapshot::PolicySnapshot(std::shared_ptr<const StateRegistry> registry,
                               int n_actions, std::vector<double> probs,
                               std::vector<double> values)
    : registry_(std::move(registry)),
      n_actions_(n_actions),
      probs_(std::move(probs)),
      values_(std::move(values)) {
  FASTSVERL_REQUIRE(probs_.size() == values_.size() * n_actions_,
                    "policy table shape mismatch");
}

void PolicySnapshot::Refresh() {
  const int from = size();
  const int to = registry_->size();
  if (from == to) return;
  FASTSVERL_REQUIRE(policy_.has_value(),
                    "table policy cannot cover newly registered states");
  const int n = registry_->n_features();
  Eigen::MatrixXd x(n, to - from);
  for (int id = from; id < to; ++id) {
    auto f = registry_->features(id);
    for (int i = 0; i < n; ++i) x(i, id - from) = f[i];
  }
  Eigen::MatrixXd q = policy_->q_net().Forward(x);
  probs_.resize(static_cast<size_t>(to) * n_actions_, 0.0);
  values_.resize(to, 0.0);
  for (int id = from; id < to; ++id) {
    if (registry_->terminal(id)) continue;
    Eigen::VectorXd col = q.col(id - from);
    probs_[static_cast<size_t>(id) * n_actions_ + ArgmaxLowest(col)] = 1.0;
    values_[id] = col.maxCoeff();
  }
}

int PolicySnapshot::greedy(int state) const {
  auto p = probabilities(state);
  int best = 0;
  for (int a = 1; a < n_actions_; ++a) {
    if (p[a] > p[best]) best = a;
  }
  return best;
}

// ---------------------------------------------------------------------------
// DqnTrainer

DqnTrainer::DqnTrainer(std::shared_ptr<Simulator> sim, DqnConfig config,
                       uint64_t seed)
    : sim_(std::move(sim)),
      config_(std::move(config)),
      rng_(seed),
      buffer_(sim_->registry_ptr(), config_.buffer_capacity) {
  std::vector<int> dims{sim_->env().n_features()};
  dims.insert(dims.end(), config_.hidden.begin(), config_.hidden.end());
  dims.push_back(sim_->env().n_actions());
  Mlp net(dims);
  net.Initialize(rng_);
  policy_ = GreedyPolicy(net);
  target_ = net;
  opt_ = OptimizerState::Adam(config_.learning_rate);
}

double DqnTrainer::Epsilon() const {
  if (config_.eps_decay_steps <= 0) return config_.eps_end;
  double frac = std::min(1.0, static_cast<double>(steps_) /
                                  static_cast<double>(config_.eps_decay_steps));
  return config_.eps_start + frac * (config_.eps_end - config_.eps_start);
}

bool DqnTrainer::Step() {
  if (state_ < 0) {
    state_ = sim_->SampleStart(rng_);
    episode_steps_ = 0;
    episode_return_ = 0.0;
  }
  if (config_.snapshot_every > 0 && steps_ % config_.snapshot_every == 0) {
    snapshots_.emplace_back(steps_, policy_.q_net());
  }
  const int n_actions = sim_->env().n_actions();
  const double eps = Epsilon();
  const int greedy = policy_.Action(sim_->registry().features(state_));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> any_action(0, n_actions - 1);
  const double u = unif(rng_);
  const int random_action = any_action(rng_);
  const int action = u < eps ? random_action : greedy;
  const double behaviour_prob =
      eps / n_actions + (action == greedy ? 1.0 - eps : 0.0);

  IdTransition t = sim_->Step(state_, action, rng_);
  buffer_.Add(ReplayRecord{steps_, state_, action, t.reward, t.next,
                           t.terminal, behaviour_prob});
  ++steps_;
  ++episode_steps_;
  episode_return_ += t.reward;
  const int cap = sim_->env().spec().max_episode_steps;
  if (t.terminal || (cap > 0 && episode_steps_ >= cap)) {
    episodes_.push_back(EpisodeLog{steps_, episode_return_});
    state_ = -1;
  } else {
    state_ = t.next;
  }

  if (steps_ > config_.learning_starts && steps_ % config_.train_every == 0) {
    Update();
    return true;
  }
  return false;
}

void DqnTrainer::Update() {
  const int batch = config_.batch_size;
  const int n = sim_->env().n_features();
  const double gamma = sim_->env().gamma();
  Eigen::MatrixXd x(n, batch), x_next(n, batch);
  std::vector<const ReplayRecord*> rows(batch);
  for (int b = 0; b < batch; ++b) {
    rows[b] = &buffer_.Sample(rng_);
    auto f = sim_->registry().features(rows[b]->state);
    auto g = sim_->registry().features(rows[b]->next_state);
    for (int i = 0; i < n; ++i) {
      x(i, b) = f[i];
      x_next(i, b) = g[i];
    }
  }
  Eigen::MatrixXd q_next = target_.Forward(x_next);
  Mlp::Tape tape = policy_.q_net().ForwardTape(x);
  Eigen::MatrixXd grad_out = Eigen::MatrixXd::Zero(tape.output().rows(), batch);
  double loss = 0.0;
  for (int b = 0; b < batch; ++b) {
    const ReplayRecord& r = *rows[b];
    double target = r.reward;
    if (!r.done) target += gamma * q_next.col(b).maxCoeff();
    const double diff = tape.output()(r.action, b) - target;
    loss += diff * diff / batch;
    grad_out(r.action, b) = 2.0 * diff / batch;
  }
  if (!std::isfinite(loss)) {
    throw DataError("dqn loss diverged at update " + std::to_string(updates_));
  }
  last_loss_ = loss;
  OptimizerStep(policy_.q_net(), policy_.q_net().Backward(tape, grad_out), opt_);
  ++updates_;
  if (updates_ % config_.target_sync == 0) target_ = policy_.q_net();
}

void DqnTrainer::Run() {
  while (!finished()) Step();
}

AgentRun DqnTrain(std::shared_ptr<Simulator> sim, const DqnConfig& config,
                  uint64_t seed) {
  DqnTrainer trainer(std::move(sim), config, seed);
  trainer.Run();
  return AgentRun{trainer.policy(),
                  std::make_shared<ReplayBuffer>(trainer.buffer()),
                  trainer.episodes()};
}

void SaveAgent(const GreedyPolicy& policy, const std::string& env_name,
               const DqnConfig& config, const std::string& path) {
  SaveMlp(policy.q_net(), path);
  nlohmann::json j;
  j["env"] = env_name;
  j["n_actions"] = policy.n_actions();
  j["n_features"] = policy.q_net().input_dim();
  j["config"] = {{"total_steps", config.total_steps},
                 {"learning_starts", config.learning_starts},
                 {"train_every", config.train_every},
                 {"batch_size", config.batch_size},
                 {"learning_rate", config.learning_rate},
                 {"hidden", config.hidden},
                 {"eps_start", config.eps_start},
                 {"eps_end", config.eps_end},
                 {"eps_decay_steps", config.eps_decay_steps},
                 {"target_sync", config.target_sync},
                 {"buffer_capacity", config.buffer_capacity}};
  std::ofstream out(path + ".json");
  if (!out) throw DataError("cannot write " + path + ".json");
  out << j.dump(2) << '\n';
}

GreedyPolicy LoadAgent(const std::string& path) {
  return GreedyPolicy(LoadMlp(path));
}

}  // namespace fastsverl
