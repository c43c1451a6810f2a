#include "fastsverl/outcome.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "fastsverl/errors.h"

namespace fastsverl {

ConditionedPolicy::ConditionedPolicy(const PolicySnapshot& pi,
                                     CharSource& behaviour)
    : pi_(&pi), behaviour_(&behaviour) {
  FASTSVERL_REQUIRE(behaviour.kind() == TargetKind::kBehaviour,
                    "the conditioned policy needs a behaviour source");
  FASTSVERL_REQUIRE(behaviour.n_outputs() == pi.n_actions(),
                    "behaviour source and policy disagree on the action count");
}

std::vector<double> ConditionedPolicy::Probabilities(int state,
                                                     int explain_state,
                                                     uint64_t mask, Rng& rng) {
  if (state != explain_state) {
    auto p = pi_->probabilities(state);
    return {p.begin(), p.end()};
  }
  if (mask == Coalition::FullMask(behaviour_->n_features())) {
    auto p = pi_->probabilities(state);
    return {p.begin(), p.end()};
  }
  std::vector<double> p = behaviour_->ActionValues(state, mask, rng);
  double total = 0.0;
  for (double v : p) total += v;
  if (!(total > 0.0)) {
    ++fallbacks_;
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(p.size()));
    return p;
  }
  for (double& v : p) v /= total;
  return p;
}

int ConditionedPolicy::Sample(int state, int explain_state, uint64_t mask,
                              Rng& rng) {
  std::vector<double> p = Probabilities(state, explain_state, mask, rng);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (size_t a = 0; a < p.size(); ++a) {
    acc += p[a];
    if (u < acc) return static_cast<int>(a);
  }
  // Round-off: the last action with non-zero mass.
  for (size_t a = p.size(); a-- > 0;) {
    if (p[a] > 0.0) return static_cast<int>(a);
  }
  return 0;
}

std::string ToString(OutcomeVariant variant) {
  return variant == OutcomeVariant::kV ? "v" : "q";
}

OutcomeVariant ParseOutcomeVariant(const std::string& name) {
  if (name == "v" || name == "on-policy") return OutcomeVariant::kV;
  if (name == "q" || name == "off-policy") return OutcomeVariant::kQ;
  throw ConfigError("unknown outcome variant '" + name + "' (expected v or q)");
}

// ---------------------------------------------------------------------------

OutcomeModel::OutcomeModel(OutcomeVariant variant, int n_features,
                           int n_actions, const std::vector<int>& hidden,
                           Rng& rng)
    : variant_(variant), n_features_(n_features) {
  std::vector<int> dims{3 * n_features};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(variant == OutcomeVariant::kV ? 1 : n_actions);
  net_ = Mlp(dims);
  net_.Initialize(rng);
  target_ = net_;
}

void OutcomeModel::FillInput(std::span<const int> state,
                             std::span<const int> explain_state, uint64_t mask,
                             Eigen::Ref<Eigen::VectorXd> column) const {
  const int n = n_features_;
  for (int i = 0; i < n; ++i) {
    column[i] = state[i];
    column[n + i] = explain_state[i];
    column[2 * n + i] = static_cast<double>((mask >> i) & 1u);
  }
}

// ---------------------------------------------------------------------------

OutcomeBuffer::OutcomeBuffer(size_t capacity) : capacity_(capacity) {
  FASTSVERL_REQUIRE(capacity_ > 0, "outcome buffer capacity must be positive");
}

void OutcomeBuffer::Add(const OutcomeRecord& record) {
  if (records_.size() < capacity_) {
    records_.push_back(record);
  } else {
    records_[head_] = record;
    head_ = (head_ + 1) % capacity_;
  }
}

const OutcomeRecord& OutcomeBuffer::at(size_t i) const {
  FASTSVERL_REQUIRE(i < records_.size(), "outcome buffer index out of range");
  return records_[(head_ + i) % records_.size()];
}

const OutcomeRecord& OutcomeBuffer::Sample(Rng& rng) const {
  FASTSVERL_REQUIRE(!records_.empty(), "sampling from an empty buffer");
  std::uniform_int_distribution<size_t> pick(0, records_.size() - 1);
  return records_[pick(rng)];
}

void OutcomeBuffer::WriteCsv(const std::string& path,
                             const StateRegistry& registry) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << std::setprecision(17);
  const int n = registry.n_features();
  out << "state_id";
  for (int i = 0; i < n; ++i) out << ",s_" << i;
  out << ",action,reward,next_id";
  for (int i = 0; i < n; ++i) out << ",next_" << i;
  out << ",done,explain_id,coalition_mask\n";
  for (size_t k = 0; k < size(); ++k) {
    const OutcomeRecord& r = at(k);
    out << r.state;
    for (int v : registry.features(r.state)) out << ',' << v;
    out << ',' << r.action << ',' << r.reward << ',' << r.next_state;
    for (int v : registry.features(r.next_state)) out << ',' << v;
    out << ',' << (r.done ? 1 : 0) << ',' << r.explain_state << ',' << r.mask
        << '\n';
  }
}

// ---------------------------------------------------------------------------

namespace {

int UniformSupportState(const StateDistribution& support, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, support.size() - 1);
  return support.id(pick(rng));
}

void ApplyStep(Mlp& net, const Mlp::Tape& tape, const Eigen::MatrixXd& grad_out,
               OptimizerState& opt, const ModelConfig& config, int64_t update,
               double loss, const char* what) {
  if (!std::isfinite(loss)) {
    throw DataError(std::string(what) + " loss diverged at update " +
                    std::to_string(update));
  }
  opt.learning_rate = LearningRateAt(config, update);
  OptimizerStep(net, net.Backward(tape, grad_out), opt);
  if (!net.AllFinite()) {
    throw DataError(std::string(what) + " has non-finite parameters");
  }
}

}  // namespace

OnPolicyOutcomeTrainer::OnPolicyOutcomeTrainer(
    OutcomeModel& model, std::shared_ptr<Simulator> sim,
    ConditionedPolicy& policy, const StateDistribution& support,
    const OutcomeConfig& config, uint64_t seed)
    : model_(&model),
      sim_(std::move(sim)),
      policy_(&policy),
      support_(&support),
      config_(config),
      rng_(seed),
      opt_(MakeOptimizer(config.model)),
      buffer_(config.buffer_capacity) {
  FASTSVERL_REQUIRE(model.variant() == OutcomeVariant::kV,
                    "on-policy outcome training fits V");
  FASTSVERL_REQUIRE(support.size() > 0, "empty explanation support");
}

void OnPolicyOutcomeTrainer::StepEnv() {
  const int cap = sim_->env().spec().max_episode_steps;
  if (state_ < 0) {
    explain_state_ = UniformSupportState(*support_, rng_);
    mask_ = SampleUniformCoalition(model_->n_features(), rng_).mask;
    state_ = explain_state_;
    episode_steps_ = 0;
  }
  const int a = policy_->Sample(state_, explain_state_, mask_, rng_);
  IdTransition t = sim_->Step(state_, a, rng_);
  buffer_.Add({state_, a, t.reward, t.next, t.terminal, explain_state_, mask_});
  ++env_steps_;
  ++episode_steps_;
  state_ = t.next;
  if (t.terminal || (cap > 0 && episode_steps_ >= cap)) state_ = -1;
}

double OnPolicyOutcomeTrainer::Update() {
  for (int k = 0; k < config_.env_steps_per_update; ++k) StepEnv();
  while (static_cast<int64_t>(buffer_.size()) < config_.learning_starts) StepEnv();

  const int batch = config_.model.batch_size;
  const int dim = model_->net().input_dim();
  const StateRegistry& registry = sim_->registry();
  Eigen::MatrixXd x(dim, batch), x_next(dim, batch);
  std::vector<const OutcomeRecord*> rows(batch);
  for (int b = 0; b < batch; ++b) {
    rows[b] = &buffer_.Sample(rng_);
    auto se = registry.features(rows[b]->explain_state);
    model_->FillInput(registry.features(rows[b]->state), se, rows[b]->mask, x.col(b));
    model_->FillInput(registry.features(rows[b]->next_state), se, rows[b]->mask,
                      x_next.col(b));
  }
  const double gamma = sim_->env().gamma();
  Eigen::MatrixXd v_next = model_->target().Forward(x_next);
  Mlp::Tape tape = model_->net().ForwardTape(x);
  Eigen::MatrixXd grad_out(1, batch);
  double loss = 0.0;
  for (int b = 0; b < batch; ++b) {
    double target = rows[b]->reward;
    if (!rows[b]->done) target += gamma * v_next(0, b);
    const double diff = tape.output()(0, b) - target;
    loss += diff * diff / batch;
    grad_out(0, b) = 2.0 * diff / batch;
  }
  ApplyStep(model_->net(), tape, grad_out, opt_, config_.model, updates_, loss,
            "outcome V");
  ++updates_;
  if (updates_ % config_.target_sync == 0) model_->SyncTarget();
  return loss;
}

// ---------------------------------------------------------------------------

OffPolicyOutcomeTrainer::OffPolicyOutcomeTrainer(
    OutcomeModel& model, const ReplayBuffer& agent_buffer,
    ConditionedPolicy& policy, const StateDistribution& support, double gamma,
    const OutcomeConfig& config, uint64_t seed)
    : model_(&model),
      agent_buffer_(&agent_buffer),
      policy_(&policy),
      support_(&support),
      gamma_(gamma),
      config_(config),
      rng_(seed),
      opt_(MakeOptimizer(config.model)) {
  FASTSVERL_REQUIRE(model.variant() == OutcomeVariant::kQ,
                    "off-policy outcome training fits Q");
  FASTSVERL_REQUIRE(!policy.behaviour().stochastic(),
                    "off-policy recovery needs explicit behaviour probabilities");
  FASTSVERL_REQUIRE(!agent_buffer.empty(), "empty agent buffer");
}

double OffPolicyOutcomeTrainer::Update() {
  const int batch = config_.model.batch_size;
  const int dim = model_->net().input_dim();
  const StateRegistry& registry = agent_buffer_->registry();
  Eigen::MatrixXd x(dim, batch), x_next(dim, batch);
  std::vector<const ReplayRecord*> rows(batch);
  // Next-state action distribution under mu; empty for terminal transitions.
  std::vector<std::vector<double>> next_probs(batch);
  for (int b = 0; b < batch; ++b) {
    const ReplayRecord& r = agent_buffer_->Sample(rng_);
    rows[b] = &r;
    const int se = UniformSupportState(*support_, rng_);
    const uint64_t mask = SampleUniformCoalition(model_->n_features(), rng_).mask;
    auto se_features = registry.features(se);
    model_->FillInput(registry.features(r.state), se_features, mask, x.col(b));
    model_->FillInput(registry.features(r.next_state), se_features, mask,
                      x_next.col(b));
    if (!r.done) next_probs[b] = policy_->Probabilities(r.next_state, se, mask, rng_);
  }
  Eigen::MatrixXd q_next = model_->target().Forward(x_next);
  Mlp::Tape tape = model_->net().ForwardTape(x);
  Eigen::MatrixXd grad_out = Eigen::MatrixXd::Zero(tape.output().rows(), batch);
  double loss = 0.0;
  for (int b = 0; b < batch; ++b) {
    double target = rows[b]->reward;
    for (size_t a = 0; a < next_probs[b].size(); ++a) {
      target += gamma_ * next_probs[b][a] * q_next(static_cast<Eigen::Index>(a), b);
    }
    const double diff = tape.output()(rows[b]->action, b) - target;
    loss += diff * diff / batch;
    grad_out(rows[b]->action, b) = 2.0 * diff / batch;
  }
  ApplyStep(model_->net(), tape, grad_out, opt_, config_.model, updates_, loss,
            "outcome Q");
  ++updates_;
  if (updates_ % config_.target_sync == 0) model_->SyncTarget();
  return loss;
}

// ---------------------------------------------------------------------------

OutcomeModelSource::OutcomeModelSource(const OutcomeModel& model,
                                       ConditionedPolicy& policy,
                                       const StateRegistry& registry)
    : model_(&model), policy_(&policy), registry_(&registry) {
  FASTSVERL_REQUIRE(model.variant() == OutcomeVariant::kV ||
                        !policy.behaviour().stochastic(),
                    "Q recovery needs explicit behaviour probabilities");
}

void OutcomeModelSource::Values(std::span<const CharQuery> queries,
                                std::span<double> out, Rng& rng) {
  const int dim = model_->net().input_dim();
  Eigen::MatrixXd x(dim, static_cast<Eigen::Index>(queries.size()));
  for (size_t i = 0; i < queries.size(); ++i) {
    auto f = registry_->features(queries[i].state);
    model_->FillInput(f, f, queries[i].mask, x.col(i));
  }
  Eigen::MatrixXd y = model_->net().Forward(x);
  for (size_t i = 0; i < queries.size(); ++i) {
    if (model_->variant() == OutcomeVariant::kV) {
      out[i] = y(0, i);
      continue;
    }
    std::vector<double> p = policy_->Probabilities(
        queries[i].state, queries[i].state, queries[i].mask, rng);
    double v = 0.0;
    for (size_t a = 0; a < p.size(); ++a) v += p[a] * y(a, i);
    out[i] = v;
  }
}

double OutcomeModelSource::Cached(int state, uint64_t mask) {
  auto& cache = mask == 0 ? null_ : full_;
  auto it = cache.find(state);
  if (it != cache.end()) return it->second;
  const double v = Value(state, 0, mask, rng_);
  cache.emplace(state, v);
  return v;
}

double OutcomeModelSource::Null(int state, int) { return Cached(state, 0); }

double OutcomeModelSource::Full(int state, int) {
  return Cached(state, Coalition::FullMask(n_features()));
}

void OutcomeModelSource::ClearCache() {
  null_.clear();
  full_.clear();
}

double OutcomeMse(CharSource& source, const CharacteristicTable& exact) {
  FASTSVERL_REQUIRE(exact.kind() == TargetKind::kOutcome &&
                        source.n_features() == exact.n_features(),
                    "outcome MSE needs an outcome table");
  Rng rng(0);
  const uint64_t masks = exact.n_masks();
  std::vector<CharQuery> queries(masks);
  std::vector<double> values(masks);
  double total = 0.0;
  for (int pos = 0; pos < exact.size(); ++pos) {
    for (uint64_t m = 0; m < masks; ++m) queries[m] = {exact.ids()[pos], 0, m};
    source.Values(queries, values, rng);
    for (uint64_t m = 0; m < masks; ++m) {
      const double d = values[m] - exact.at(pos, m, 0);
      total += d * d;
    }
  }
  return total / (static_cast<double>(exact.size()) * masks);
}

}  // namespace fastsverl
