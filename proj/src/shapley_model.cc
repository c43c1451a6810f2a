#include "fastsverl/shapley_model.h"

#include <fstream>

#include "fastsverl/errors.h"
#include "json.hpp"

namespace fastsverl {

ShapleyModel::ShapleyModel(TargetKind kind, int n_features, int n_actions,
                           const std::vector<int>& hidden, Rng& rng)
    : kind_(kind), n_features_(n_features) {
  const int onehot = kind == TargetKind::kBehaviour ? n_actions : 0;
  std::vector<int> dims{n_features + onehot};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(n_features);
  net_ = Mlp(dims);
  net_.Initialize(rng);
}

ShapleyModel::ShapleyModel(TargetKind kind, int n_features, Mlp net)
    : kind_(kind), n_features_(n_features), net_(std::move(net)) {
  FASTSVERL_REQUIRE(net_.output_dim() == n_features &&
                        net_.input_dim() >= n_features,
                    "Shapley network shape does not match the feature count");
}

void ShapleyModel::FillInput(std::span<const int> features, int action,
                             Eigen::Ref<Eigen::VectorXd> column) const {
  for (int i = 0; i < n_features_; ++i) column[i] = features[i];
  const int onehot = n_actions();
  for (int a = 0; a < onehot; ++a) column[n_features_ + a] = a == action ? 1.0 : 0.0;
}

Eigen::VectorXd ShapleyModel::Raw(std::span<const int> features,
                                  int action) const {
  Eigen::VectorXd x(net_.input_dim());
  FillInput(features, action, x);
  return net_.Forward(x);
}

// ---------------------------------------------------------------------------

ShapleyTrainer::ShapleyTrainer(ShapleyModel& model, CharSource& source,
                               StateSampler& sampler,
                               const StateRegistry& registry,
                               const ModelConfig& config, uint64_t seed)
    : model_(&model),
      source_(&source),
      sampler_(&sampler),
      registry_(&registry),
      config_(config),
      rng_(seed),
      opt_(MakeOptimizer(config)),
      subsets_(model.n_features()) {
  FASTSVERL_REQUIRE(source.kind() == model.kind() &&
                        source.n_features() == model.n_features(),
                    "characteristic source does not match the Shapley model");
}

double ShapleyTrainer::Update() {
  sampler_->Sample(config_.batch_size, rng_, batch_);
  const int n = model_->n_features();
  const int batch = static_cast<int>(batch_.states.size());
  const bool behaviour = model_->kind() == TargetKind::kBehaviour;
  std::uniform_int_distribution<int> pick_action(
      0, behaviour ? model_->n_actions() - 1 : 0);

  Eigen::MatrixXd x(model_->net().input_dim(), batch);
  queries_.resize(batch);
  values_.resize(batch);
  for (int b = 0; b < batch; ++b) {
    const int s = batch_.states[b];
    const int a = behaviour ? pick_action(rng_) : 0;
    model_->FillInput(registry_->features(s), a, x.col(b));
    queries_[b] = {s, a, subsets_.Sample(rng_).mask};
  }
  source_->Values(queries_, values_, rng_);

  Mlp::Tape tape = model_->net().ForwardTape(x);
  const Eigen::MatrixXd& phi = tape.output();
  Eigen::MatrixXd grad_out(n, batch);
  double loss = 0.0;
  for (int b = 0; b < batch; ++b) {
    const CharQuery& q = queries_[b];
    const double target = values_[b] - source_->Null(q.state, q.output);
    double pred = 0.0;
    for (int i = 0; i < n; ++i) {
      if ((q.mask >> i) & 1u) pred += phi(i, b);
    }
    const double r = target - pred;
    const double c = batch_.coef[b];
    loss += c * r * r;
    for (int i = 0; i < n; ++i) {
      grad_out(i, b) = ((q.mask >> i) & 1u) ? -2.0 * c * r : 0.0;
    }
  }
  if (!std::isfinite(loss)) throw DataError("Shapley loss is not finite");
  Eigen::VectorXd grad = model_->net().Backward(tape, grad_out);
  opt_.learning_rate = LearningRateAt(config_, updates_);
  OptimizerStep(model_->net(), grad, opt_);
  if (!model_->net().AllFinite()) {
    throw DataError("Shapley model diverged (non-finite parameters)");
  }
  ++updates_;
  return loss;
}

// ---------------------------------------------------------------------------

Explanation Explain(const ShapleyModel& model, CharSource& source,
                    const StateRegistry& registry, int state, int action) {
  const bool behaviour = model.kind() == TargetKind::kBehaviour;
  FASTSVERL_REQUIRE(!behaviour || (action >= 0 && action < model.n_actions()),
                    "behaviour explanations need an action");
  Explanation e;
  e.state = state;
  e.action = behaviour ? action : -1;
  const int output = behaviour ? action : 0;
  Eigen::VectorXd raw = model.Raw(registry.features(state), output);
  e.raw.assign(raw.data(), raw.data() + raw.size());
  e.full_value = source.Full(state, output);
  e.null_value = source.Null(state, output);
  e.corrected = EfficiencyCorrect(e.raw, e.full_value, e.null_value);
  return e;
}

double ShapleyModelMse(const ShapleyModel& model, CharSource& source,
                       const ShapleyTable& exact,
                       const StateRegistry& registry) {
  FASTSVERL_REQUIRE(exact.kind() == model.kind() &&
                        exact.n_features() == model.n_features() &&
                        exact.n_outputs() == model.n_outputs(),
                    "model and table describe different explanations");
  const int n = model.n_features();
  const int outputs = exact.n_outputs();
  Eigen::MatrixXd x(model.net().input_dim(),
                    static_cast<Eigen::Index>(exact.size()) * outputs);
  for (int pos = 0; pos < exact.size(); ++pos) {
    for (int o = 0; o < outputs; ++o) {
      model.FillInput(registry.features(exact.ids()[pos]), o,
                      x.col(pos * outputs + o));
    }
  }
  Eigen::MatrixXd raw = model.net().Forward(x);
  double total = 0.0;
  std::vector<double> column(n);
  for (int pos = 0; pos < exact.size(); ++pos) {
    const int id = exact.ids()[pos];
    for (int o = 0; o < outputs; ++o) {
      for (int i = 0; i < n; ++i) column[i] = raw(i, pos * outputs + o);
      std::vector<double> phi =
          EfficiencyCorrect(column, source.Full(id, o), source.Null(id, o));
      auto truth = exact.at(pos, o);
      for (int i = 0; i < n; ++i) {
        const double d = phi[i] - truth[i];
        total += d * d;
      }
    }
  }
  return total / (static_cast<double>(exact.size()) * outputs * n);
}

// ---------------------------------------------------------------------------

void SaveShapleyModel(const ShapleyModel& model, const std::string& path) {
  SaveMlp(model.net(), path);
  nlohmann::json meta = {{"target_kind", ToString(model.kind())},
                         {"n_features", model.n_features()},
                         {"n_actions", model.n_actions()}};
  std::ofstream out(path + ".json");
  if (!out) throw DataError("cannot write " + path + ".json");
  out << meta.dump(2) << '\n';
}

ShapleyModel LoadShapleyModel(const std::string& path) {
  std::ifstream in(path + ".json");
  if (!in) throw DataError("missing model sidecar " + path + ".json");
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad model sidecar " + path + ".json: " + e.what());
  }
  Mlp net = LoadMlp(path);
  const int n = meta.value("n_features", -1);
  if (n != net.output_dim() ||
      n + meta.value("n_actions", 0) != net.input_dim()) {
    throw DataError("model sidecar does not match the checkpoint in " + path);
  }
  return ShapleyModel(ParseTargetKind(meta.at("target_kind").get<std::string>()),
                      n, std::move(net));
}

}  // namespace fastsverl
