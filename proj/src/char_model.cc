#include "fastsverl/char_model.h"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "fastsverl/errors.h"
#include "json.hpp"

namespace fastsverl {

namespace {

std::vector<int> LayerDims(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}

}  // namespace

CharModel::CharModel(TargetKind kind, int n_features, int n_outputs,
                     const std::vector<int>& hidden, double mask_value,
                     Rng& rng)
    : kind_(kind),
      net_(LayerDims(n_features, hidden, n_outputs)),
      mask_value_(mask_value) {
  FASTSVERL_REQUIRE(kind != TargetKind::kOutcome,
                    "outcome characteristics are learned by outcome models");
  net_.Initialize(rng);
}

CharModel::CharModel(TargetKind kind, Mlp net, double mask_value)
    : kind_(kind), net_(std::move(net)), mask_value_(mask_value) {}

void CharModel::FillInput(std::span<const int> features, uint64_t mask,
                          Eigen::Ref<Eigen::VectorXd> column) const {
  for (size_t i = 0; i < features.size(); ++i) {
    column[i] = ((mask >> i) & 1u) ? features[i] : mask_value_;
  }
}

Eigen::MatrixXd CharModel::Forward(const Eigen::MatrixXd& inputs) const {
  return net_.Forward(inputs);
}

double CharModel::Clamp(double value) const {
  return kind_ == TargetKind::kBehaviour ? std::clamp(value, 0.0, 1.0) : value;
}

Eigen::VectorXd CharModel::Query(std::span<const int> features,
                                 uint64_t mask) const {
  Eigen::VectorXd x(n_features());
  FillInput(features, mask, x);
  Eigen::VectorXd y = net_.Forward(x);
  for (Eigen::Index k = 0; k < y.size(); ++k) y[k] = Clamp(y[k]);
  return y;
}

// ---------------------------------------------------------------------------

CharTrainer::CharTrainer(CharModel& model, const PolicySnapshot& snapshot,
                         StateSampler& sampler, const ModelConfig& config,
                         uint64_t seed)
    : model_(&model),
      snapshot_(&snapshot),
      sampler_(&sampler),
      config_(config),
      rng_(seed),
      opt_(MakeOptimizer(config)) {}

double CharTrainer::Update() {
  sampler_->Sample(config_.batch_size, rng_, batch_);
  const int n = model_->n_features();
  const int outputs = model_->n_outputs();
  const int batch = static_cast<int>(batch_.states.size());
  const StateRegistry& registry = snapshot_->registry();
  Eigen::MatrixXd x(n, batch);
  Eigen::MatrixXd targets(outputs, batch);
  for (int b = 0; b < batch; ++b) {
    const int s = batch_.states[b];
    model_->FillInput(registry.features(s), SampleUniformCoalition(n, rng_).mask,
                      x.col(b));
    for (int o = 0; o < outputs; ++o) {
      targets(o, b) = RawTarget(model_->kind(), *snapshot_, s, o);
    }
  }
  double loss = 0.0;
  Eigen::VectorXd grad =
      GradWeightedMse(model_->net(), x, targets, batch_.coef, &loss);
  opt_.learning_rate = LearningRateAt(config_, updates_);
  OptimizerStep(model_->net(), grad, opt_);
  if (!model_->net().AllFinite()) {
    throw DataError("characteristic model diverged (non-finite parameters)");
  }
  ++updates_;
  return loss;
}

double CharModelMse(const CharModel& model, const CharacteristicTable& exact,
                    const StateRegistry& registry) {
  FASTSVERL_REQUIRE(exact.kind() == model.kind() &&
                        exact.n_outputs() == model.n_outputs() &&
                        exact.n_features() == model.n_features(),
                    "model and table describe different characteristics");
  const uint64_t masks = exact.n_masks();
  Eigen::MatrixXd x(model.n_features(), static_cast<Eigen::Index>(masks));
  double total = 0.0;
  for (int pos = 0; pos < exact.size(); ++pos) {
    auto features = registry.features(exact.ids()[pos]);
    for (uint64_t m = 0; m < masks; ++m) model.FillInput(features, m, x.col(m));
    Eigen::MatrixXd y = model.Forward(x);
    for (uint64_t m = 0; m < masks; ++m) {
      for (int o = 0; o < exact.n_outputs(); ++o) {
        const double d = model.Clamp(y(o, m)) - exact.at(pos, m, o);
        total += d * d;
      }
    }
  }
  return total / (static_cast<double>(exact.size()) * masks * exact.n_outputs());
}

// ---------------------------------------------------------------------------

ModelSource::ModelSource(const CharModel& model, const PolicySnapshot& snapshot,
                         std::vector<double> null)
    : model_(&model), snapshot_(&snapshot), null_(std::move(null)) {
  FASTSVERL_REQUIRE(static_cast<int>(null_.size()) == model.n_outputs(),
                    "null value has the wrong number of outputs");
}

void ModelSource::Values(std::span<const CharQuery> queries,
                         std::span<double> out, Rng&) {
  const int n = model_->n_features();
  const uint64_t full = Coalition::FullMask(n);
  const StateRegistry& registry = snapshot_->registry();
  inputs_.resize(n, static_cast<Eigen::Index>(queries.size()));
  for (size_t i = 0; i < queries.size(); ++i) {
    model_->FillInput(registry.features(queries[i].state), queries[i].mask,
                      inputs_.col(i));
  }
  Eigen::MatrixXd y = model_->Forward(inputs_);
  for (size_t i = 0; i < queries.size(); ++i) {
    const CharQuery& q = queries[i];
    out[i] = q.mask == full ? RawTarget(model_->kind(), *snapshot_, q.state, q.output)
                            : model_->Clamp(y(q.output, i));
  }
}

double ModelSource::Full(int state, int output) {
  return RawTarget(model_->kind(), *snapshot_, state, output);
}

// ---------------------------------------------------------------------------

void SaveCharModel(const CharModel& model, const std::string& path) {
  SaveMlp(model.net(), path);
  nlohmann::json meta = {{"target_kind", ToString(model.kind())},
                         {"mask_value", model.mask_value()},
                         {"n_features", model.n_features()},
                         {"n_outputs", model.n_outputs()}};
  std::ofstream out(path + ".json");
  if (!out) throw DataError("cannot write " + path + ".json");
  out << meta.dump(2) << '\n';
}

CharModel LoadCharModel(const std::string& path) {
  std::ifstream in(path + ".json");
  if (!in) throw DataError("missing model sidecar " + path + ".json");
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad model sidecar " + path + ".json: " + e.what());
  }
  Mlp net = LoadMlp(path);
  if (meta.value("n_features", -1) != net.input_dim() ||
      meta.value("n_outputs", -1) != net.output_dim()) {
    throw DataError("model sidecar does not match the checkpoint in " + path);
  }
  return CharModel(ParseTargetKind(meta.at("target_kind").get<std::string>()),
                   std::move(net), meta.at("mask_value").get<double>());
}

}  // namespace fastsverl
