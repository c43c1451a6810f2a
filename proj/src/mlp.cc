#include "fastsverl/mlp.h"

#include <cmath>
#include <cstring>
#include <fstream>

#include "fastsverl/errors.h"

namespace fastsverl {

namespace {
constexpr char kMagic[8] = {'F', 'S', 'V', 'L', 'M', 'L', 'P', '1'};
}  // namespace

Mlp::Mlp(std::vector<int> layer_dims) : dims_(std::move(layer_dims)) {
  FASTSVERL_REQUIRE(dims_.size() >= 2, "an mlp needs at least two layer dims");
  Eigen::Index offset = 0;
  for (int l = 0; l + 1 < static_cast<int>(dims_.size()); ++l) {
    FASTSVERL_REQUIRE(dims_[l] > 0 && dims_[l + 1] > 0,
                      "layer dims must be positive");
    weight_offset_.push_back(offset);
    offset += static_cast<Eigen::Index>(dims_[l]) * dims_[l + 1];
    bias_offset_.push_back(offset);
    offset += dims_[l + 1];
  }
  params_ = Eigen::VectorXd::Zero(offset);
}

void Mlp::Initialize(Rng& rng) {
  for (int l = 0; l < n_layers(); ++l) {
    const double limit = std::sqrt(6.0 / dims_[l]);
    std::uniform_real_distribution<double> unif(-limit, limit);
    auto w = weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = unif(rng);
    }
    bias(l).setZero();
  }
}

Eigen::Map<const Eigen::MatrixXd> Mlp::weight(int layer) const {
  return {params_.data() + weight_offset_[layer], dims_[layer + 1],
          dims_[layer]};
}
Eigen::Map<Eigen::MatrixXd> Mlp::weight(int layer) {
  return {params_.data() + weight_offset_[layer], dims_[layer + 1],
          dims_[layer]};
}
Eigen::Map<const Eigen::VectorXd> Mlp::bias(int layer) const {
  return {params_.data() + bias_offset_[layer], dims_[layer + 1]};
}
Eigen::Map<Eigen::VectorXd> Mlp::bias(int layer) {
  return {params_.data() + bias_offset_[layer], dims_[layer + 1]};
}

Eigen::MatrixXd Mlp::Forward(const Eigen::MatrixXd& x) const {
  FASTSVERL_REQUIRE(x.rows() == input_dim(), "mlp input dimension mismatch");
  Eigen::MatrixXd h = x;
  for (int l = 0; l < n_layers(); ++l) {
    Eigen::MatrixXd z = weight(l) * h;
    z.colwise() += bias(l);
    if (l + 1 < n_layers()) z = z.cwiseMax(0.0);
    h = std::move(z);
  }
  return h;
}

Eigen::VectorXd Mlp::Forward(const Eigen::VectorXd& x) const {
  return Forward(Eigen::MatrixXd(x)).col(0);
}

Mlp::Tape Mlp::ForwardTape(const Eigen::MatrixXd& x) const {
  FASTSVERL_REQUIRE(x.rows() == input_dim(), "mlp input dimension mismatch");
  Tape tape;
  tape.activations.reserve(dims_.size());
  tape.activations.push_back(x);
  for (int l = 0; l < n_layers(); ++l) {
    Eigen::MatrixXd z = weight(l) * tape.activations.back();
    z.colwise() += bias(l);
    if (l + 1 < n_layers()) z = z.cwiseMax(0.0);
    tape.activations.push_back(std::move(z));
  }
  return tape;
}

Eigen::VectorXd Mlp::Backward(const Tape& tape,
                              const Eigen::MatrixXd& grad_output) const {
  FASTSVERL_REQUIRE(grad_output.rows() == output_dim() &&
                        grad_output.cols() == tape.output().cols(),
                    "output gradient shape mismatch");
  Eigen::VectorXd grads = Eigen::VectorXd::Zero(params_.size());
  Eigen::MatrixXd delta = grad_output;
  for (int l = n_layers() - 1; l >= 0; --l) {
    const Eigen::MatrixXd& input = tape.activations[l];
    Eigen::Map<Eigen::MatrixXd> gw(grads.data() + weight_offset_[l],
                                   dims_[l + 1], dims_[l]);
    Eigen::Map<Eigen::VectorXd> gb(grads.data() + bias_offset_[l],
                                   dims_[l + 1]);
    gw.noalias() = delta * input.transpose();
    gb = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = weight(l).transpose() * delta;
      // ReLU derivative, taken as 0 at the kink.
      delta = (input.array() > 0.0).select(back, 0.0);
    }
  }
  return grads;
}

Eigen::VectorXd GradWeightedMse(const Mlp& net, const Eigen::MatrixXd& x,
                                const Eigen::MatrixXd& targets,
                                const Eigen::VectorXd& coef, double* loss) {
  FASTSVERL_REQUIRE(x.cols() > 0, "empty batch");
  FASTSVERL_REQUIRE(targets.rows() == net.output_dim() &&
                        targets.cols() == x.cols() && coef.size() == x.cols(),
                    "batch shape mismatch");
  if (!x.allFinite() || !targets.allFinite() || !coef.allFinite()) {
    throw DataError("non-finite value in regression batch");
  }
  Mlp::Tape tape = net.ForwardTape(x);
  const Eigen::MatrixXd residual = tape.output() - targets;
  const double inv_k = 1.0 / net.output_dim();
  if (loss != nullptr) {
    *loss = (residual.array().square().colwise().sum().transpose() * coef.array())
                .sum() *
            inv_k;
  }
  Eigen::MatrixXd grad_output =
      residual * (2.0 * inv_k * coef).asDiagonal();
  return net.Backward(tape, grad_output);
}

Eigen::VectorXd GradMse(const Mlp& net, const Eigen::MatrixXd& x,
                        const Eigen::MatrixXd& targets, double* loss) {
  Eigen::VectorXd coef =
      Eigen::VectorXd::Constant(x.cols(), 1.0 / static_cast<double>(x.cols()));
  return GradWeightedMse(net, x, targets, coef, loss);
}

void OptimizerStep(Mlp& net, const Eigen::VectorXd& grads,
                   OptimizerState& opt) {
  FASTSVERL_REQUIRE(grads.size() == net.params().size(),
                    "gradient shape mismatch");
  ++opt.step;
  if (opt.kind == OptimizerKind::kSgd) {
    net.params() -= opt.learning_rate * grads;
    return;
  }
  if (opt.m.size() != grads.size()) {
    opt.m = Eigen::VectorXd::Zero(grads.size());
    opt.v = Eigen::VectorXd::Zero(grads.size());
  }
  opt.m = opt.beta1 * opt.m + (1.0 - opt.beta1) * grads;
  opt.v = opt.beta2 * opt.v + (1.0 - opt.beta2) * grads.cwiseAbs2();
  const double t = static_cast<double>(opt.step);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  net.params().array() -=
      opt.learning_rate * (opt.m.array() / c1) /
      ((opt.v.array() / c2).sqrt() + opt.eps);
}

void SaveMlp(const Mlp& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));
  const uint32_t count = static_cast<uint32_t>(net.layer_dims().size());
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (int d : net.layer_dims()) {
    const uint32_t dim = static_cast<uint32_t>(d);
    out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
  }
  out.write(reinterpret_cast<const char*>(net.params().data()),
            static_cast<std::streamsize>(net.params().size() * sizeof(double)));
  if (!out) throw DataError("failed writing " + path);
}

Mlp LoadMlp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError(path + " is not an mlp checkpoint");
  }
  uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (!in || count < 2 || count > 64) throw DataError("bad layer count in " + path);
  std::vector<int> dims(count);
  for (auto& d : dims) {
    uint32_t dim = 0;
    in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
    if (!in || dim == 0) throw DataError("bad layer dim in " + path);
    d = static_cast<int>(dim);
  }
  Mlp net(dims);
  in.read(reinterpret_cast<char*>(net.params().data()),
          static_cast<std::streamsize>(net.params().size() * sizeof(double)));
  if (!in) throw DataError("truncated checkpoint " + path);
  return net;
}

}  // namespace fastsverl
