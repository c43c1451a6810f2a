#ifndef FASTSVERL_MLP_H_
#define FASTSVERL_MLP_H_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "fastsverl/env.h"

namespace fastsverl {

// Fully connected network, ReLU on hidden layers and a linear head. All
// parameters live in one flat vector so optimizers and checkpoints can treat
// them uniformly. Batches are column-major: one sample per column.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<int> layer_dims);

  // Uniform He initialisation: weights in +-sqrt(6 / fan_in), zero biases.
  void Initialize(Rng& rng);

  const std::vector<int>& layer_dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  int n_layers() const { return static_cast<int>(dims_.size()) - 1; }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<Eigen::MatrixXd> weight(int layer);
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
  Eigen::Map<Eigen::VectorXd> bias(int layer);

  // x: input_dim x batch. Returns output_dim x batch.
  Eigen::MatrixXd Forward(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd Forward(const Eigen::VectorXd& x) const;

  // Post-activation outputs of every layer, inputs first.
  struct Tape {
    std::vector<Eigen::MatrixXd> activations;
    const Eigen::MatrixXd& output() const { return activations.back(); }
  };
  Tape ForwardTape(const Eigen::MatrixXd& x) const;

  // Parameter gradient given dLoss/dOutput (output_dim x batch).
  Eigen::VectorXd Backward(const Tape& tape,
                           const Eigen::MatrixXd& grad_output) const;

  bool AllFinite() const { return params_.allFinite(); }

 private:
  std::vector<int> dims_;
  std::vector<Eigen::Index> weight_offset_;
  std::vector<Eigen::Index> bias_offset_;
  Eigen::VectorXd params_;
};

// Gradient of L = sum_b coef[b] * mean_k (y_kb - t_kb)^2.
// With coef = 1/B this is the plain mean squared error; importance-sampled
// losses pass their per-sample weights through `coef`. Throws DataError on
// non-finite inputs. `loss` receives L when non-null.
Eigen::VectorXd GradWeightedMse(const Mlp& net, const Eigen::MatrixXd& x,
                                const Eigen::MatrixXd& targets,
                                const Eigen::VectorXd& coef,
                                double* loss = nullptr);
Eigen::VectorXd GradMse(const Mlp& net, const Eigen::MatrixXd& x,
                        const Eigen::MatrixXd& targets,
                        double* loss = nullptr);

enum class OptimizerKind { kSgd, kAdam };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t step = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;

  static OptimizerState Adam(double lr) {
    OptimizerState s;
    s.learning_rate = lr;
    return s;
  }
  static OptimizerState Sgd(double lr) {
    OptimizerState s;
    s.kind = OptimizerKind::kSgd;
    s.learning_rate = lr;
    return s;
  }
};

// SGD: p <- p - lr g. Adam: bias-corrected first/second moment update.
void OptimizerStep(Mlp& net, const Eigen::VectorXd& grads,
                   OptimizerState& opt);

// Binary checkpoint: "FSVLMLP1", uint32 layer count, uint32 dims, then every
// parameter as a little-endian IEEE-754 double. Round trips are bit-exact.
void SaveMlp(const Mlp& net, const std::string& path);
Mlp LoadMlp(const std::string& path);

}  // namespace fastsverl

#endif  // FASTSVERL_MLP_H_
