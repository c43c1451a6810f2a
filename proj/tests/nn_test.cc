#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include "fastsverl/errors.h"
#include "fastsverl/mlp.h"

namespace fastsverl {
namespace {

Eigen::MatrixXd RandomMatrix(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

TEST(Mlp, ZeroWeightsGiveBias) {
  Mlp net({3, 5, 2});
  net.params().setZero();
  net.bias(1) << 0.5, -2.0;
  Eigen::VectorXd x(3);
  x << 1.0, 2.0, 3.0;
  Eigen::VectorXd y = net.Forward(x);
  EXPECT_DOUBLE_EQ(y[0], 0.5);
  EXPECT_DOUBLE_EQ(y[1], -2.0);
}

TEST(Mlp, IdentityLinearLayer) {
  Mlp net({4, 4});
  net.params().setZero();
  net.weight(0).setIdentity();
  Rng rng(1);
  Eigen::MatrixXd x = RandomMatrix(4, 7, rng);
  EXPECT_EQ(net.Forward(x), x);
}

TEST(Mlp, SeededInitIsReproducible) {
  Rng a(123), b(123);
  Mlp n1({6, 16, 16, 3}), n2({6, 16, 16, 3});
  n1.Initialize(a);
  n2.Initialize(b);
  Rng xr(9);
  Eigen::MatrixXd x = RandomMatrix(6, 10, xr);
  Eigen::MatrixXd y1 = n1.Forward(x), y2 = n2.Forward(x);
  EXPECT_EQ(0, std::memcmp(y1.data(), y2.data(), sizeof(double) * y1.size()));
}

TEST(Mlp, HeInitRange) {
  Rng rng(4);
  Mlp net({10, 20, 1});
  net.Initialize(rng);
  const double bound = std::sqrt(6.0 / 10.0);
  EXPECT_LE(net.weight(0).cwiseAbs().maxCoeff(), bound);
  EXPECT_EQ(net.bias(0).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Mlp, BatchMatchesSingleColumns) {
  Rng rng(2);
  Mlp net({3, 8, 2});
  net.Initialize(rng);
  Eigen::MatrixXd x = RandomMatrix(3, 5, rng);
  Eigen::MatrixXd y = net.Forward(x);
  for (int c = 0; c < 5; ++c) {
    Eigen::VectorXd col = net.Forward(Eigen::VectorXd(x.col(c)));
    EXPECT_NEAR((col - y.col(c)).norm(), 0.0, 1e-14);
  }
}

TEST(Gradients, PerfectFitIsZero) {
  Rng rng(3);
  Mlp net({3, 8, 8, 2});
  net.Initialize(rng);
  Eigen::MatrixXd x = RandomMatrix(3, 6, rng);
  Eigen::VectorXd g = GradMse(net, x, net.Forward(x));
  EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gradients, LinearRegressionClosedForm) {
  // y = W x + b, L = (1/B) sum_b (1/K) |y_b - t_b|^2.
  Rng rng(5);
  const int in = 3, out = 2, batch = 9;
  Mlp net({in, out});
  net.Initialize(rng);
  Eigen::MatrixXd x = RandomMatrix(in, batch, rng);
  Eigen::MatrixXd t = RandomMatrix(out, batch, rng);
  Eigen::VectorXd g = GradMse(net, x, t);

  Eigen::MatrixXd w = net.weight(0);
  Eigen::VectorXd b = net.bias(0);
  Eigen::MatrixXd resid = (w * x).colwise() + b - t;
  const double scale = 2.0 / (batch * out);
  Eigen::MatrixXd gw = scale * resid * x.transpose();
  Eigen::VectorXd gb = scale * resid.rowwise().sum();

  Mlp probe = net;
  probe.params() = g;
  EXPECT_LT((probe.weight(0) - gw).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((probe.bias(0) - gb).cwiseAbs().maxCoeff(), 1e-12);
}

double WeightedLoss(const Mlp& net, const Eigen::MatrixXd& x,
                    const Eigen::MatrixXd& t, const Eigen::VectorXd& coef) {
  Eigen::MatrixXd d = net.Forward(x) - t;
  double loss = 0.0;
  for (int b = 0; b < x.cols(); ++b) {
    loss += coef[b] * d.col(b).squaredNorm() / static_cast<double>(d.rows());
  }
  return loss;
}

// Central differences with h = 1e-5 on a two-hidden-layer network. The
// relative error uses max(|analytic|, |numeric|, 1e-6) as denominator.
TEST(Gradients, FiniteDifferences) {
  for (uint64_t seed : {1u, 2u, 3u}) {
    Rng rng(seed);
    Mlp net({5, 12, 9, 3});
    net.Initialize(rng);
    net.params() += 0.05 * RandomMatrix(net.params().size(), 1, rng);
    Eigen::MatrixXd x = RandomMatrix(5, 7, rng);
    Eigen::MatrixXd t = RandomMatrix(3, 7, rng);
    Eigen::VectorXd coef = Eigen::VectorXd::LinSpaced(7, 0.1, 0.7);
    double loss = 0.0;
    Eigen::VectorXd g = GradWeightedMse(net, x, t, coef, &loss);
    EXPECT_NEAR(loss, WeightedLoss(net, x, t, coef), 1e-12);

    const double h = 1e-5;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < net.params().size(); ++i) {
      Mlp plus = net, minus = net;
      plus.params()[i] += h;
      minus.params()[i] -= h;
      const double numeric =
          (WeightedLoss(plus, x, t, coef) - WeightedLoss(minus, x, t, coef)) / (2 * h);
      const double denom = std::max({std::abs(g[i]), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(g[i] - numeric) / denom);
    }
    EXPECT_LT(worst, 1e-4) << "seed " << seed;
  }
}

TEST(Gradients, NonFiniteTargetIsDataError) {
  Mlp net({2, 1});
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 1);
  Eigen::MatrixXd t(1, 1);
  t << std::nan("");
  EXPECT_THROW(GradMse(net, x, t), DataError);
}

TEST(Optimizer, SgdZeroGradientKeepsParameters) {
  Rng rng(6);
  Mlp net({3, 4, 1});
  net.Initialize(rng);
  const Eigen::VectorXd before = net.params();
  OptimizerState opt = OptimizerState::Sgd(0.1);
  OptimizerStep(net, Eigen::VectorXd::Zero(before.size()), opt);
  EXPECT_EQ(net.params(), before);
}

TEST(Optimizer, AdamFirstStepMovesByLearningRate) {
  Rng rng(6);
  Mlp net({3, 4, 1});
  net.Initialize(rng);
  const Eigen::VectorXd before = net.params();
  OptimizerState opt = OptimizerState::Adam(0.01);
  OptimizerStep(net, Eigen::VectorXd::Ones(before.size()), opt);
  // m_hat = 1, v_hat = 1 after bias correction: step = lr / (1 + eps).
  Eigen::VectorXd delta = before - net.params();
  EXPECT_NEAR(delta.minCoeff(), 0.01, 1e-9);
  EXPECT_NEAR(delta.maxCoeff(), 0.01, 1e-9);
}

TEST(Optimizer, QuadraticDescendsMonotonically) {
  // Fit a linear map; the loss is convex in the parameters.
  Rng rng(10);
  Mlp net({4, 2});
  net.Initialize(rng);
  Eigen::MatrixXd x = RandomMatrix(4, 32, rng);
  Eigen::MatrixXd t = RandomMatrix(2, 32, rng);
  OptimizerState opt = OptimizerState::Sgd(0.05);
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 200; ++i) {
    double loss = 0.0;
    Eigen::VectorXd g = GradMse(net, x, t, &loss);
    EXPECT_LE(loss, prev + 1e-15);
    prev = loss;
    OptimizerStep(net, g, opt);
  }
}

TEST(Checkpoint, BitExactRoundTrip) {
  Rng rng(77);
  Mlp net({8, 64, 64, 4});
  net.Initialize(rng);
  net.params() += RandomMatrix(net.params().size(), 1, rng) * 1e-3;
  const std::string path =
      (std::filesystem::temp_directory_path() / "fastsverl_nn_roundtrip.mlp").string();
  SaveMlp(net, path);
  Mlp back = LoadMlp(path);
  EXPECT_EQ(back.layer_dims(), net.layer_dims());
  ASSERT_EQ(back.params().size(), net.params().size());
  EXPECT_EQ(0, std::memcmp(back.params().data(), net.params().data(),
                           sizeof(double) * net.params().size()));
  std::filesystem::remove(path);
}

TEST(Checkpoint, GarbageIsRejected) {
  const std::string path =
      (std::filesystem::temp_directory_path() / "fastsverl_nn_garbage.mlp").string();
  {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fputs("not a network", f);
    std::fclose(f);
  }
  EXPECT_THROW(LoadMlp(path), DataError);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace fastsverl
