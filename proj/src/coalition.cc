#include "fastsverl/coalition.h"

#include <numeric>

#include "fastsverl/errors.h"

namespace fastsverl {

double Binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double result = 1.0;
  for (int i = 1; i <= k; ++i) {
    result = result * (n - k + i) / i;
  }
  return result;
}

double ShapleyCoefficient(int n, int c) {
  FASTSVERL_REQUIRE(n >= 1 && c >= 0 && c <= n - 1,
                    "shapley coefficient needs 0 <= c <= n - 1");
  return 1.0 / (static_cast<double>(n) * Binomial(n - 1, c));
}

SubsetDistribution::SubsetDistribution(int n)
    : n_(n), size_weights_(n + 1, 0.0), cumulative_(n + 1, 0.0) {
  FASTSVERL_REQUIRE(n >= 2 && n <= 64, "subset distribution needs 2 <= n <= 64");
  double total = 0.0;
  for (int k = 1; k < n; ++k) {
    size_weights_[k] = static_cast<double>(n - 1) / (k * (n - k));
    total += size_weights_[k];
  }
  double acc = 0.0;
  for (int k = 1; k < n; ++k) {
    size_weights_[k] /= total;
    acc += size_weights_[k];
    cumulative_[k] = acc;
  }
  cumulative_[n - 1] = 1.0;
}

double SubsetDistribution::Probability(const Coalition& c) const {
  FASTSVERL_REQUIRE(c.n == n_, "coalition size mismatch");
  const int k = c.size();
  if (k == 0 || k == n_) return 0.0;
  return size_weights_[k] / Binomial(n_, k);
}

Coalition SubsetDistribution::Sample(Rng& rng) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  int k = 1;
  while (k < n_ - 1 && u >= cumulative_[k]) ++k;
  // Partial Fisher-Yates: the first k slots form a uniform k-subset.
  std::vector<int> idx(n_);
  std::iota(idx.begin(), idx.end(), 0);
  uint64_t mask = 0;
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, n_ - 1);
    std::swap(idx[i], idx[pick(rng)]);
    mask |= uint64_t{1} << idx[i];
  }
  return Coalition{mask, n_};
}

double SubsetProbability(int n, const Coalition& c) {
  return SubsetDistribution(n).Probability(c);
}

Coalition SampleSubset(int n, Rng& rng) {
  return SubsetDistribution(n).Sample(rng);
}

Coalition SampleUniformCoalition(int n, Rng& rng) {
  FASTSVERL_REQUIRE(n >= 1 && n <= 64, "coalition size out of range");
  uint64_t bits = rng();
  return Coalition{bits & Coalition::FullMask(n), n};
}

std::vector<double> MaskState(std::span<const int> features,
                              const Coalition& c, double mask_value) {
  FASTSVERL_REQUIRE(static_cast<int>(features.size()) == c.n,
                    "coalition size mismatch");
  std::vector<double> out(features.size());
  for (size_t i = 0; i < features.size(); ++i) {
    out[i] = c.contains(static_cast<int>(i)) ? features[i] : mask_value;
  }
  return out;
}

std::vector<double> MaskState(std::span<const double> features,
                              const Coalition& c, double mask_value) {
  FASTSVERL_REQUIRE(static_cast<int>(features.size()) == c.n,
                    "coalition size mismatch");
  std::vector<double> out(features.size());
  for (size_t i = 0; i < features.size(); ++i) {
    out[i] = c.contains(static_cast<int>(i)) ? features[i] : mask_value;
  }
  return out;
}

std::vector<double> EfficiencyCorrect(std::span<const double> phi_hat,
                                      double full_value, double null_value) {
  FASTSVERL_REQUIRE(!phi_hat.empty(), "empty attribution vector");
  const double n = static_cast<double>(phi_hat.size());
  const double residual =
      full_value - null_value -
      std::accumulate(phi_hat.begin(), phi_hat.end(), 0.0);
  std::vector<double> out(phi_hat.begin(), phi_hat.end());
  for (double& v : out) v += residual / n;
  return out;
}

}  // namespace fastsverl
