#ifndef FASTSVERL_COALITION_H_
#define FASTSVERL_COALITION_H_

#include <bit>
#include <cstdint>
#include <span>
#include <vector>

#include "fastsverl/env.h"

namespace fastsverl {

// A subset of feature indices 0..n-1 stored as a bitmask (n <= 64).
struct Coalition {
  uint64_t mask = 0;
  int n = 0;

  static Coalition Empty(int n) { return {0, n}; }
  static Coalition Full(int n) { return {FullMask(n), n}; }
  static uint64_t FullMask(int n) {
    return n >= 64 ? ~uint64_t{0} : (uint64_t{1} << n) - 1;
  }

  bool contains(int i) const { return (mask >> i) & 1u; }
  int size() const { return std::popcount(mask); }
  bool is_empty() const { return mask == 0; }
  bool is_full() const { return mask == FullMask(n); }

  bool operator==(const Coalition&) const = default;
};

// |C|! (n - |C| - 1)! / n!, the weight of a marginal contribution in the
// Shapley sum. Requires 0 <= c <= n - 1.
double ShapleyCoefficient(int n, int c);

double Binomial(int n, int k);

// Kernel-weighted distribution over proper, non-empty subsets:
//   p(C) proportional to (n - 1) / (binom(n, |C|) |C| (n - |C|)).
// Sampling is two-stage: draw the size, then a uniform subset of that size.
class SubsetDistribution {
 public:
  explicit SubsetDistribution(int n);

  int n() const { return n_; }
  // Probability mass of all subsets of size k, for 1 <= k <= n - 1.
  double size_weight(int k) const { return size_weights_[k]; }
  // Zero for the empty and full coalitions.
  double Probability(const Coalition& c) const;
  Coalition Sample(Rng& rng) const;

 private:
  int n_;
  std::vector<double> size_weights_;  // indexed by size, [0] and [n] are 0
  std::vector<double> cumulative_;
};

double SubsetProbability(int n, const Coalition& c);
Coalition SampleSubset(int n, Rng& rng);

// Uniform over all 2^n subsets including the empty and full sets.
Coalition SampleUniformCoalition(int n, Rng& rng);

// Features in `c` are copied, all others replaced by `mask_value`.
std::vector<double> MaskState(std::span<const int> features,
                              const Coalition& c, double mask_value);
// Idempotent overload over an already masked vector.
std::vector<double> MaskState(std::span<const double> features,
                              const Coalition& c, double mask_value);

// Shifts every entry by (full - null - sum(phi)) / n so that the result sums
// to full - null.
std::vector<double> EfficiencyCorrect(std::span<const double> phi_hat,
                                      double full_value, double null_value);

}  // namespace fastsverl

#endif  // FASTSVERL_COALITION_H_
