#ifndef FASTSVERL_TABULAR_H_
#define FASTSVERL_TABULAR_H_

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "fastsverl/agent.h"
#include "fastsverl/state_registry.h"

namespace fastsverl {

// Fully enumerated MDP. `ids` lists registry ids in enumeration order with
// the non-terminal states first; policies and value vectors handed to the
// solvers below are indexed by that order.
struct TabularMdp {
  std::shared_ptr<StateRegistry> registry;
  std::vector<int> ids;
  std::vector<int> index_of;  // registry id -> position in `ids`, or -1
  int n_nonterminal = 0;
  int n_actions = 0;
  double gamma = 1.0;
  std::vector<std::pair<int, double>> start;  // (position, probability)
  // kernel[pos * n_actions + a], next states as positions.
  std::vector<std::vector<IdTransition>> kernel;

  int size() const { return static_cast<int>(ids.size()); }
  int position(int id) const {
    return id >= 0 && id < static_cast<int>(index_of.size()) ? index_of[id]
                                                              : -1;
  }
};

TabularMdp BuildTabularMdp(Simulator& sim, int64_t budget = int64_t{1} << 20);

// Row-major (mdp.size() x n_actions) action probabilities in mdp order.
using PolicyMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                  Eigen::RowMajor>;

PolicyMatrix PolicyFromSnapshot(const TabularMdp& mdp,
                                const PolicySnapshot& snapshot);

// Solves (I - gamma P_pi) v = r_pi over the non-terminal states with a
// sparse LU factorisation; terminal entries are 0. Throws DataError when the
// system is singular (a policy that never terminates under gamma = 1).
Eigen::VectorXd EvaluatePolicy(const TabularMdp& mdp,
                               const PolicyMatrix& policy);

// Expected visits to each non-terminal state from the start distribution,
// solved from (I - g P_pi^T) eta = d with g = 1 (undiscounted) or gamma.
Eigen::VectorXd Occupancy(const TabularMdp& mdp, const PolicyMatrix& policy,
                          bool discounted = false);

struct OptimalSolution {
  Eigen::VectorXd values;
  PolicyMatrix policy;  // greedy, lowest-index ties
  double expected_return = 0.0;
};

OptimalSolution ValueIteration(const TabularMdp& mdp, double tolerance = 1e-12,
                               int max_iterations = 1000000);

double ExpectedReturn(const TabularMdp& mdp, const Eigen::VectorXd& values);

// Monte Carlo estimate of the return from `start_pos` following `policy`.
double MonteCarloValue(const TabularMdp& mdp, const PolicyMatrix& policy,
                       int start_pos, int64_t episodes, Rng& rng,
                       int max_steps = 10000);

}  // namespace fastsverl

#endif  // FASTSVERL_TABULAR_H_
