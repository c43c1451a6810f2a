#include "fastsverl/tabular.h"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cmath>

#include "fastsverl/errors.h"

namespace fastsverl {

TabularMdp BuildTabularMdp(Simulator& sim, int64_t budget) {
  TabularMdp mdp;
  mdp.registry = sim.registry_ptr();
  mdp.n_actions = sim.env().n_actions();
  mdp.gamma = sim.env().gamma();
  for (const FeatureState& s : EnumerateStates(sim.env(), budget)) {
    mdp.ids.push_back(mdp.registry->Intern(s));
    if (!s.terminal) ++mdp.n_nonterminal;
  }
  mdp.index_of.assign(mdp.registry->size(), -1);
  for (int pos = 0; pos < mdp.size(); ++pos) mdp.index_of[mdp.ids[pos]] = pos;
  for (auto& [s, p] : sim.env().StartDistribution()) {
    mdp.start.emplace_back(mdp.position(mdp.registry->Find(s)), p);
  }
  mdp.kernel.resize(static_cast<size_t>(mdp.size()) * mdp.n_actions);
  for (int pos = 0; pos < mdp.n_nonterminal; ++pos) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      std::vector<IdTransition> dist = sim.Kernel(mdp.ids[pos], a);
      for (auto& t : dist) {
        t.next = mdp.position(t.next);
        FASTSVERL_REQUIRE(t.next >= 0, "kernel left the enumerated state set");
      }
      mdp.kernel[static_cast<size_t>(pos) * mdp.n_actions + a] = std::move(dist);
    }
  }
  return mdp;
}

PolicyMatrix PolicyFromSnapshot(const TabularMdp& mdp,
                                const PolicySnapshot& snapshot) {
  PolicyMatrix policy = PolicyMatrix::Zero(mdp.size(), mdp.n_actions);
  for (int pos = 0; pos < mdp.n_nonterminal; ++pos) {
    auto p = snapshot.probabilities(mdp.ids[pos]);
    for (int a = 0; a < mdp.n_actions; ++a) policy(pos, a) = p[a];
  }
  return policy;
}

namespace {

using SparseMatrix = Eigen::SparseMatrix<double>;

// I - g * P_pi (or its transpose) restricted to non-terminal states.
SparseMatrix TransitionSystem(const TabularMdp& mdp, const PolicyMatrix& policy,
                              double g, bool transpose) {
  const int n = mdp.n_nonterminal;
  std::vector<Eigen::Triplet<double>> triplets;
  for (int s = 0; s < n; ++s) {
    triplets.emplace_back(s, s, 1.0);
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double pa = policy(s, a);
      if (pa == 0.0) continue;
      for (const auto& t : mdp.kernel[static_cast<size_t>(s) * mdp.n_actions + a]) {
        if (t.next >= n) continue;  // terminal
        const double w = -g * pa * t.probability;
        if (transpose) {
          triplets.emplace_back(t.next, s, w);
        } else {
          triplets.emplace_back(s, t.next, w);
        }
      }
    }
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

Eigen::VectorXd SolveSparse(const SparseMatrix& m, const Eigen::VectorXd& rhs,
                            const char* what) {
  Eigen::SparseLU<SparseMatrix> lu;
  lu.analyzePattern(m);
  lu.factorize(m);
  if (lu.info() != Eigen::Success) {
    throw DataError(std::string("singular ") + what +
                    " system; the policy may never terminate");
  }
  Eigen::VectorXd x = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !x.allFinite() ||
      x.cwiseAbs().maxCoeff() > 1e12) {
    throw DataError(std::string("ill-conditioned ") + what + " system");
  }
  return x;
}

}  // namespace

Eigen::VectorXd EvaluatePolicy(const TabularMdp& mdp,
                               const PolicyMatrix& policy) {
  FASTSVERL_REQUIRE(policy.rows() == mdp.size() && policy.cols() == mdp.n_actions,
                    "policy matrix shape mismatch");
  const int n = mdp.n_nonterminal;
  Eigen::VectorXd reward = Eigen::VectorXd::Zero(n);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double pa = policy(s, a);
      if (pa == 0.0) continue;
      for (const auto& t : mdp.kernel[static_cast<size_t>(s) * mdp.n_actions + a]) {
        reward[s] += pa * t.probability * t.reward;
      }
    }
  }
  Eigen::VectorXd v = Eigen::VectorXd::Zero(mdp.size());
  v.head(n) = SolveSparse(TransitionSystem(mdp, policy, mdp.gamma, false),
                          reward, "bellman");
  return v;
}

Eigen::VectorXd Occupancy(const TabularMdp& mdp, const PolicyMatrix& policy,
                          bool discounted) {
  FASTSVERL_REQUIRE(policy.rows() == mdp.size() && policy.cols() == mdp.n_actions,
                    "policy matrix shape mismatch");
  const int n = mdp.n_nonterminal;
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  for (auto& [pos, p] : mdp.start) {
    if (pos < n) d[pos] += p;
  }
  const double g = discounted ? mdp.gamma : 1.0;
  return SolveSparse(TransitionSystem(mdp, policy, g, true), d, "occupancy");
}

OptimalSolution ValueIteration(const TabularMdp& mdp, double tolerance,
                               int max_iterations) {
  const int n = mdp.n_nonterminal;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(mdp.size());
  auto q_value = [&](int s, int a, const Eigen::VectorXd& values) {
    double q = 0.0;
    for (const auto& t : mdp.kernel[static_cast<size_t>(s) * mdp.n_actions + a]) {
      q += t.probability * (t.reward + mdp.gamma * values[t.next]);
    }
    return q;
  };
  for (int it = 0; it < max_iterations; ++it) {
    double delta = 0.0;
    for (int s = 0; s < n; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < mdp.n_actions; ++a) best = std::max(best, q_value(s, a, v));
      delta = std::max(delta, std::abs(best - v[s]));
      v[s] = best;
    }
    if (delta < tolerance) break;
  }
  OptimalSolution out;
  out.policy = PolicyMatrix::Zero(mdp.size(), mdp.n_actions);
  for (int s = 0; s < n; ++s) {
    Eigen::VectorXd q(mdp.n_actions);
    for (int a = 0; a < mdp.n_actions; ++a) q[a] = q_value(s, a, v);
    // Near-ties resolve to the lowest index.
    int best = 0;
    for (int a = 1; a < mdp.n_actions; ++a) {
      if (q[a] > q[best] + 1e-9) best = a;
    }
    out.policy(s, best) = 1.0;
  }
  out.values = EvaluatePolicy(mdp, out.policy);
  out.expected_return = ExpectedReturn(mdp, out.values);
  return out;
}

double ExpectedReturn(const TabularMdp& mdp, const Eigen::VectorXd& values) {
  double total = 0.0;
  for (auto& [pos, p] : mdp.start) total += p * values[pos];
  return total;
}

double MonteCarloValue(const TabularMdp& mdp, const PolicyMatrix& policy,
                       int start_pos, int64_t episodes, Rng& rng,
                       int max_steps) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto draw = [&](auto&& weight_of, int count) {
    const double u = unif(rng);
    double acc = 0.0;
    for (int i = 0; i < count; ++i) {
      acc += weight_of(i);
      if (u < acc) return i;
    }
    return count - 1;
  };
  double total = 0.0;
  for (int64_t e = 0; e < episodes; ++e) {
    int s = start_pos;
    double discount = 1.0;
    double ret = 0.0;
    for (int t = 0; t < max_steps && s < mdp.n_nonterminal; ++t) {
      const int a = draw([&](int i) { return policy(s, i); }, mdp.n_actions);
      const auto& dist = mdp.kernel[static_cast<size_t>(s) * mdp.n_actions + a];
      const int k = draw([&](int i) { return dist[i].probability; },
                         static_cast<int>(dist.size()));
      ret += discount * dist[k].reward;
      discount *= mdp.gamma;
      s = dist[k].next;
    }
    total += ret;
  }
  return total / static_cast<double>(episodes);
}

}  // namespace fastsverl
