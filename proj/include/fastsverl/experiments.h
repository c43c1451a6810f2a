#ifndef FASTSVERL_EXPERIMENTS_H_
#define FASTSVERL_EXPERIMENTS_H_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fastsverl/config.h"
#include "fastsverl/metrics.h"

namespace fastsverl {

// Seed of an independent random stream derived from a run seed.
uint64_t DeriveSeed(uint64_t seed, uint64_t stream);

// A trained (or solved) agent together with its tabular model when the
// state space is small enough to enumerate.
struct AgentSetup {
  std::shared_ptr<Simulator> sim;
  std::optional<TabularMdp> mdp;
  std::optional<GreedyPolicy> policy;
  PolicySnapshot snapshot;
  std::shared_ptr<ReplayBuffer> buffer;  // null for the optimal agent
  double expected_return = 0.0;
  double optimal_return = 0.0;
};

// `tabular` = false skips enumeration (large Mastermind variants).
AgentSetup PrepareAgent(const RunConfig& config, uint64_t seed,
                        bool tabular = true);

// Steady-state distribution of the agent's greedy policy as configured.
StateDistribution SteadyState(const RunConfig& config, AgentSetup& agent,
                              uint64_t seed);

struct ExperimentResult {
  std::string name;
  MetricSeries series;
  ScalarTable scalars;
};

const std::vector<std::string>& ExperimentNames();

// Runs the named pipeline for every seed in order. Throws ConfigError for an
// unknown name.
ExperimentResult RunExperiment(const std::string& name, const RunConfig& config,
                               const std::vector<uint64_t>& seeds);

// series.csv, scalars.csv, summary.csv, manifest.json and plot.py in `dir`.
void WriteArtifacts(const ExperimentResult& result, const RunConfig& config,
                    const std::vector<uint64_t>& seeds, const std::string& dir);

std::string ToolVersion();

}  // namespace fastsverl

#endif  // FASTSVERL_EXPERIMENTS_H_
