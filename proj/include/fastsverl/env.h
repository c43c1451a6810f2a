#ifndef FASTSVERL_ENV_H_
#define FASTSVERL_ENV_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace fastsverl {

using Rng = std::mt19937_64;

// A state of the MDP as an ordered vector of discrete feature values.
struct FeatureState {
  std::vector<int> features;
  bool terminal = false;

  bool operator==(const FeatureState& other) const {
    return terminal == other.terminal && features == other.features;
  }
};

struct FeatureStateHash {
  size_t operator()(const FeatureState& s) const;
};

struct Transition {
  FeatureState next;
  double reward = 0.0;
  double probability = 0.0;
};

// Exact distribution over (next state, reward) for one (s, a) pair.
using TransitionDist = std::vector<Transition>;

struct EnvSpec {
  std::string name;
  int n_features = 0;
  int n_actions = 0;
  // Admissible values per feature, sorted ascending.
  std::vector<std::vector<int>> feature_domains;
  double gamma = 0.99;
  // Episode length cap used by samplers; 0 means uncapped.
  int max_episode_steps = 0;
};

// Tabular MDP with an exact, enumerable transition kernel. Environments are
// immutable after construction; all simulation state lives with the caller.
class Environment {
 public:
  virtual ~Environment() = default;

  const EnvSpec& spec() const { return spec_; }
  int n_features() const { return spec_.n_features; }
  int n_actions() const { return spec_.n_actions; }
  double gamma() const { return spec_.gamma; }

  virtual std::vector<std::pair<FeatureState, double>> StartDistribution()
      const = 0;

  // Throws ContractViolation for terminal input.
  virtual TransitionDist Kernel(const FeatureState& s, int action) const = 0;

  virtual std::string ActionName(int action) const;

  FeatureState SampleStart(Rng& rng) const;
  // Samples one transition from Kernel(s, action).
  Transition Step(const FeatureState& s, int action, Rng& rng) const;

  void set_gamma(double gamma);
  void set_max_episode_steps(int steps) { spec_.max_episode_steps = steps; }

 protected:
  explicit Environment(EnvSpec spec) : spec_(std::move(spec)) {}
  void ValidateState(const FeatureState& s) const;

  EnvSpec spec_;
};

// Deterministic 2x4 grid with the cell (1,2) missing. Features are (x, y);
// actions North, East, South, West.
class Gridworld : public Environment {
 public:
  Gridworld();
  std::vector<std::pair<FeatureState, double>> StartDistribution()
      const override;
  TransitionDist Kernel(const FeatureState& s, int action) const override;
  std::string ActionName(int action) const override;

  static bool IsCell(int x, int y);
  static FeatureState At(int x, int y);
};

// Code-breaking game over boards. The hidden code is marginalised out: the
// kernel spreads probability uniformly over the codes consistent with every
// clue already on the board.
//
// Encoding: letters are 1..alphabet_size, clue features store count + 1, and
// the value 0 marks an unused row slot. Each row is
// [letter_0 .. letter_{L-1}, misplaced + 1, position + 1].
class Mastermind : public Environment {
 public:
  Mastermind(int code_len, int max_guesses, int alphabet_size);

  std::vector<std::pair<FeatureState, double>> StartDistribution()
      const override;
  TransitionDist Kernel(const FeatureState& s, int action) const override;
  std::string ActionName(int action) const override;

  int code_len() const { return code_len_; }
  int max_guesses() const { return max_guesses_; }
  int alphabet_size() const { return alphabet_size_; }
  int n_codes() const { return n_codes_; }

  // Letters (1-based) of the code with the given action index.
  std::vector<int> Code(int index) const;

  struct Clues {
    int position = 0;
    int misplaced = 0;
  };
  // Position hits first, misplaced counted over the remaining letters.
  static Clues Score(const std::vector<int>& code,
                     const std::vector<int>& guess);

  int RowsUsed(const FeatureState& s) const;
  // Action indices of every code consistent with the clues on the board.
  std::vector<int> ConsistentCodes(const FeatureState& s) const;

 private:
  int code_len_;
  int max_guesses_;
  int alphabet_size_;
  int n_codes_;
  std::vector<std::vector<int>> codes_;
};

// n-dimensional lattice [0, l)^n. Action 2d moves +1 along dimension d and
// action 2d+1 moves -1, clamped at the walls. Starts at the all-zeros corner
// and terminates at the all-(l-1) corner.
class Hypercube : public Environment {
 public:
  Hypercube(int dims, int side, int64_t budget = int64_t{1} << 20);

  std::vector<std::pair<FeatureState, double>> StartDistribution()
      const override;
  TransitionDist Kernel(const FeatureState& s, int action) const override;
  std::string ActionName(int action) const override;

  int dims() const { return dims_; }
  int side() const { return side_; }

 private:
  int dims_;
  int side_;
};

// Every state reachable from the start distribution under any action sequence,
// in breadth-first order with non-terminal states first. Throws ConfigError
// once more than `budget` states are discovered.
std::vector<FeatureState> EnumerateStates(const Environment& env,
                                          int64_t budget = int64_t{1} << 20);

}  // namespace fastsverl

#endif  // FASTSVERL_ENV_H_
