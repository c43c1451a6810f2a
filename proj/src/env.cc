#include "fastsverl/env.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <unordered_set>

#include "fastsverl/errors.h"

namespace fastsverl {

size_t FeatureStateHash::operator()(const FeatureState& s) const {
  uint64_t h = 0x9e3779b97f4a7c15ull ^ static_cast<uint64_t>(s.terminal);
  for (int v : s.features) {
    h ^= static_cast<uint64_t>(static_cast<uint32_t>(v)) + 0x9e3779b97f4a7c15ull +
         (h << 6) + (h >> 2);
  }
  return static_cast<size_t>(h);
}

std::string Environment::ActionName(int action) const {
  return std::to_string(action);
}

FeatureState Environment::SampleStart(Rng& rng) const {
  auto starts = StartDistribution();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  double acc = 0.0;
  for (auto& [state, p] : starts) {
    acc += p;
    if (u < acc) return state;
  }
  return starts.back().first;
}

Transition Environment::Step(const FeatureState& s, int action,
                             Rng& rng) const {
  TransitionDist dist = Kernel(s, action);
  if (dist.size() == 1) return dist.front();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  double acc = 0.0;
  for (auto& t : dist) {
    acc += t.probability;
    if (u < acc) return t;
  }
  return dist.back();
}

void Environment::set_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw ConfigError("gamma must lie in (0, 1]");
  }
  spec_.gamma = gamma;
}

void Environment::ValidateState(const FeatureState& s) const {
  FASTSVERL_REQUIRE(!s.terminal, "transition requested from a terminal state");
  FASTSVERL_REQUIRE(static_cast<int>(s.features.size()) == spec_.n_features,
                    "feature count mismatch");
}

// ---------------------------------------------------------------------------
// Gridworld

namespace {

constexpr int kNorth = 0;
constexpr int kEast = 1;
constexpr int kSouth = 2;
constexpr int kWest = 3;

EnvSpec GridworldSpec() {
  EnvSpec spec;
  spec.name = "gridworld";
  spec.n_features = 2;
  spec.n_actions = 4;
  spec.feature_domains = {{1, 2}, {1, 2, 3, 4}};
  spec.gamma = 0.99;
  spec.max_episode_steps = 50;
  return spec;
}

}  // namespace

Gridworld::Gridworld() : Environment(GridworldSpec()) {}

bool Gridworld::IsCell(int x, int y) {
  if (x < 1 || x > 2 || y < 1 || y > 4) return false;
  return !(x == 1 && y == 2);
}

FeatureState Gridworld::At(int x, int y) {
  return FeatureState{{x, y}, y == 4};
}

std::vector<std::pair<FeatureState, double>> Gridworld::StartDistribution()
    const {
  return {{At(1, 1), 0.5}, {At(2, 1), 0.5}};
}

TransitionDist Gridworld::Kernel(const FeatureState& s, int action) const {
  ValidateState(s);
  FASTSVERL_REQUIRE(action >= 0 && action < 4, "action out of range");
  int x = s.features[0];
  int y = s.features[1];
  FASTSVERL_REQUIRE(IsCell(x, y), "not a gridworld cell");
  int nx = x, ny = y;
  switch (action) {
    case kNorth: ++ny; break;
    case kEast: ++nx; break;
    case kSouth: --ny; break;
    case kWest: --nx; break;
  }
  if (!IsCell(nx, ny)) {
    nx = x;
    ny = y;
  }
  FeatureState next = At(nx, ny);
  double reward = next.terminal ? 9.0 : -1.0;
  return {Transition{next, reward, 1.0}};
}

std::string Gridworld::ActionName(int action) const {
  static const char* kNames[] = {"North", "East", "South", "West"};
  return (action >= 0 && action < 4) ? kNames[action] : "?";
}

// ---------------------------------------------------------------------------
// Mastermind

namespace {

EnvSpec MastermindSpec(int code_len, int max_guesses, int alphabet_size) {
  if (code_len < 1 || max_guesses < 1 || alphabet_size < 1) {
    throw ConfigError("mastermind parameters must be >= 1");
  }
  int64_t n_features = static_cast<int64_t>(max_guesses) * (code_len + 2);
  if (n_features > 64) {
    throw ConfigError("mastermind board has " + std::to_string(n_features) +
                      " features; coalition masks hold at most 64");
  }
  double n_codes = std::pow(static_cast<double>(alphabet_size), code_len);
  if (n_codes > (1 << 20)) {
    throw ConfigError("mastermind code space too large");
  }
  EnvSpec spec;
  spec.name = "mastermind-" + std::to_string(code_len) +
              std::to_string(max_guesses) + std::to_string(alphabet_size);
  spec.n_features = static_cast<int>(n_features);
  spec.n_actions = static_cast<int>(n_codes);
  spec.gamma = 0.99;
  spec.max_episode_steps = max_guesses;
  std::vector<int> letters(alphabet_size + 1);
  std::iota(letters.begin(), letters.end(), 0);
  std::vector<int> clues(code_len + 2);
  std::iota(clues.begin(), clues.end(), 0);
  for (int g = 0; g < max_guesses; ++g) {
    for (int i = 0; i < code_len; ++i) spec.feature_domains.push_back(letters);
    spec.feature_domains.push_back(clues);
    spec.feature_domains.push_back(clues);
  }
  return spec;
}

}  // namespace

Mastermind::Mastermind(int code_len, int max_guesses, int alphabet_size)
    : Environment(MastermindSpec(code_len, max_guesses, alphabet_size)),
      code_len_(code_len),
      max_guesses_(max_guesses),
      alphabet_size_(alphabet_size),
      n_codes_(spec_.n_actions) {
  codes_.reserve(n_codes_);
  for (int c = 0; c < n_codes_; ++c) {
    std::vector<int> code(code_len_);
    int rest = c;
    for (int i = code_len_ - 1; i >= 0; --i) {
      code[i] = rest % alphabet_size_ + 1;
      rest /= alphabet_size_;
    }
    codes_.push_back(std::move(code));
  }
}

std::vector<int> Mastermind::Code(int index) const {
  FASTSVERL_REQUIRE(index >= 0 && index < n_codes_, "code index out of range");
  return codes_[index];
}

std::string Mastermind::ActionName(int action) const {
  std::string name;
  for (int letter : Code(action)) name.push_back(static_cast<char>('A' + letter - 1));
  return name;
}

Mastermind::Clues Mastermind::Score(const std::vector<int>& code,
                                    const std::vector<int>& guess) {
  FASTSVERL_REQUIRE(code.size() == guess.size(), "code/guess length mismatch");
  Clues clues;
  std::vector<int> code_left, guess_left;
  for (size_t i = 0; i < code.size(); ++i) {
    if (code[i] == guess[i]) {
      ++clues.position;
    } else {
      code_left.push_back(code[i]);
      guess_left.push_back(guess[i]);
    }
  }
  std::sort(code_left.begin(), code_left.end());
  std::sort(guess_left.begin(), guess_left.end());
  size_t i = 0, j = 0;
  while (i < code_left.size() && j < guess_left.size()) {
    if (code_left[i] == guess_left[j]) {
      ++clues.misplaced;
      ++i;
      ++j;
    } else if (code_left[i] < guess_left[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return clues;
}

int Mastermind::RowsUsed(const FeatureState& s) const {
  const int width = code_len_ + 2;
  int rows = 0;
  while (rows < max_guesses_ && s.features[rows * width] != 0) ++rows;
  return rows;
}

std::vector<int> Mastermind::ConsistentCodes(const FeatureState& s) const {
  const int width = code_len_ + 2;
  const int rows = RowsUsed(s);
  std::vector<int> consistent;
  for (int c = 0; c < n_codes_; ++c) {
    bool ok = true;
    for (int r = 0; r < rows && ok; ++r) {
      const int* row = &s.features[r * width];
      std::vector<int> guess(row, row + code_len_);
      Clues clues = Score(codes_[c], guess);
      ok = clues.misplaced + 1 == row[code_len_] &&
           clues.position + 1 == row[code_len_ + 1];
    }
    if (ok) consistent.push_back(c);
  }
  return consistent;
}

std::vector<std::pair<FeatureState, double>> Mastermind::StartDistribution()
    const {
  FeatureState empty{std::vector<int>(spec_.n_features, 0), false};
  return {{empty, 1.0}};
}

TransitionDist Mastermind::Kernel(const FeatureState& s, int action) const {
  ValidateState(s);
  FASTSVERL_REQUIRE(action >= 0 && action < n_codes_, "action out of range");
  const int width = code_len_ + 2;
  const int rows = RowsUsed(s);
  FASTSVERL_REQUIRE(rows < max_guesses_, "board is full");
  std::vector<int> consistent = ConsistentCodes(s);
  FASTSVERL_REQUIRE(!consistent.empty(), "board admits no consistent code");

  const std::vector<int>& guess = codes_[action];
  TransitionDist dist;
  std::vector<std::pair<int, int>> outcome_keys;
  for (int c : consistent) {
    Clues clues = Score(codes_[c], guess);
    std::pair<int, int> key{clues.position, clues.misplaced};
    auto it = std::find(outcome_keys.begin(), outcome_keys.end(), key);
    if (it != outcome_keys.end()) {
      dist[it - outcome_keys.begin()].probability += 1.0;
      continue;
    }
    outcome_keys.push_back(key);
    FeatureState next = s;
    int* row = &next.features[rows * width];
    std::copy(guess.begin(), guess.end(), row);
    row[code_len_] = clues.misplaced + 1;
    row[code_len_ + 1] = clues.position + 1;
    bool solved = clues.position == code_len_;
    next.terminal = solved || rows + 1 == max_guesses_;
    double reward = -1.0 + (solved ? static_cast<double>(max_guesses_) : 0.0);
    dist.push_back(Transition{std::move(next), reward, 1.0});
  }
  const double total = static_cast<double>(consistent.size());
  for (auto& t : dist) t.probability /= total;
  return dist;
}

// ---------------------------------------------------------------------------
// Hypercube

namespace {

EnvSpec HypercubeSpec(int dims, int side, int64_t budget) {
  if (dims < 1 || side < 2) throw ConfigError("hypercube needs n >= 1, l >= 2");
  if (dims > 64) throw ConfigError("hypercube dimension exceeds 64 features");
  double states = std::pow(static_cast<double>(side), dims);
  if (states > static_cast<double>(budget)) {
    throw ConfigError("hypercube has " + std::to_string(states) +
                      " states, over the enumeration budget of " +
                      std::to_string(budget));
  }
  EnvSpec spec;
  spec.name = "hypercube-" + std::to_string(dims) + "-" + std::to_string(side);
  spec.n_features = dims;
  spec.n_actions = 2 * dims;
  std::vector<int> domain(side);
  std::iota(domain.begin(), domain.end(), 0);
  spec.feature_domains.assign(dims, domain);
  spec.gamma = 0.99;
  spec.max_episode_steps = 4 * dims * side * side;
  return spec;
}

}  // namespace

Hypercube::Hypercube(int dims, int side, int64_t budget)
    : Environment(HypercubeSpec(dims, side, budget)), dims_(dims), side_(side) {}

std::vector<std::pair<FeatureState, double>> Hypercube::StartDistribution()
    const {
  return {{FeatureState{std::vector<int>(dims_, 0), false}, 1.0}};
}

TransitionDist Hypercube::Kernel(const FeatureState& s, int action) const {
  ValidateState(s);
  FASTSVERL_REQUIRE(action >= 0 && action < 2 * dims_, "action out of range");
  FeatureState next = s;
  int d = action / 2;
  int step = (action % 2 == 0) ? 1 : -1;
  next.features[d] = std::clamp(next.features[d] + step, 0, side_ - 1);
  next.terminal = std::all_of(next.features.begin(), next.features.end(),
                              [&](int v) { return v == side_ - 1; });
  double reward = next.terminal ? 9.0 : -1.0;
  return {Transition{std::move(next), reward, 1.0}};
}

std::string Hypercube::ActionName(int action) const {
  return std::string(action % 2 == 0 ? "+" : "-") + std::to_string(action / 2);
}

// ---------------------------------------------------------------------------

std::vector<FeatureState> EnumerateStates(const Environment& env,
                                          int64_t budget) {
  std::vector<FeatureState> order;
  std::unordered_set<FeatureState, FeatureStateHash> seen;
  std::deque<FeatureState> frontier;
  auto visit = [&](const FeatureState& s) {
    if (seen.insert(s).second) {
      if (static_cast<int64_t>(seen.size()) > budget) {
        throw ConfigError("state enumeration exceeded the budget of " +
                          std::to_string(budget) + " states");
      }
      order.push_back(s);
      if (!s.terminal) frontier.push_back(s);
    }
  };
  for (auto& [s, p] : env.StartDistribution()) visit(s);
  while (!frontier.empty()) {
    FeatureState s = std::move(frontier.front());
    frontier.pop_front();
    for (int a = 0; a < env.n_actions(); ++a) {
      for (auto& t : env.Kernel(s, a)) visit(t.next);
    }
  }
  std::stable_partition(order.begin(), order.end(),
                        [](const FeatureState& s) { return !s.terminal; });
  return order;
}

}  // namespace fastsverl
