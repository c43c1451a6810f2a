#include "fastsverl/exact.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>

#include "fastsverl/errors.h"

namespace fastsverl {

std::string ToString(TargetKind kind) {
  switch (kind) {
    case TargetKind::kBehaviour:
      return "behaviour";
    case TargetKind::kOutcome:
      return "outcome";
    case TargetKind::kPrediction:
      return "prediction";
  }
  return "unknown";
}

TargetKind ParseTargetKind(const std::string& name) {
  if (name == "behaviour") return TargetKind::kBehaviour;
  if (name == "outcome") return TargetKind::kOutcome;
  if (name == "prediction") return TargetKind::kPrediction;
  throw ConfigError("unknown target kind '" + name +
                    "' (expected behaviour, outcome or prediction)");
}

// ---------------------------------------------------------------------------
// StateDistribution

StateDistribution::StateDistribution(
    std::shared_ptr<const StateRegistry> registry, const std::vector<int>& ids,
    const std::vector<double>& weights, Mode mode)
    : registry_(std::move(registry)), mode_(mode) {
  FASTSVERL_REQUIRE(ids.size() == weights.size(),
                    "state distribution ids and weights differ in length");
  double total = 0.0;
  for (size_t i = 0; i < ids.size(); ++i) {
    FASTSVERL_REQUIRE(weights[i] >= 0.0 && std::isfinite(weights[i]),
                      "state weights must be finite and non-negative");
    FASTSVERL_REQUIRE(!registry_->terminal(ids[i]),
                      "terminal state in a state distribution");
    total += weights[i];
  }
  if (!(total > 0.0)) throw DataError("state distribution has no mass");
  for (size_t i = 0; i < ids.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    FASTSVERL_REQUIRE(!position_.count(ids[i]), "duplicate state id");
    position_[ids[i]] = static_cast<int>(ids_.size());
    ids_.push_back(ids[i]);
    probs_.push_back(weights[i] / total);
  }
}

int StateDistribution::position(int id) const {
  auto it = position_.find(id);
  return it == position_.end() ? -1 : it->second;
}

double StateDistribution::TotalVariation(const StateDistribution& other) const {
  double tv = 0.0;
  for (int pos = 0; pos < size(); ++pos) {
    const int q = other.position(ids_[pos]);
    tv += std::abs(probs_[pos] - (q < 0 ? 0.0 : other.prob(q)));
  }
  for (int pos = 0; pos < other.size(); ++pos) {
    if (position(other.id(pos)) < 0) tv += other.prob(pos);
  }
  return 0.5 * tv;
}

StateDistribution AnalyticSteadyState(const TabularMdp& mdp,
                                      const PolicySnapshot& snapshot,
                                      bool discounted) {
  Eigen::VectorXd eta =
      Occupancy(mdp, PolicyFromSnapshot(mdp, snapshot), discounted);
  const double scale = eta.cwiseAbs().maxCoeff();
  std::vector<int> ids;
  std::vector<double> weights;
  for (int pos = 0; pos < mdp.n_nonterminal; ++pos) {
    // Round-off in unreachable states is dropped.
    if (eta[pos] <= 1e-13 * scale) continue;
    ids.push_back(mdp.ids[pos]);
    weights.push_back(eta[pos]);
  }
  return StateDistribution(mdp.registry, ids, weights,
                           StateDistribution::Mode::kAnalytic);
}

StateDistribution EmpiricalSteadyState(Simulator& sim,
                                       const PolicySnapshot& snapshot,
                                       int64_t episodes, Rng& rng) {
  FASTSVERL_REQUIRE(episodes > 0, "need at least one episode");
  const int cap = sim.env().spec().max_episode_steps;
  std::map<int, double> counts;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int64_t e = 0; e < episodes; ++e) {
    int s = sim.SampleStart(rng);
    for (int t = 0; cap == 0 || t < cap; ++t) {
      if (sim.registry().terminal(s)) break;
      FASTSVERL_REQUIRE(s < snapshot.size(),
                        "policy snapshot does not cover a visited state");
      counts[s] += 1.0;
      auto probs = snapshot.probabilities(s);
      const double u = unif(rng);
      int a = 0;
      double acc = probs[0];
      while (a + 1 < snapshot.n_actions() && u >= acc) acc += probs[++a];
      s = sim.Step(s, a, rng).next;
    }
  }
  std::vector<int> ids;
  std::vector<double> weights;
  for (auto& [id, c] : counts) {
    ids.push_back(id);
    weights.push_back(c);
  }
  return StateDistribution(sim.registry_ptr(), ids, weights,
                           StateDistribution::Mode::kEmpirical);
}

StateDistribution BufferStateDistribution(const ReplayBuffer& buffer) {
  FASTSVERL_REQUIRE(!buffer.empty(), "empty replay buffer");
  std::map<int, double> counts;
  for (size_t i = 0; i < buffer.size(); ++i) counts[buffer.at(i).state] += 1.0;
  std::vector<int> ids;
  std::vector<double> weights;
  for (auto& [id, c] : counts) {
    ids.push_back(id);
    weights.push_back(c);
  }
  return StateDistribution(buffer.registry_ptr(), ids, weights,
                           StateDistribution::Mode::kEmpirical);
}

// ---------------------------------------------------------------------------
// Conditional distributions

std::string MaskedKey(std::span<const int> features, uint64_t mask) {
  std::string key;
  key.reserve(features.size() * sizeof(int));
  for (size_t i = 0; i < features.size(); ++i) {
    if (!((mask >> i) & 1u)) continue;
    char bytes[sizeof(int)];
    std::memcpy(bytes, &features[i], sizeof(int));
    key.append(bytes, sizeof(int));
  }
  return key;
}

const MaskPartition& ConditionalIndex::Partition(uint64_t mask) {
  auto it = cache_.find(mask);
  if (it != cache_.end()) return it->second;
  const StateDistribution& dist = *dist_;
  MaskPartition part;
  part.group_of.resize(dist.size());
  for (int pos = 0; pos < dist.size(); ++pos) {
    std::string key = MaskedKey(dist.registry().features(dist.id(pos)), mask);
    auto [g, inserted] =
        part.group_by_key.emplace(std::move(key), static_cast<int>(part.groups.size()));
    if (inserted) part.groups.emplace_back();
    part.group_of[pos] = g->second;
    part.groups[g->second].members.push_back(pos);
  }
  for (auto& group : part.groups) {
    double total = 0.0;
    for (int pos : group.members) total += dist.prob(pos);
    double acc = 0.0;
    for (int pos : group.members) {
      const double p = dist.prob(pos) / total;
      acc += p;
      group.conditional.push_back(p);
      group.cumulative.push_back(acc);
    }
  }
  return cache_.emplace(mask, std::move(part)).first->second;
}

const MaskPartition::Group* ConditionalIndex::GroupFor(int state,
                                                       uint64_t mask) {
  const MaskPartition& part = Partition(mask);
  const int pos = dist_->position(state);
  if (pos >= 0) return &part.groups[part.group_of[pos]];
  auto it = part.group_by_key.find(
      MaskedKey(dist_->registry().features(state), mask));
  return it == part.group_by_key.end() ? nullptr : &part.groups[it->second];
}

std::vector<std::pair<int, double>> ConditionalIndex::Conditional(
    int state, uint64_t mask) {
  std::vector<std::pair<int, double>> out;
  const MaskPartition::Group* group = GroupFor(state, mask);
  if (group == nullptr) return out;
  for (size_t k = 0; k < group->members.size(); ++k) {
    out.emplace_back(dist_->id(group->members[k]), group->conditional[k]);
  }
  return out;
}

int ConditionalIndex::Sample(int state, uint64_t mask, Rng& rng) {
  const MaskPartition::Group* group = GroupFor(state, mask);
  if (group == nullptr) return -1;
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  auto it = std::upper_bound(group->cumulative.begin(), group->cumulative.end(), u);
  size_t k = static_cast<size_t>(it - group->cumulative.begin());
  if (k >= group->members.size()) k = group->members.size() - 1;
  return dist_->id(group->members[k]);
}

// ---------------------------------------------------------------------------
// CharacteristicTable

namespace {

void CheckTableBudget(size_t states, int n_features, int n_outputs) {
  if (n_features > 40 ||
      static_cast<double>(states) * std::ldexp(1.0, n_features) * n_outputs >
          static_cast<double>(kTableBudget)) {
    throw ConfigError("exact table of " + std::to_string(states) +
                      " states x 2^" + std::to_string(n_features) +
                      " coalitions x " + std::to_string(n_outputs) +
                      " outputs exceeds the oracle budget of " +
                      std::to_string(kTableBudget) + " entries");
  }
}

}  // namespace

CharacteristicTable::CharacteristicTable(TargetKind kind, int n_features,
                                         int n_outputs, std::vector<int> ids)
    : kind_(kind),
      n_features_(n_features),
      n_outputs_(n_outputs),
      ids_(std::move(ids)) {
  CheckTableBudget(ids_.size(), n_features_, n_outputs_);
  for (int pos = 0; pos < size(); ++pos) position_[ids_[pos]] = pos;
  values_.assign(ids_.size() * n_masks() * n_outputs_, 0.0);
}

int CharacteristicTable::position(int id) const {
  auto it = position_.find(id);
  return it == position_.end() ? -1 : it->second;
}

double CharacteristicTable::Lookup(int id, uint64_t mask, int output) const {
  const int pos = position(id);
  if (pos < 0) {
    throw DataError("state " + std::to_string(id) +
                    " is not covered by the " + ToString(kind_) + " table");
  }
  FASTSVERL_REQUIRE(mask < n_masks() && output >= 0 && output < n_outputs_,
                    "characteristic table index out of range");
  return at(pos, mask, output);
}

void CharacteristicTable::WriteCsv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << std::setprecision(17);
  out << "state_id,action,coalition_mask,value\n";
  const bool scalar = kind_ != TargetKind::kBehaviour;
  for (int pos = 0; pos < size(); ++pos) {
    for (int o = 0; o < n_outputs_; ++o) {
      for (uint64_t m = 0; m < n_masks(); ++m) {
        out << ids_[pos] << ',' << (scalar ? -1 : o) << ',' << m << ','
            << at(pos, m, o) << '\n';
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Exact characteristics

double ExactBehaviourChar(ConditionalIndex& index,
                          const PolicySnapshot& snapshot, int state,
                          int action, uint64_t mask) {
  const int n = index.distribution().registry().n_features();
  if (mask == Coalition::FullMask(n)) return snapshot.probability(state, action);
  auto cond = index.Conditional(state, mask);
  if (cond.empty()) {
    throw DataError("no support state matches the conditioning features");
  }
  double v = 0.0;
  for (auto& [id, p] : cond) v += p * snapshot.probability(id, action);
  return v;
}

double ExactPredictionChar(ConditionalIndex& index,
                           const PolicySnapshot& snapshot, int state,
                           uint64_t mask) {
  const int n = index.distribution().registry().n_features();
  if (mask == Coalition::FullMask(n)) return snapshot.value(state);
  auto cond = index.Conditional(state, mask);
  if (cond.empty()) {
    throw DataError("no support state matches the conditioning features");
  }
  double v = 0.0;
  for (auto& [id, p] : cond) v += p * snapshot.value(id);
  return v;
}

namespace {

// Fills `table` with conditional means of target(id, output) per mask, using
// one partition per mask. C = F entries are the raw targets.
template <typename Target>
void FillConditionalMeans(const StateDistribution& dist, Target target,
                          CharacteristicTable& table) {
  ConditionalIndex index(dist);
  const int n = table.n_features();
  const uint64_t full = Coalition::FullMask(n);
  const int outputs = table.n_outputs();
  std::vector<double> raw(static_cast<size_t>(dist.size()) * outputs);
  for (int pos = 0; pos < dist.size(); ++pos) {
    for (int o = 0; o < outputs; ++o) raw[pos * outputs + o] = target(dist.id(pos), o);
  }
  std::vector<double> mean(outputs);
  for (uint64_t mask = 0; mask < table.n_masks(); ++mask) {
    if (mask == full) {
      for (int pos = 0; pos < dist.size(); ++pos) {
        for (int o = 0; o < outputs; ++o) table.at(pos, mask, o) = raw[pos * outputs + o];
      }
      continue;
    }
    const MaskPartition& part = index.Partition(mask);
    for (const auto& group : part.groups) {
      std::fill(mean.begin(), mean.end(), 0.0);
      for (size_t k = 0; k < group.members.size(); ++k) {
        for (int o = 0; o < outputs; ++o) {
          mean[o] += group.conditional[k] * raw[group.members[k] * outputs + o];
        }
      }
      for (int pos : group.members) {
        for (int o = 0; o < outputs; ++o) table.at(pos, mask, o) = mean[o];
      }
    }
  }
}

}  // namespace

CharacteristicTable ExactBehaviourTable(const StateDistribution& dist,
                                        const PolicySnapshot& snapshot) {
  CharacteristicTable table(TargetKind::kBehaviour,
                            dist.registry().n_features(), snapshot.n_actions(),
                            dist.ids());
  FillConditionalMeans(
      dist, [&](int id, int a) { return snapshot.probability(id, a); }, table);
  return table;
}

CharacteristicTable ExactPredictionTable(const StateDistribution& dist,
                                         const PolicySnapshot& snapshot) {
  CharacteristicTable table(TargetKind::kPrediction,
                            dist.registry().n_features(), 1, dist.ids());
  FillConditionalMeans(
      dist, [&](int id, int) { return snapshot.value(id); }, table);
  return table;
}

namespace {

double EvaluateModified(const TabularMdp& mdp, PolicyMatrix& policy, int pos,
                        std::span<const double> row) {
  Eigen::RowVectorXd saved = policy.row(pos);
  for (int a = 0; a < mdp.n_actions; ++a) policy(pos, a) = row[a];
  Eigen::VectorXd v = EvaluatePolicy(mdp, policy);
  policy.row(pos) = saved;
  return v[pos];
}

std::vector<double> BehaviourRow(const CharacteristicTable& behaviour, int id,
                                 uint64_t mask) {
  FASTSVERL_REQUIRE(behaviour.kind() == TargetKind::kBehaviour,
                    "outcome oracle needs a behaviour table");
  std::vector<double> row(behaviour.n_outputs());
  for (int a = 0; a < behaviour.n_outputs(); ++a) {
    row[a] = behaviour.Lookup(id, mask, a);
  }
  return row;
}

}  // namespace

double ExactOutcomeChar(const TabularMdp& mdp, const PolicySnapshot& snapshot,
                        const CharacteristicTable& behaviour, int state,
                        uint64_t mask) {
  const int pos = mdp.position(state);
  FASTSVERL_REQUIRE(pos >= 0 && pos < mdp.n_nonterminal,
                    "outcome state must be a non-terminal MDP state");
  PolicyMatrix policy = PolicyFromSnapshot(mdp, snapshot);
  return EvaluateModified(mdp, policy, pos, BehaviourRow(behaviour, state, mask));
}

CharacteristicTable ExactOutcomeTable(const TabularMdp& mdp,
                                      const StateDistribution& dist,
                                      const PolicySnapshot& snapshot,
                                      const CharacteristicTable& behaviour) {
  CharacteristicTable table(TargetKind::kOutcome, behaviour.n_features(), 1,
                            dist.ids());
  PolicyMatrix policy = PolicyFromSnapshot(mdp, snapshot);
  Eigen::VectorXd v_pi = EvaluatePolicy(mdp, policy);
  const uint64_t full = Coalition::FullMask(table.n_features());
  for (int spos = 0; spos < dist.size(); ++spos) {
    const int id = dist.id(spos);
    const int pos = mdp.position(id);
    FASTSVERL_REQUIRE(pos >= 0 && pos < mdp.n_nonterminal,
                      "support state missing from the MDP");
    // Many coalitions share one behaviour vector; solve once per vector.
    std::map<std::vector<double>, double> solved;
    for (uint64_t mask = 0; mask < table.n_masks(); ++mask) {
      if (mask == full) {
        table.at(spos, mask, 0) = v_pi[pos];
        continue;
      }
      std::vector<double> row = BehaviourRow(behaviour, id, mask);
      auto it = solved.find(row);
      if (it == solved.end()) {
        it = solved.emplace(row, EvaluateModified(mdp, policy, pos, row)).first;
      }
      table.at(spos, mask, 0) = it->second;
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// Shapley values

namespace {

std::vector<double> ShapleyFromValues(int n, const std::vector<double>& v) {
  std::vector<double> coef(n);
  for (int c = 0; c < n; ++c) coef[c] = ShapleyCoefficient(n, c);
  std::vector<double> phi(n, 0.0);
  const uint64_t count = uint64_t{1} << n;
  for (int i = 0; i < n; ++i) {
    const uint64_t bit = uint64_t{1} << i;
    double sum = 0.0;
    for (uint64_t mask = 0; mask < count; ++mask) {
      if (mask & bit) continue;
      sum += coef[std::popcount(mask)] * (v[mask | bit] - v[mask]);
    }
    phi[i] = sum;
  }
  return phi;
}

std::vector<double> Tabulate(int n, const CharFunction& value) {
  FASTSVERL_REQUIRE(n >= 1 && n <= 24, "exact Shapley supports 1..24 features");
  std::vector<double> v(uint64_t{1} << n);
  for (uint64_t mask = 0; mask < v.size(); ++mask) v[mask] = value(mask);
  return v;
}

}  // namespace

std::vector<double> ExactShapley(int n, const CharFunction& value) {
  return ShapleyFromValues(n, Tabulate(n, value));
}

std::vector<double> WlsShapley(int n, const CharFunction& value) {
  FASTSVERL_REQUIRE(n >= 2, "weighted least squares needs at least 2 features");
  std::vector<double> v = Tabulate(n, value);
  const uint64_t full = Coalition::FullMask(n);
  SubsetDistribution subsets(n);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd z(n);
  for (uint64_t mask = 1; mask < full; ++mask) {
    const double p = subsets.Probability({mask, n});
    for (int i = 0; i < n; ++i) z[i] = (mask >> i) & 1u;
    a.noalias() += p * z * z.transpose();
    b.noalias() += p * (v[mask] - v[0]) * z;
  }
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + 1, n + 1);
  kkt.topLeftCorner(n, n) = 2.0 * a;
  kkt.topRightCorner(n, 1).setOnes();
  kkt.bottomLeftCorner(1, n).setOnes();
  Eigen::VectorXd rhs(n + 1);
  rhs.head(n) = 2.0 * b;
  rhs[n] = v[full] - v[0];
  Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  if (!lu.isInvertible()) throw DataError("singular KKT system");
  Eigen::VectorXd x = lu.solve(rhs);
  return std::vector<double>(x.data(), x.data() + n);
}

ShapleyTable::ShapleyTable(const CharacteristicTable& chars)
    : kind_(chars.kind()),
      n_features_(chars.n_features()),
      n_outputs_(chars.n_outputs()),
      ids_(chars.ids()) {
  for (int pos = 0; pos < size(); ++pos) position_[ids_[pos]] = pos;
  values_.resize(ids_.size() * n_outputs_ * n_features_);
  std::vector<double> v(chars.n_masks());
  for (int pos = 0; pos < size(); ++pos) {
    for (int o = 0; o < n_outputs_; ++o) {
      for (uint64_t m = 0; m < v.size(); ++m) v[m] = chars.at(pos, m, o);
      std::vector<double> phi = ShapleyFromValues(n_features_, v);
      std::copy(phi.begin(), phi.end(),
                values_.begin() +
                    (static_cast<size_t>(pos) * n_outputs_ + o) * n_features_);
    }
  }
}

int ShapleyTable::position(int id) const {
  auto it = position_.find(id);
  return it == position_.end() ? -1 : it->second;
}

void ShapleyTable::WriteCsv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << std::setprecision(17);
  out << "state_id,action,feature,phi\n";
  const bool scalar = kind_ != TargetKind::kBehaviour;
  for (int pos = 0; pos < size(); ++pos) {
    for (int o = 0; o < n_outputs_; ++o) {
      auto phi = at(pos, o);
      for (int i = 0; i < n_features_; ++i) {
        out << ids_[pos] << ',' << (scalar ? -1 : o) << ',' << i << ','
            << phi[i] << '\n';
      }
    }
  }
}

}  // namespace fastsverl
