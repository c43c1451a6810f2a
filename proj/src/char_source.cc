#include "fastsverl/char_source.h"

#include <algorithm>

#include "fastsverl/errors.h"

namespace fastsverl {

double RawTarget(TargetKind kind, const PolicySnapshot& snapshot, int state,
                 int output) {
  switch (kind) {
    case TargetKind::kBehaviour:
      return snapshot.probability(state, output);
    case TargetKind::kPrediction:
      return snapshot.value(state);
    case TargetKind::kOutcome:
      break;
  }
  throw ContractViolation("the outcome characteristic has no raw target");
}

std::vector<double> NullFromDistribution(TargetKind kind,
                                         const StateDistribution& dist,
                                         const PolicySnapshot& snapshot) {
  const int outputs = kind == TargetKind::kBehaviour ? snapshot.n_actions() : 1;
  std::vector<double> null(outputs, 0.0);
  for (int pos = 0; pos < dist.size(); ++pos) {
    for (int o = 0; o < outputs; ++o) {
      null[o] += dist.prob(pos) * RawTarget(kind, snapshot, dist.id(pos), o);
    }
  }
  return null;
}

double CharSource::Value(int state, int output, uint64_t mask, Rng& rng) {
  CharQuery q{state, output, mask};
  double v = 0.0;
  Values({&q, 1}, {&v, 1}, rng);
  return v;
}

std::vector<double> CharSource::ActionValues(int state, uint64_t mask,
                                             Rng& rng) {
  FASTSVERL_REQUIRE(kind() == TargetKind::kBehaviour,
                    "action values need a behaviour source");
  std::vector<CharQuery> queries(n_outputs());
  for (int a = 0; a < n_outputs(); ++a) queries[a] = {state, a, mask};
  std::vector<double> out(n_outputs());
  Values(queries, out, rng);
  for (double& v : out) v = std::clamp(v, 0.0, 1.0);
  return out;
}

// ---------------------------------------------------------------------------

void ExactTableSource::Values(std::span<const CharQuery> queries,
                              std::span<double> out, Rng&) {
  for (size_t i = 0; i < queries.size(); ++i) {
    out[i] = table_->Lookup(queries[i].state, queries[i].mask, queries[i].output);
  }
}

double ExactTableSource::Null(int state, int output) {
  return table_->Lookup(state, 0, output);
}

double ExactTableSource::Full(int state, int output) {
  return table_->Lookup(state, Coalition::FullMask(n_features()), output);
}

// ---------------------------------------------------------------------------

SampledSource::SampledSource(TargetKind kind, const StateDistribution& buffer,
                             const PolicySnapshot& snapshot)
    : kind_(kind),
      n_features_(buffer.registry().n_features()),
      index_(buffer),
      snapshot_(&snapshot),
      null_(NullFromDistribution(kind, buffer, snapshot)) {
  FASTSVERL_REQUIRE(kind != TargetKind::kOutcome,
                    "sampled targets cover behaviour and prediction only");
}

int SampledSource::SampleState(int state, uint64_t mask, Rng& rng) {
  if (mask == Coalition::FullMask(n_features_)) return state;
  const int s = index_.Sample(state, mask, rng);
  if (s < 0) throw DataError("no buffer state matches the conditioning features");
  return s;
}

void SampledSource::Values(std::span<const CharQuery> queries,
                           std::span<double> out, Rng& rng) {
  for (size_t i = 0; i < queries.size(); ++i) {
    const int s = SampleState(queries[i].state, queries[i].mask, rng);
    out[i] = RawTarget(kind_, *snapshot_, s, queries[i].output);
  }
}

double SampledSource::Full(int state, int output) {
  return RawTarget(kind_, *snapshot_, state, output);
}

std::vector<double> SampledSource::ActionValues(int state, uint64_t mask,
                                                Rng& rng) {
  FASTSVERL_REQUIRE(kind_ == TargetKind::kBehaviour,
                    "action values need a behaviour source");
  auto p = snapshot_->probabilities(SampleState(state, mask, rng));
  return {p.begin(), p.end()};
}

}  // namespace fastsverl
