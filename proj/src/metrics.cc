#include "fastsverl/metrics.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>

#include "fastsverl/errors.h"

namespace fastsverl {

namespace {

std::ofstream OpenCsv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << std::setprecision(17);
  return out;
}

}  // namespace

void MetricSeries::Add(uint64_t seed, int64_t update, const std::string& metric,
                       double value) {
  for (auto it = rows_.rbegin(); it != rows_.rend(); ++it) {
    if (it->seed == seed && it->metric == metric) {
      FASTSVERL_REQUIRE(update >= it->update,
                        "update indices must not decrease for " + metric);
      break;
    }
  }
  rows_.push_back({seed, update, metric, value});
}

void MetricSeries::Append(const MetricSeries& other) {
  for (const MetricRow& r : other.rows_) Add(r.seed, r.update, r.metric, r.value);
}

Curve MetricSeries::CurveFor(uint64_t seed, const std::string& metric) const {
  Curve curve;
  for (const MetricRow& r : rows_) {
    if (r.seed == seed && r.metric == metric) curve.emplace_back(r.update, r.value);
  }
  return curve;
}

std::vector<uint64_t> MetricSeries::Seeds() const {
  std::set<uint64_t> seeds;
  for (const MetricRow& r : rows_) seeds.insert(r.seed);
  return {seeds.begin(), seeds.end()};
}

std::vector<std::string> MetricSeries::Metrics() const {
  std::vector<std::string> names;
  for (const MetricRow& r : rows_) {
    if (std::find(names.begin(), names.end(), r.metric) == names.end()) {
      names.push_back(r.metric);
    }
  }
  return names;
}

void MetricSeries::WriteCsv(const std::string& path) const {
  std::ofstream out = OpenCsv(path);
  out << "seed,update,metric,value\n";
  for (const MetricRow& r : rows_) {
    out << r.seed << ',' << r.update << ',' << r.metric << ',' << r.value << '\n';
  }
}

int64_t UpdatesToThreshold(const Curve& curve, double threshold) {
  for (const auto& [update, value] : curve) {
    if (value <= threshold) return update;
  }
  return kNotReached;
}

double Median(std::vector<double> values) {
  std::erase_if(values, [](double v) { return std::isnan(v); });
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const size_t k = values.size();
  return k % 2 ? values[k / 2] : 0.5 * (values[k / 2 - 1] + values[k / 2]);
}

Aggregate Summarize(const std::vector<double>& values) {
  Aggregate a;
  a.count = static_cast<int>(values.size());
  if (values.empty()) {
    a.mean = a.se = a.median = std::numeric_limits<double>::quiet_NaN();
    return a;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  a.mean = sum / a.count;
  if (a.count > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.se = std::sqrt(ss / (a.count - 1)) / std::sqrt(static_cast<double>(a.count));
  }
  a.median = Median(values);
  return a;
}

ThresholdSummary SummarizeThreshold(const std::vector<int64_t>& per_seed) {
  ThresholdSummary s;
  s.per_seed = per_seed;
  std::vector<double> reached, all;
  for (int64_t u : per_seed) {
    if (u == kNotReached) {
      all.push_back(std::numeric_limits<double>::infinity());
    } else {
      reached.push_back(static_cast<double>(u));
      all.push_back(static_cast<double>(u));
    }
  }
  s.reached = static_cast<int>(reached.size());
  s.reached_stats = Summarize(reached);
  s.median = Median(all);
  return s;
}

// ---------------------------------------------------------------------------

void ScalarTable::Set(uint64_t seed, const std::string& key, double value) {
  values_[key][seed] = value;
}

std::vector<double> ScalarTable::Values(const std::string& key) const {
  std::vector<double> out;
  auto it = values_.find(key);
  if (it == values_.end()) return out;
  for (const auto& [seed, v] : it->second) out.push_back(v);
  return out;
}

double ScalarTable::Get(uint64_t seed, const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end() || !it->second.count(seed)) {
    throw DataError("no scalar '" + key + "' for seed " + std::to_string(seed));
  }
  return it->second.at(seed);
}

bool ScalarTable::Has(const std::string& key) const {
  return values_.count(key) > 0;
}

std::vector<std::string> ScalarTable::Keys() const {
  std::vector<std::string> keys;
  for (const auto& [key, _] : values_) keys.push_back(key);
  return keys;
}

void ScalarTable::Append(const ScalarTable& other) {
  for (const auto& [key, by_seed] : other.values_) {
    for (const auto& [seed, v] : by_seed) Set(seed, key, v);
  }
}

void ScalarTable::WriteCsv(const std::string& path) const {
  std::ofstream out = OpenCsv(path);
  out << "seed,key,value\n";
  for (const auto& [key, by_seed] : values_) {
    for (const auto& [seed, v] : by_seed) {
      out << seed << ',' << key << ',' << v << '\n';
    }
  }
}

void ScalarTable::WriteSummaryCsv(const std::string& path) const {
  std::ofstream out = OpenCsv(path);
  out << "key,count,mean,se,median\n";
  for (const auto& [key, by_seed] : values_) {
    std::vector<double> all, finite;
    for (const auto& [seed, v] : by_seed) {
      all.push_back(v);
      if (std::isfinite(v)) finite.push_back(v);
    }
    Aggregate a = Summarize(finite);
    out << key << ',' << a.count << ',' << a.mean << ',' << a.se << ','
        << Median(all) << '\n';
  }
}

}  // namespace fastsverl
