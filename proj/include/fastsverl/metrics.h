#ifndef FASTSVERL_METRICS_H_
#define FASTSVERL_METRICS_H_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace fastsverl {

struct MetricRow {
  uint64_t seed = 0;
  int64_t update = 0;
  std::string metric;
  double value = 0.0;
};

using Curve = std::vector<std::pair<int64_t, double>>;

// Tidy (seed, update, metric, value) rows. Update indices must not decrease
// within one (seed, metric) curve.
class MetricSeries {
 public:
  void Add(uint64_t seed, int64_t update, const std::string& metric,
           double value);
  void Append(const MetricSeries& other);
  const std::vector<MetricRow>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }

  Curve CurveFor(uint64_t seed, const std::string& metric) const;
  std::vector<uint64_t> Seeds() const;
  std::vector<std::string> Metrics() const;

  // seed,update,metric,value
  void WriteCsv(const std::string& path) const;

 private:
  std::vector<MetricRow> rows_;
};

inline constexpr int64_t kNotReached = -1;

// First update index whose value is <= threshold, else kNotReached.
int64_t UpdatesToThreshold(const Curve& curve, double threshold);

struct Aggregate {
  int count = 0;
  double mean = 0.0;
  // Sample standard deviation over sqrt(count); 0 for a single value.
  double se = 0.0;
  double median = 0.0;
};

Aggregate Summarize(const std::vector<double>& values);

// Updates-to-threshold across seeds. Seeds that never reach the threshold
// are left out of mean and SE and count as +infinity for the median.
struct ThresholdSummary {
  std::vector<int64_t> per_seed;
  int reached = 0;
  Aggregate reached_stats;
  double median = 0.0;
};

ThresholdSummary SummarizeThreshold(const std::vector<int64_t>& per_seed);

// NaN entries are ignored.
double Median(std::vector<double> values);

// Per-seed scalar results (final MSE, peak MSE, updates-to-threshold, ...).
class ScalarTable {
 public:
  void Set(uint64_t seed, const std::string& key, double value);
  std::vector<double> Values(const std::string& key) const;
  double Get(uint64_t seed, const std::string& key) const;
  bool Has(const std::string& key) const;
  std::vector<std::string> Keys() const;
  void Append(const ScalarTable& other);

  // seed,key,value
  void WriteCsv(const std::string& path) const;
  // key,count,mean,se,median (non-finite values are dropped from mean/SE)
  void WriteSummaryCsv(const std::string& path) const;

 private:
  std::map<std::string, std::map<uint64_t, double>> values_;
};

}  // namespace fastsverl

#endif  // FASTSVERL_METRICS_H_
