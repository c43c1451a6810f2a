#ifndef FASTSVERL_REPORT_H_
#define FASTSVERL_REPORT_H_

#include <string>
#include <vector>

#include "fastsverl/env.h"
#include "fastsverl/shapley_model.h"

namespace fastsverl {

// state_id,action,feature,raw,corrected (action is -1 for state-level targets)
void WriteExplanationCsv(const std::string& path,
                         const std::vector<Explanation>& explanations);

// Plain-text table of one explanation with the efficiency check.
std::string FormatExplanation(const Explanation& e, const Environment& env,
                              std::span<const int> features);

// Board heatmap: one cell per feature, blue for positive and red for negative
// attributions on a scale symmetric about zero. The greedy action is named in
// the caption.
std::string MastermindHeatmapSvg(const Mastermind& env,
                                 std::span<const int> features,
                                 std::span<const double> phi, int greedy_action,
                                 const std::string& title);

// "1,0,2,..." -> feature values. Throws ConfigError on malformed input.
std::vector<int> ParseStateSpec(const std::string& text, int n_features);

}  // namespace fastsverl

#endif  // FASTSVERL_REPORT_H_
