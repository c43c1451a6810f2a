#include "fastsverl/report.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fastsverl/errors.h"

namespace fastsverl {

void WriteExplanationCsv(const std::string& path,
                         const std::vector<Explanation>& explanations) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << std::setprecision(17);
  out << "state_id,action,feature,raw,corrected\n";
  for (const Explanation& e : explanations) {
    for (size_t i = 0; i < e.raw.size(); ++i) {
      out << e.state << ',' << e.action << ',' << i << ',' << e.raw[i] << ','
          << e.corrected[i] << '\n';
    }
  }
}

std::string FormatExplanation(const Explanation& e, const Environment& env,
                              std::span<const int> features) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(6);
  out << "state " << e.state << " [";
  for (size_t i = 0; i < features.size(); ++i) out << (i ? "," : "") << features[i];
  out << "]";
  if (e.action >= 0) out << " action " << env.ActionName(e.action);
  out << "\n";
  out << "feature  value  raw        corrected\n";
  double sum = 0.0;
  for (size_t i = 0; i < e.raw.size(); ++i) {
    out << std::setw(7) << i << "  " << std::setw(5) << features[i] << "  "
        << std::setw(9) << e.raw[i] << "  " << std::setw(9) << e.corrected[i]
        << "\n";
    sum += e.corrected[i];
  }
  out << "sum " << sum << " = full " << e.full_value << " - null "
      << e.null_value << " (residual "
      << std::abs(sum - (e.full_value - e.null_value)) << ")\n";
  return out.str();
}

namespace {

std::string Colour(double value, double scale) {
  const double t = scale > 0.0 ? std::clamp(value / scale, -1.0, 1.0) : 0.0;
  const int fade = static_cast<int>(std::lround(255.0 * (1.0 - std::abs(t))));
  char buf[8];
  if (t >= 0.0) {
    std::snprintf(buf, sizeof buf, "#%02x%02xff", fade, fade);
  } else {
    std::snprintf(buf, sizeof buf, "#ff%02x%02x", fade, fade);
  }
  return buf;
}

std::string CellText(int slot, int width, int value) {
  if (value == 0) return "";
  if (slot < width - 2) return std::string(1, static_cast<char>('A' + value - 1));
  return std::to_string(value - 1);
}

}  // namespace

std::string MastermindHeatmapSvg(const Mastermind& env,
                                 std::span<const int> features,
                                 std::span<const double> phi, int greedy_action,
                                 const std::string& title) {
  const int width = env.code_len() + 2;
  const int rows = env.max_guesses();
  FASTSVERL_REQUIRE(static_cast<int>(features.size()) == width * rows &&
                        features.size() == phi.size(),
                    "board and attribution sizes do not match");
  double scale = 0.0;
  for (double v : phi) scale = std::max(scale, std::abs(v));
  const int cell = 48, pad = 16, header = 40, footer = 40;
  const int w = pad * 2 + cell * width;
  const int h = header + cell * rows + footer;
  std::ostringstream svg;
  svg << std::fixed << std::setprecision(4);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\" font-family=\"monospace\">\n";
  svg << "<text x=\"" << pad << "\" y=\"24\" font-size=\"14\">" << title
      << "</text>\n";
  for (int r = 0; r < rows; ++r) {
    for (int k = 0; k < width; ++k) {
      const int f = r * width + k;
      const int x = pad + k * cell, y = header + r * cell;
      svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell
          << "\" height=\"" << cell << "\" fill=\"" << Colour(phi[f], scale)
          << "\" stroke=\"#444\"><title>feature " << f << ": " << phi[f]
          << "</title></rect>\n";
      const std::string text = CellText(k, width, features[f]);
      if (!text.empty()) {
        svg << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 6
            << "\" font-size=\"18\" text-anchor=\"middle\">" << text
            << "</text>\n";
      }
    }
  }
  svg << "<text x=\"" << pad << "\" y=\"" << h - 14
      << "\" font-size=\"12\">greedy guess: " << env.ActionName(greedy_action)
      << "  scale: +/-" << scale << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

std::vector<int> ParseStateSpec(const std::string& text, int n_features) {
  std::vector<int> values;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      size_t used = 0;
      values.push_back(std::stoi(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ConfigError("bad state value '" + part + "' in '" + text + "'");
    }
  }
  if (static_cast<int>(values.size()) != n_features) {
    throw ConfigError("state '" + text + "' has " + std::to_string(values.size()) +
                      " values, expected " + std::to_string(n_features));
  }
  return values;
}

}  // namespace fastsverl
