#include "earthpress/metrics.hpp"

#include <cmath>
#include <numeric>

#include "earthpress/errors.hpp"

namespace earthpress {

Agreement index_of_agreement(std::span<const double> inverted, std::span<const double> actual) {
  if (inverted.size() != actual.size()) throw DimensionError("IA needs series of equal length");
  if (actual.size() < 2) throw DimensionError("IA needs at least two points");
  const double mean = std::accumulate(actual.begin(), actual.end(), 0.0) / static_cast<double>(actual.size());
  double num = 0.0;
  double den = 0.0;
  for (std::size_t j = 0; j < actual.size(); ++j) {
    const double e = inverted[j] - actual[j];
    const double spread = std::abs(inverted[j] - mean) + std::abs(actual[j] - mean);
    num += e * e;
    den += spread * spread;
  }
  if (den == 0.0) return {1.0, true};
  return {1.0 - num / den, false};
}

double rmse(std::span<const double> inverted, std::span<const double> actual) {
  if (inverted.size() != actual.size()) throw DimensionError("RMSE needs series of equal length");
  if (actual.empty()) throw DimensionError("RMSE of an empty series");
  double ss = 0.0;
  for (std::size_t j = 0; j < actual.size(); ++j) {
    const double e = inverted[j] - actual[j];
    ss += e * e;
  }
  return std::sqrt(ss / static_cast<double>(actual.size()));
}

double std_factor(const PosteriorSummary& summary) {
  if (summary.std.empty()) throw ConfigError("summary has no monitoring angles");
  return std::accumulate(summary.std.begin(), summary.std.end(), 0.0) / static_cast<double>(summary.std.size());
}

double total_variation(std::span<const double> values) {
  double tv = 0.0;
  for (std::size_t j = 0; j < values.size(); ++j) {
    tv += std::abs(values[(j + 1) % values.size()] - values[j]);
  }
  return tv;
}

MetricReport score(std::span<const double> inverted, std::span<const double> actual,
                   const PosteriorSummary* summary) {
  MetricReport report;
  const Agreement ia = index_of_agreement(inverted, actual);
  report.ia = ia.value;
  report.ia_degenerate = ia.degenerate;
  report.rmse = rmse(inverted, actual);
  report.std = summary ? std_factor(*summary) : 0.0;
  report.monitoring_points = actual.size();
  return report;
}

}  // namespace earthpress
