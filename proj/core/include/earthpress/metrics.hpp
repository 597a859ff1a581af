#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "earthpress/demc.hpp"

namespace earthpress {

inline constexpr double kAgreementThreshold = 0.7;
inline constexpr std::size_t kMonitoringPoints = 100;

struct Agreement {
  double value = 1.0;
  /// Both series constant and equal, so the ratio is 0/0; value is 1.
  bool degenerate = false;
};

/// Willmott's index of agreement of `inverted` against `actual`.
Agreement index_of_agreement(std::span<const double> inverted, std::span<const double> actual);

double rmse(std::span<const double> inverted, std::span<const double> actual);

/// Mean of the per-angle posterior standard deviations.
double std_factor(const PosteriorSummary& summary);

/// Sum of absolute differences between neighbouring values, wrapping from
/// the last back to the first (the series is periodic in angle).
double total_variation(std::span<const double> values);

struct MetricReport {
  double ia = 0.0;
  bool ia_degenerate = false;
  double rmse = 0.0;
  double std = 0.0;
  std::size_t monitoring_points = 0;
  double threshold = kAgreementThreshold;

  bool passes() const noexcept { return ia >= threshold; }
};

/// IA and RMSE of `inverted` against `actual`, with Std from `summary`
/// when one is given (0 otherwise).
MetricReport score(std::span<const double> inverted, std::span<const double> actual,
                   const PosteriorSummary* summary = nullptr);

}  // namespace earthpress
