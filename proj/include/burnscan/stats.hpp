#pragma once

#include <span>
#include <vector>

namespace burnscan {

/// Quantile of already-sorted data with linear interpolation between closest
/// ranks: h = (n - 1) p / 100. `percent` in [0, 100]; data must be non-empty.
double quantile_sorted(std::span<const double> sorted, double percent);

/// Neumaier-compensated mean; NaN for empty input.
double compensated_mean(std::span<const double> values);

double sample_sd(std::span<const double> values);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

std::vector<double> average_ranks(std::span<const double> values);

}  // namespace burnscan
