#pragma once

#include <span>
#include <vector>

namespace trb::stats {

[[nodiscard]] double mean(std::span<const double> x);

/// Sample variance with the (n-1) divisor.
[[nodiscard]] double variance(std::span<const double> x);

/// Population variance with the n divisor.
[[nodiscard]] double variance_pop(std::span<const double> x);

[[nodiscard]] double sd(std::span<const double> x);

/// Median; even-length inputs return the midpoint of the central pair.
/// The input span is not modified.
[[nodiscard]] double median(std::span<const double> x);

[[nodiscard]] double correlation(std::span<const double> x, std::span<const double> y);

/// Lag-j sample autocorrelation (sum over overlapping pairs / total SSQ).
[[nodiscard]] double autocorrelation(std::span<const double> x, int lag);

[[nodiscard]] double skewness(std::span<const double> x);

/// Excess-free kurtosis (fourth standardized moment, normal -> 3).
[[nodiscard]] double kurtosis(std::span<const double> x);

[[nodiscard]] double quantile(std::span<const double> x, double q);

} // namespace trb::stats
