#pragma once

#include <span>
#include <vector>

namespace lcsens {

// Sample quantiles by linear interpolation between order statistics:
// h = (n-1)p + 1, Q(p) = x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h]).
// This is the default ("type 7") convention of R's quantile().

/// Quantile of an already sorted, nonempty range. p is clamped to [0, 1].
double quantile_sorted(std::span<const double> sorted, double p);

/// Quantile of an unsorted, nonempty range. Throws lcsens::Error when empty.
double quantile(std::span<const double> values, double p);

double median(std::span<const double> values);

}  // namespace lcsens
