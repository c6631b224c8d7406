#include "lcsens/quantile.hpp"

#include <algorithm>
#include <cmath>

#include "lcsens/errors.hpp"

namespace lcsens {

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw Error("quantile of an empty list");
    p = std::clamp(p, 0.0, 1.0);
    const double h = static_cast<double>(sorted.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const double frac = h - static_cast<double>(lo);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double quantile(std::span<const double> values, double p) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return quantile_sorted(sorted, p);
}

double median(std::span<const double> values) { return quantile(values, 0.5); }

}  // namespace lcsens
