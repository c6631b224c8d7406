#pragma once

#include <functional>
#include <span>
#include <vector>

namespace lcsens {

struct NelderMeadOptions {
    double ftol_rel = 1e-6;   // stop when f_max - f_min <= ftol_rel * |f_min| + ftol_abs
    double ftol_abs = 1e-10;
    double xtol = 1e-12;      // or when every vertex is within xtol of the best
    int max_eval = 5000;
};

struct NelderMeadResult {
    std::vector<double> x;
    double f = 0.0;
    int evaluations = 0;
    bool converged = false;
};

using Objective = std::function<double(std::span<const double>)>;

/// Box-constrained Nelder-Mead (reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2). Trial points are projected onto [lower, upper]. The initial
/// simplex is x0 plus step[i] along each axis, flipped inward when the step
/// would leave the box. Non-finite objective values rank as worst.
NelderMeadResult nelder_mead(const Objective& f, std::vector<double> x0, std::span<const double> step,
                             std::span<const double> lower, std::span<const double> upper,
                             const NelderMeadOptions& options = {});

}  // namespace lcsens
