#include "lcsens/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lcsens/errors.hpp"

namespace lcsens {

namespace {

double finite_or_inf(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::infinity(); }

}  // namespace

NelderMeadResult nelder_mead(const Objective& f, std::vector<double> x0, std::span<const double> step,
                             std::span<const double> lower, std::span<const double> upper,
                             const NelderMeadOptions& opt) {
    const std::size_t n = x0.size();
    if (step.size() != n || lower.size() != n || upper.size() != n)
        throw Error("nelder_mead: dimension mismatch");

    auto project = [&](std::vector<double>& x) {
        for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
    };

    NelderMeadResult res;
    auto eval = [&](const std::vector<double>& x) {
        ++res.evaluations;
        return finite_or_inf(f(x));
    };

    project(x0);
    std::vector<std::vector<double>> simplex(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = step[i];
        if (x0[i] + s > upper[i]) s = -s;
        if (x0[i] + s < lower[i]) s = (upper[i] - x0[i]) >= (x0[i] - lower[i]) ? (upper[i] - x0[i]) : -(x0[i] - lower[i]);
        simplex[i + 1][i] = x0[i] + s;
    }
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(simplex[i]);

    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), xr(n), xe(n), xc(n);

    while (true) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];

        const double frange = fv[worst] - fv[best];
        double xspread = 0.0;
        for (std::size_t v = 0; v <= n; ++v)
            for (std::size_t i = 0; i < n; ++i) xspread = std::max(xspread, std::abs(simplex[v][i] - simplex[best][i]));
        if ((std::isfinite(frange) && frange <= opt.ftol_rel * std::abs(fv[best]) + opt.ftol_abs) ||
            xspread <= opt.xtol) {
            res.converged = std::isfinite(fv[best]);
            break;
        }
        if (res.evaluations >= opt.max_eval) break;

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t v = 0; v <= n; ++v) {
            if (v == worst) continue;
            for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[v][i] / static_cast<double>(n);
        }

        for (std::size_t i = 0; i < n; ++i) xr[i] = centroid[i] + (centroid[i] - simplex[worst][i]);
        project(xr);
        const double fr = eval(xr);

        if (fr < fv[best]) {
            for (std::size_t i = 0; i < n; ++i) xe[i] = centroid[i] + 2.0 * (centroid[i] - simplex[worst][i]);
            project(xe);
            const double fe = eval(xe);
            if (fe < fr) {
                simplex[worst] = xe;
                fv[worst] = fe;
            } else {
                simplex[worst] = xr;
                fv[worst] = fr;
            }
            continue;
        }
        if (fr < fv[second]) {
            simplex[worst] = xr;
            fv[worst] = fr;
            continue;
        }

        // Contraction: outside when the reflected point beats the worst.
        const bool outside = fr < fv[worst];
        const auto& anchor = outside ? xr : simplex[worst];
        for (std::size_t i = 0; i < n; ++i) xc[i] = centroid[i] + 0.5 * (anchor[i] - centroid[i]);
        project(xc);
        const double fc = eval(xc);
        if (fc < (outside ? fr : fv[worst])) {
            simplex[worst] = xc;
            fv[worst] = fc;
            continue;
        }

        for (std::size_t v = 0; v <= n; ++v) {
            if (v == best) continue;
            for (std::size_t i = 0; i < n; ++i) simplex[v][i] = simplex[best][i] + 0.5 * (simplex[v][i] - simplex[best][i]);
            fv[v] = eval(simplex[v]);
        }
    }

    const auto best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
    res.x = simplex[best];
    res.f = fv[best];
    return res;
}

}  // namespace lcsens
