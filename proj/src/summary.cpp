#include "lcsens/summary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "lcsens/errors.hpp"
#include "lcsens/quantile.hpp"
#include "text_util.hpp"

namespace lcsens {

double iqr(std::span<const double> values) {
    if (values.empty()) throw Error("iqr of an empty list");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
}

std::optional<double> shrinkage_ratio(std::span<const double> blups, double sd, double floor) {
    if (!(sd > floor) || blups.empty()) return std::nullopt;
    return iqr(blups) / (kNormalIqr * sd);
}

std::optional<double> opportunities_to_mastery(double intercept, double slope, double target) {
    if (!(target > 0.0 && target < 1.0)) throw Error("mastery target must lie in (0, 1)");
    const double goal = std::log(target / (1.0 - target));
    if (intercept >= goal) return 0.0;
    if (slope > 0.0) return (goal - intercept) / slope;
    return std::nullopt;
}

FitSummary summarize(const FitResult& fit, double mastery_target, const std::string& dataset) {
    FitSummary s;
    s.dataset = dataset;
    s.theta = fit.fixed.theta;
    s.delta = fit.fixed.delta;
    s.sd_theta = fit.student_block.sd_intercept();
    s.sd_delta = fit.student_block.sd_slope();

    std::vector<double> th, de, ga;
    for (const auto& e : fit.blups.students) {
        th.push_back(e.theta);
        de.push_back(e.delta);
    }
    for (const auto& e : fit.blups.kcs) ga.push_back(e.gamma);

    const double tol = fit.config_echo.singular_tol;
    if (!th.empty()) {
        s.iqr_theta_i = iqr(th);
        s.shrinkage_theta = shrinkage_ratio(th, s.sd_theta, tol);
    }
    if (!de.empty()) {
        s.iqr_delta_i = iqr(de);
        if (fit.blups.has_student_slope) s.shrinkage_delta = shrinkage_ratio(de, s.sd_delta, tol);
    }
    if (!ga.empty()) s.iqr_gamma_k = iqr(ga);

    s.mastery_typical = opportunities_to_mastery(s.theta, s.delta, mastery_target);
    if (!th.empty()) {
        s.mastery_theta_p25 = opportunities_to_mastery(s.theta + quantile(th, 0.25), s.delta, mastery_target);
        s.mastery_theta_p75 = opportunities_to_mastery(s.theta + quantile(th, 0.75), s.delta, mastery_target);
    }
    if (!de.empty()) {
        s.mastery_delta_p25 = opportunities_to_mastery(s.theta, s.delta + quantile(de, 0.25), mastery_target);
        s.mastery_delta_p75 = opportunities_to_mastery(s.theta, s.delta + quantile(de, 0.75), mastery_target);
    }
    return s;
}

std::vector<ComparisonRow> compare(const FitSummary& a, const FitSummary& b, double floor,
                                   const std::string& dataset, const std::string& condition_a,
                                   const std::string& condition_b) {
    const std::pair<const char*, double FitSummary::*> params[] = {
        {"sd_theta", &FitSummary::sd_theta},       {"sd_delta", &FitSummary::sd_delta},
        {"delta", &FitSummary::delta},             {"iqr_theta_i", &FitSummary::iqr_theta_i},
        {"iqr_delta_i", &FitSummary::iqr_delta_i}, {"iqr_gamma_k", &FitSummary::iqr_gamma_k},
    };
    std::vector<ComparisonRow> rows;
    for (const auto& [name, member] : params) {
        ComparisonRow r;
        r.dataset = dataset;
        r.condition_a = condition_a;
        r.condition_b = condition_b;
        r.parameter = name;
        r.value_a = a.*member;
        r.value_b = b.*member;
        r.abs_change = r.value_b - r.value_a;
        if (std::abs(r.value_a) >= floor) r.pct_change = 100.0 * (r.value_b - r.value_a) / r.value_a;
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<ComparisonRow> compare(const FitResult& a, const FitResult& b, double floor, const std::string& dataset,
                                   const std::string& condition_a, const std::string& condition_b) {
    if (!(a.spec == b.spec)) throw Error("compare: fits use different model specs");
    return compare(summarize(a), summarize(b), floor, dataset, condition_a, condition_b);
}

std::vector<double> mid_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && values[idx[j + 1]] == values[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw Error("spearman: length mismatch");
    if (xs.size() < 2) throw Error("spearman: need at least two points");
    const auto rx = mid_ranks(xs);
    const auto ry = mid_ranks(ys);
    const double n = static_cast<double>(rx.size());
    const double mean = (n + 1.0) / 2.0;  // mid-ranks always average to (n+1)/2
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        const double dx = rx[i] - mean, dy = ry[i] - mean;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::map<std::string, std::optional<double>> summary_fields(const FitSummary& s) {
    return {
        {"sd_theta", s.sd_theta},
        {"sd_delta", s.sd_delta},
        {"theta", s.theta},
        {"delta", s.delta},
        {"iqr_theta_i", s.iqr_theta_i},
        {"iqr_delta_i", s.iqr_delta_i},
        {"iqr_gamma_k", s.iqr_gamma_k},
        {"shrinkage_theta", s.shrinkage_theta},
        {"shrinkage_delta", s.shrinkage_delta},
        {"mastery_typical", s.mastery_typical},
        {"mastery_theta_p25", s.mastery_theta_p25},
        {"mastery_theta_p75", s.mastery_theta_p75},
        {"mastery_delta_p25", s.mastery_delta_p25},
        {"mastery_delta_p75", s.mastery_delta_p75},
    };
}

Rollup corpus_rollup(std::span<const FitSummary> summaries) {
    if (summaries.empty()) throw Error("corpus_rollup of an empty list");
    std::map<std::string, std::vector<double>> columns;
    for (const auto& s : summaries)
        for (const auto& [name, v] : summary_fields(s))
            if (v) columns[name].push_back(*v);
    Rollup r;
    r.n = summaries.size();
    for (const auto& [name, values] : columns) {
        r.median[name] = median(values);
        r.iqr[name] = iqr(values);
    }
    return r;
}

namespace {

std::string opt_str(const std::optional<double>& v, const char* sentinel) {
    return v ? detail::format_double(*v) : std::string(sentinel);
}

}  // namespace

void write_summary_csv(std::ostream& out, std::span<const FitSummary> summaries) {
    out << "dataset,theta,delta,sd_theta,sd_delta,iqr_theta_i,iqr_delta_i,iqr_gamma_k,shrinkage_theta,"
           "shrinkage_delta,mastery_typical,mastery_theta_p25,mastery_theta_p75,mastery_delta_p25,"
           "mastery_delta_p75\n";
    using detail::format_double;
    for (const auto& s : summaries) {
        out << s.dataset << ',' << format_double(s.theta) << ',' << format_double(s.delta) << ','
            << format_double(s.sd_theta) << ',' << format_double(s.sd_delta) << ',' << format_double(s.iqr_theta_i)
            << ',' << format_double(s.iqr_delta_i) << ',' << format_double(s.iqr_gamma_k) << ','
            << opt_str(s.shrinkage_theta, kUndefined) << ',' << opt_str(s.shrinkage_delta, kUndefined) << ','
            << opt_str(s.mastery_typical, kNotReached) << ',' << opt_str(s.mastery_theta_p25, kNotReached) << ','
            << opt_str(s.mastery_theta_p75, kNotReached) << ',' << opt_str(s.mastery_delta_p25, kNotReached) << ','
            << opt_str(s.mastery_delta_p75, kNotReached) << '\n';
    }
}

void write_comparison_csv(std::ostream& out, std::span<const ComparisonRow> rows) {
    out << kComparisonCsvHeader << '\n';
    using detail::format_double;
    for (const auto& r : rows) {
        out << r.dataset << ',' << r.condition_a << ',' << r.condition_b << ',' << r.parameter << ','
            << format_double(r.value_a) << ',' << format_double(r.value_b) << ','
            << opt_str(r.pct_change, kBaselineNearZero) << ',' << format_double(r.abs_change) << '\n';
    }
}

}  // namespace lcsens
