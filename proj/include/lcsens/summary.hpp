#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lcsens/fitter.hpp"

namespace lcsens {

// Sentinels. Optional-valued fields serialize to these strings when empty.
inline constexpr const char* kNotReached = "NOT_REACHED";
inline constexpr const char* kBaselineNearZero = "BASELINE_NEAR_ZERO";
inline constexpr const char* kUndefined = "UNDEFINED";

/// IQR of a standard normal, used to put a BLUP IQR on the SD scale.
inline constexpr double kNormalIqr = 1.349;

struct FitSummary {
    std::string dataset;
    double sd_theta = 0.0;
    double sd_delta = 0.0;
    double delta = 0.0;
    double theta = 0.0;
    double iqr_theta_i = 0.0;
    double iqr_delta_i = 0.0;
    double iqr_gamma_k = 0.0;
    std::optional<double> shrinkage_theta;
    std::optional<double> shrinkage_delta;
    // Opportunities to reach the mastery target on a typical KC (KC effects 0).
    std::optional<double> mastery_typical;
    std::optional<double> mastery_theta_p25;  // intercept at θ̂ + Q1{θ̂_i}
    std::optional<double> mastery_theta_p75;  // intercept at θ̂ + Q3{θ̂_i}
    std::optional<double> mastery_delta_p25;  // slope at δ̂ + Q1{δ̂_i}
    std::optional<double> mastery_delta_p75;  // slope at δ̂ + Q3{δ̂_i}
};

struct ComparisonRow {
    std::string dataset;
    std::string condition_a;
    std::string condition_b;
    std::string parameter;
    double value_a = 0.0;
    double value_b = 0.0;
    std::optional<double> pct_change;  // 100 (b - a) / a; empty when |a| < floor
    double abs_change = 0.0;
};

double iqr(std::span<const double> values);

/// iqr(blups) / (1.349 sd); empty when sd <= floor.
std::optional<double> shrinkage_ratio(std::span<const double> blups, double sd, double floor = 1e-4);

/// 0 when already at target; (logit(target) - intercept) / slope when
/// slope > 0; otherwise empty (never reached).
std::optional<double> opportunities_to_mastery(double intercept, double slope, double target = 0.8);

FitSummary summarize(const FitResult& fit, double mastery_target = 0.8, const std::string& dataset = {});

/// Rows for sd_theta, sd_delta, delta and the three BLUP IQRs. Throws when
/// the two fits use different model specs.
std::vector<ComparisonRow> compare(const FitResult& a, const FitResult& b, double floor = 0.01,
                                   const std::string& dataset = {}, const std::string& condition_a = "a",
                                   const std::string& condition_b = "b");
std::vector<ComparisonRow> compare(const FitSummary& a, const FitSummary& b, double floor = 0.01,
                                   const std::string& dataset = {}, const std::string& condition_a = "a",
                                   const std::string& condition_b = "b");

/// Pearson correlation of mid-ranks. Throws on length mismatch or fewer than
/// two points; empty when either side has no rank variance.
std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys);

/// Mid-ranks (1-based, ties averaged).
std::vector<double> mid_ranks(std::span<const double> values);

struct Rollup {
    std::size_t n = 0;
    std::map<std::string, double> median;
    std::map<std::string, double> iqr;
};

/// Median and IQR of every FitSummary field across datasets; empty optional
/// values are left out of their field.
Rollup corpus_rollup(std::span<const FitSummary> summaries);

/// Named numeric view of a summary (the fields corpus_rollup aggregates).
std::map<std::string, std::optional<double>> summary_fields(const FitSummary& s);

void write_summary_csv(std::ostream& out, std::span<const FitSummary> summaries);
void write_comparison_csv(std::ostream& out, std::span<const ComparisonRow> rows);

inline constexpr const char* kComparisonCsvHeader =
    "dataset,condition_a,condition_b,parameter,value_a,value_b,pct_change,abs_change";

}  // namespace lcsens
