#include <doctest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "lcsens/errors.hpp"
#include "lcsens/quantile.hpp"
#include "lcsens/serialize.hpp"
#include "lcsens/summary.hpp"

using namespace lcsens;

namespace {

FitResult synthetic_fit(std::uint64_t seed, int n_students, int n_kcs, double sd_theta, double sd_delta) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> z;
    FitResult f;
    f.fixed = {0.4, 0.08};
    f.student_block = {2, sd_theta, 0.0, sd_delta};
    f.kc_block = {2, 0.5, 0.0, 0.03};
    for (int s = 0; s < n_students; ++s)
        f.blups.students.push_back({"s" + std::to_string(s), 0.7 * sd_theta * z(gen), 0.7 * sd_delta * z(gen)});
    for (int k = 0; k < n_kcs; ++k) f.blups.kcs.push_back({"k" + std::to_string(k), 0.5 * z(gen), 0.03 * z(gen)});
    f.n_students = static_cast<std::size_t>(n_students);
    f.n_kcs = static_cast<std::size_t>(n_kcs);
    f.converged = true;
    return f;
}

const ComparisonRow& row(const std::vector<ComparisonRow>& rows, const std::string& p) {
    for (const auto& r : rows)
        if (r.parameter == p) return r;
    throw std::runtime_error("no row " + p);
}

}  // namespace

TEST_SUITE("quantile") {

TEST_CASE("type-7 examples") {
    const std::vector<double> v{1, 2, 3, 4};
    CHECK(quantile(v, 0.25) == 1.75);
    CHECK(quantile(v, 0.75) == 3.25);
    CHECK(median(v) == 2.5);
    CHECK(iqr(v) == 1.5);
    CHECK(iqr(std::vector<double>(7, 3.3)) == 0.0);
    CHECK(quantile(std::vector<double>{5.0}, 0.3) == 5.0);
    CHECK_THROWS_AS(quantile(std::vector<double>{}, 0.5), Error);
    CHECK_THROWS_AS(iqr(std::vector<double>{}), Error);
}

TEST_CASE("quantile agrees with the interpolant scan") {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> z;
    std::uniform_int_distribution<int> n(1, 60), coarse(0, 4);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> v(static_cast<std::size_t>(n(gen)));
        // Half of the trials use heavily tied values.
        for (auto& x : v) x = trial % 2 ? z(gen) : coarse(gen);
        for (double p : {0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0}) CHECK(std::abs(quantile(v, p) - oracle::quantile_scan(v, p)) <= 1e-12);
        CHECK(std::abs(iqr(v) - oracle::iqr_scan(v)) <= 1e-12);
    }
}

TEST_CASE("normal sample IQR is near 1.349") {
    std::mt19937_64 gen(11);
    std::normal_distribution<double> z;
    std::vector<double> v(1000);
    for (auto& x : v) x = z(gen);
    CHECK(std::abs(iqr(v) - kNormalIqr) < 0.1 * kNormalIqr);
}

TEST_CASE("iqr is translation invariant and scales linearly") {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> z;
    std::vector<double> v(101), w(101);
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = z(gen);
        w[i] = 4.0 * v[i] - 7.0;
    }
    CHECK(iqr(w) == doctest::Approx(4.0 * iqr(v)).epsilon(1e-12));
}

}  // TEST_SUITE

TEST_SUITE("summary") {

TEST_CASE("shrinkage ratio") {
    std::mt19937_64 gen(2);
    std::normal_distribution<double> z;
    std::vector<double> b(80), b3(80);
    for (std::size_t i = 0; i < b.size(); ++i) {
        b[i] = 0.1 * z(gen);
        b3[i] = 3.0 * b[i];
    }
    const auto r = shrinkage_ratio(b, 0.12);
    REQUIRE(r);
    CHECK(*r == doctest::Approx(iqr(b) / (1.349 * 0.12)).epsilon(1e-14));
    CHECK(*shrinkage_ratio(b3, 0.36) == doctest::Approx(*r).epsilon(1e-12));
    CHECK(*shrinkage_ratio(std::vector<double>(10, 0.0), 0.5) == 0.0);
    CHECK_FALSE(shrinkage_ratio(b, 1e-4));
    CHECK_FALSE(shrinkage_ratio(b, 0.0));
    CHECK(shrinkage_ratio(b, 2e-4));
}

TEST_CASE("opportunities to mastery") {
    const double goal = std::log(0.8 / (1.0 - 0.8));
    CHECK(*opportunities_to_mastery(goal, 0.1) == 0.0);
    CHECK(*opportunities_to_mastery(goal + 1.0, -0.2) == 0.0);
    // 65% first-attempt accuracy and 0.106 log-odds per opportunity.
    CHECK(*opportunities_to_mastery(0.619, 0.106) == doctest::Approx(7.24).epsilon(1e-3));
    CHECK_FALSE(opportunities_to_mastery(0.0, 0.0));
    CHECK_FALSE(opportunities_to_mastery(0.0, -0.1));
    CHECK_THROWS_AS(opportunities_to_mastery(0.0, 0.1, 1.0), Error);
    CHECK_THROWS_AS(opportunities_to_mastery(0.0, 0.1, 0.0), Error);
    // Non-increasing in the intercept, non-increasing in a positive slope.
    double last = 1e300;
    for (double th = -3.0; th <= 2.0; th += 0.25) {
        const double v = *opportunities_to_mastery(th, 0.1);
        CHECK(v <= last);
        last = v;
    }
    last = 1e300;
    for (double sl = 0.01; sl <= 1.0; sl += 0.01) {
        const double v = *opportunities_to_mastery(-1.0, sl);
        CHECK(v <= last);
        last = v;
    }
}

TEST_CASE("compare: identity and antisymmetry") {
    const FitSummary a = summarize(synthetic_fit(1, 40, 8, 0.6, 0.1));
    const FitSummary b = summarize(synthetic_fit(2, 40, 8, 0.5, 0.2));
    const auto same = compare(a, a);
    REQUIRE(same.size() == 6);
    for (const auto& r : same) {
        CHECK(r.abs_change == 0.0);
        if (r.pct_change) CHECK(*r.pct_change == 0.0);
    }
    const auto ab = compare(a, b), ba = compare(b, a);
    for (std::size_t i = 0; i < ab.size(); ++i) {
        CHECK(ab[i].parameter == ba[i].parameter);
        CHECK(ab[i].abs_change == -ba[i].abs_change);
    }
}

TEST_CASE("compare: near-zero baseline and the published slope-SD ratio") {
    FitSummary full, trunc;
    full.sd_delta = 0.013;
    trunc.sd_delta = 0.095;
    full.delta = -0.001;
    trunc.delta = 0.142;
    full.sd_theta = trunc.sd_theta = 0.5;
    const auto rows = compare(full, trunc, 0.01, "ds", "full", "truncated");
    const auto& sd = row(rows, "sd_delta");
    REQUIRE(sd.pct_change);
    CHECK(*sd.pct_change == doctest::Approx(631.0).epsilon(1e-3));
    CHECK(sd.abs_change == doctest::Approx(0.082).epsilon(1e-9));
    const auto& d = row(rows, "delta");
    CHECK_FALSE(d.pct_change);
    CHECK(d.abs_change == doctest::Approx(0.143).epsilon(1e-9));
    std::ostringstream csv;
    write_comparison_csv(csv, rows);
    CHECK(csv.str().rfind(std::string(kComparisonCsvHeader) + "\n", 0) == 0);
    CHECK(csv.str().find("ds,full,truncated,delta,-0.001,0.142,BASELINE_NEAR_ZERO,") != std::string::npos);
    CHECK(row(rows, "sd_theta").pct_change == 0.0);
}

TEST_CASE("compare refuses fits of different specs") {
    FitResult a = synthetic_fit(1, 10, 3, 0.5, 0.1), b = a;
    b.spec.variant = Variant::AFM;
    CHECK_THROWS_AS(compare(a, b), Error);
    b = a;
    b.spec.correlated = false;
    CHECK_THROWS_AS(compare(a, b), Error);
    CHECK_NOTHROW(compare(a, a));
}

TEST_CASE("spearman") {
    std::vector<double> x{3, 1, 4, 1.5, 9, 2.6};
    std::vector<double> rev(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) rev[i] = -x[i];
    CHECK(*spearman(x, x) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*spearman(x, rev) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK_FALSE(spearman(x, std::vector<double>(x.size(), 2.0)));
    CHECK_THROWS_AS(spearman(x, std::vector<double>{1, 2}), Error);
    CHECK_THROWS_AS(spearman(std::vector<double>{1}, std::vector<double>{1}), Error);

    std::mt19937_64 gen(17);
    std::normal_distribution<double> z;
    std::uniform_int_distribution<int> n(2, 40), tie(0, 5);
    for (int trial = 0; trial < 200; ++trial) {
        const auto m = static_cast<std::size_t>(n(gen));
        std::vector<double> a(m), b(m);
        for (std::size_t i = 0; i < m; ++i) {
            a[i] = trial % 3 == 0 ? tie(gen) : z(gen);
            b[i] = trial % 2 == 0 ? tie(gen) : a[i] + z(gen);
        }
        CHECK(mid_ranks(a) == oracle::count_ranks(a));
        const auto s = spearman(a, b);
        const bool flat = oracle::count_ranks(a) == std::vector<double>(m, (m + 1.0) / 2.0) ||
                          oracle::count_ranks(b) == std::vector<double>(m, (m + 1.0) / 2.0);
        if (flat) {
            CHECK_FALSE(s);
            continue;
        }
        REQUIRE(s);
        CHECK(std::abs(*s - oracle::spearman(a, b)) <= 1e-12);
        // Strictly increasing transforms leave ranks alone.
        std::vector<double> ea(m);
        for (std::size_t i = 0; i < m; ++i) ea[i] = std::exp(a[i]) + 5.0 * a[i];
        CHECK(std::abs(*spearman(ea, b) - *s) <= 1e-12);
    }
}

TEST_CASE("summarize reads the fit fields") {
    const FitResult f = synthetic_fit(4, 50, 7, 0.6, 0.1);
    const FitSummary s = summarize(f, 0.8, "ds");
    CHECK(s.dataset == "ds");
    CHECK(s.theta == f.fixed.theta);
    CHECK(s.sd_theta == 0.6);
    CHECK(s.sd_delta == 0.1);
    std::vector<double> th, de, ga;
    for (const auto& e : f.blups.students) {
        th.push_back(e.theta);
        de.push_back(e.delta);
    }
    for (const auto& e : f.blups.kcs) ga.push_back(e.gamma);
    CHECK(std::abs(s.iqr_theta_i - oracle::iqr_scan(th)) <= 1e-15);
    CHECK(std::abs(s.iqr_delta_i - oracle::iqr_scan(de)) <= 1e-15);
    CHECK(std::abs(s.iqr_gamma_k - oracle::iqr_scan(ga)) <= 1e-15);
    CHECK(*s.shrinkage_delta == doctest::Approx(oracle::iqr_scan(de) / (1.349 * 0.1)));
    const double goal = std::log(4.0);
    CHECK(*s.mastery_typical == doctest::Approx((goal - 0.4) / 0.08));
    CHECK(*s.mastery_theta_p25 >= *s.mastery_theta_p75);
    CHECK(*s.mastery_delta_p25 >= *s.mastery_delta_p75);
}

TEST_CASE("summarize from a serialized fit matches the in-memory fit") {
    const FitResult f = synthetic_fit(6, 30, 5, 0.4, 0.07);
    const FitResult g = fit_result_from_json(json::parse(dump(to_json(f))));
    const FitSummary a = summarize(f), b = summarize(g);
    for (const auto& [name, v] : summary_fields(a)) CHECK(summary_fields(b).at(name) == v);
}

TEST_CASE("singular slope leaves the shrinkage undefined") {
    FitResult f = synthetic_fit(8, 30, 5, 0.4, 0.0);
    for (auto& e : f.blups.students) e.delta = 0.0;
    const FitSummary s = summarize(f);
    CHECK_FALSE(s.shrinkage_delta);
    CHECK(s.shrinkage_theta);
    std::ostringstream csv;
    const std::vector<FitSummary> one{s};
    write_summary_csv(csv, one);
    CHECK(csv.str().find("UNDEFINED") != std::string::npos);
}

TEST_CASE("corpus rollup") {
    const FitSummary one = summarize(synthetic_fit(1, 20, 4, 0.5, 0.1), 0.8, "a");
    const std::vector<FitSummary> single{one};
    const Rollup r1 = corpus_rollup(single);
    CHECK(r1.n == 1);
    for (const auto& [name, v] : summary_fields(one)) {
        if (!v) continue;
        CHECK(r1.median.at(name) == *v);
        CHECK(r1.iqr.at(name) == 0.0);
    }
    std::vector<FitSummary> list(5);
    const double sd_d[] = {0.05, 0.01, 0.2, 0.1, 0.15};
    for (int i = 0; i < 5; ++i) {
        list[i].sd_delta = sd_d[i];
        list[i].delta = 0.1;
        if (i < 3) list[i].mastery_typical = 2.0 * i;
    }
    const Rollup r = corpus_rollup(list);
    CHECK(r.n == 5);
    CHECK(r.median.at("sd_delta") == 0.1);
    CHECK(r.iqr.at("sd_delta") == doctest::Approx(0.1));
    CHECK(r.median.at("mastery_typical") == 2.0);
    CHECK(r.iqr.at("mastery_typical") == 2.0);
    CHECK_THROWS_AS(corpus_rollup(std::vector<FitSummary>{}), Error);
}

}  // TEST_SUITE
