#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "lcsens/errors.hpp"
#include "lcsens/fitter.hpp"
#include "lcsens/serialize.hpp"
#include "lcsens/simulate.hpp"

using namespace lcsens;

namespace {

FitConfig pinned_zero(const ModelSpec& spec) {
    FitConfig c;
    c.fixed_covariance = CovarianceParams::zeros(spec);
    return c;
}

Dataset small_sim(std::uint64_t seed, int students = 40, int kcs = 6, int length = 8) {
    SimConfig cfg;
    cfg.n_students = students;
    cfg.n_kcs = kcs;
    cfg.stopping.length = length;
    cfg.max_length = length;
    cfg.seed = seed;
    return simulate(cfg).data;
}

}  // namespace

TEST_SUITE("fitter") {

TEST_CASE("pinned-zero covariance reduces to logistic regression") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const Dataset d = testing_support::to_dataset(oracle::random_pairs(seed, 25, 6, 12, 0.7, 0.55 + 0.02 * seed));
        REQUIRE(d.n_obs() <= 2000);
        std::vector<double> t;
        std::vector<int> y;
        for (const auto& r : d.rows) {
            t.push_back(r.opportunity);
            y.push_back(r.outcome);
        }
        const oracle::Logistic o = oracle::irls(t, y);
        const FitResult f = fit(d, ModelSpec{}, pinned_zero(ModelSpec{}));
        CAPTURE(seed);
        CHECK(std::abs(f.fixed.theta - o.b0) <= 1e-4);
        CHECK(std::abs(f.fixed.delta - o.b1) <= 1e-4);
        CHECK(std::abs(f.deviance - o.deviance) <= 1e-6);
        CHECK(f.student_block.l11 == 0.0);
        CHECK(f.kc_block.l22 == 0.0);
    }
}

TEST_CASE("zeta = 0 gives all-zero BLUPs") {
    const FitResult f = fit(small_sim(2), ModelSpec{}, pinned_zero(ModelSpec{}));
    for (const auto& s : f.blups.students) {
        CHECK(s.theta == 0.0);
        CHECK(s.delta == 0.0);
    }
    for (const auto& k : f.blups.kcs) {
        CHECK(k.beta == 0.0);
        CHECK(k.gamma == 0.0);
    }
    CHECK(std::find(f.notes.begin(), f.notes.end(), "covariance parameters pinned") != f.notes.end());
}

TEST_CASE("AIC identity and parameter counts") {
    const Dataset d = small_sim(3);
    struct Case {
        ModelSpec spec;
        int params;
    };
    for (const Case& c : {Case{{Variant::IAFM, true}, 8}, Case{{Variant::IAFM, false}, 6}, Case{{Variant::AFM, true}, 6},
                          Case{{Variant::AFM, false}, 5}}) {
        const FitResult f = fit(d, c.spec);
        CHECK(f.n_params == c.params);
        CHECK(f.aic == f.deviance + 2.0 * f.n_params);
        CHECK(std::abs((f.aic - f.deviance) - 2.0 * f.n_params) <= 1e-12 * f.aic);
        if (!c.spec.correlated) {
            CHECK(f.student_block.l21 == 0.0);
            CHECK(f.kc_block.l21 == 0.0);
        }
        if (c.spec.variant == Variant::AFM) {
            CHECK(f.student_block.dim == 1);
            CHECK_FALSE(f.blups.has_student_slope);
            for (const auto& s : f.blups.students) CHECK(s.delta == 0.0);
        }
        CHECK(f.n_obs == d.n_obs());
        CHECK(f.n_students == 40);
        CHECK(f.n_kcs == 6);
    }
}

TEST_CASE("row order of the source file does not matter") {
    const Dataset d = small_sim(4);
    std::string text = testing_support::to_tsv(d);
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string header, line;
    std::getline(in, header);
    while (std::getline(in, line)) lines.push_back(line);
    std::mt19937_64 gen(9);
    std::shuffle(lines.begin(), lines.end(), gen);
    std::string shuffled = header + "\n";
    for (const auto& l : lines) shuffled += l + "\n";
    const Dataset e = testing_support::from_tsv(shuffled, d.name);
    const FitResult a = fit(d, ModelSpec{}), b = fit(e, ModelSpec{});
    CHECK(std::abs(a.deviance - b.deviance) <= 1e-8);
    CHECK(std::abs(a.fixed.theta - b.fixed.theta) <= 1e-8);
    CHECK(std::abs(a.fixed.delta - b.fixed.delta) <= 1e-8);
    for (auto [x, y] : {std::pair{a.student_block, b.student_block}, std::pair{a.kc_block, b.kc_block}}) {
        CHECK(std::abs(x.l11 - y.l11) <= 1e-8);
        CHECK(std::abs(x.l21 - y.l21) <= 1e-8);
        CHECK(std::abs(x.l22 - y.l22) <= 1e-8);
    }
    REQUIRE(a.modes.size() == b.modes.size());
    CHECK((a.modes - b.modes).lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("fits are deterministic") {
    const Dataset d = small_sim(5);
    const std::string a = dump(to_json(fit(d, ModelSpec{})));
    const std::string b = dump(to_json(fit(d, ModelSpec{})));
    CHECK(a == b);
}

TEST_CASE("a data-rich student is shrunk less than a data-poor one with the same record") {
    // Both extra students answer with the same trend-free pattern on every pair; the
    // rich one practices ten KCs, the poor one a single KC.
    Dataset base = small_sim(6, 60, 10, 10);
    const int pattern[] = {1, 1, 0, 1, 1, 1, 1, 0, 1, 1};
    std::vector<ObservationRow> rows = base.rows;
    for (int k = 0; k < 10; ++k) {
        const std::string kc = "k" + std::to_string(k);
        for (int t = 0; t < 10; ++t) {
            rows.push_back({"zz_rich", kc, 10 * k + t, 0, pattern[t]});
            if (k == 0) rows.push_back({"zz_poor", kc, t, 0, pattern[t]});
        }
    }
    const Dataset d = make_dataset(std::move(rows), "shrink");
    REQUIRE(kc_ids(d).size() == 10);
    const FitResult f = fit(d, ModelSpec{});
    double rich = 0, poor = 0;
    for (const auto& s : f.blups.students) {
        if (s.id == "zz_rich") rich = s.theta;
        if (s.id == "zz_poor") poor = s.theta;
    }
    CHECK(poor > 0.0);
    CHECK(rich > poor);
}

TEST_CASE("is_singular") {
    CHECK_FALSE(is_singular(CovarianceBlock{2, 0.8, 0.1, 0.0001}, 1e-4));
    CHECK(CovarianceBlock{2, 0.8, 0.1, 0.0001}.sd_slope() == doctest::Approx(0.1).epsilon(1e-6));
    CHECK(is_singular(CovarianceBlock{2, 0.8, 0.1, 0.0}, 1e-4));
    CHECK(CovarianceBlock{2, 0.8, 0.1, 0.0}.correlation() == 1.0);
    CHECK(is_singular(CovarianceBlock{2, 0.8, -0.1, 0.0}, 1e-4));
    CHECK(is_singular(CovarianceBlock{2, 0.0, 0.0, 0.3}, 1e-4));
    CHECK(is_singular(CovarianceBlock{2, 0.8, 0.0, 0.0}, 1e-4));
    CHECK_FALSE(is_singular(CovarianceBlock{1, 0.8, 0.0, 0.0}, 1e-4));
    CHECK(is_singular(CovarianceBlock{1, 5e-5, 0.0, 0.0}, 1e-4));
    FitResult f;
    f.student_block = {2, 0.5, 0.0, 0.1};
    f.kc_block = {2, 0.5, 0.0, 0.0};
    CHECK(is_singular(f, 1e-4));
    f.kc_block.l22 = 0.02;
    CHECK_FALSE(is_singular(f, 1e-4));
}

TEST_CASE("all-correct corpus terminates and is flagged") {
    std::vector<oracle::RawPair> pairs;
    for (int s = 0; s < 20; ++s)
        for (int k = 0; k < 5; ++k) pairs.push_back({"s" + std::to_string(s), "k" + std::to_string(k), std::vector<int>(6, 1)});
    const FitResult f = fit(testing_support::to_dataset(pairs), ModelSpec{});
    CHECK(f.deviance < 1e-3);
    CHECK(f.singular);
    CHECK_FALSE(f.converged);
    CHECK(std::any_of(f.notes.begin(), f.notes.end(), [](const std::string& n) { return n.find("bound") != std::string::npos; }));
}

TEST_CASE("a single student or a single KC is a degenerate design") {
    const Dataset one_student = testing_support::with_lengths({{"s", "a", 5}, {"s", "b", 5}});
    const Dataset one_kc = testing_support::with_lengths({{"s", "a", 5}, {"t", "a", 5}});
    CHECK_THROWS_AS(fit(one_student, ModelSpec{}), DegenerateDesignError);
    CHECK_THROWS_AS(fit(one_kc, ModelSpec{Variant::AFM}), DegenerateDesignError);
}

TEST_CASE("config validation names the field") {
    auto field = [](FitConfig c) {
        try {
            c.validate();
        } catch (const ConfigError& e) {
            return e.field();
        }
        return std::string();
    };
    FitConfig c;
    CHECK(field(c).empty());
    c = {};
    c.pirls_tol = 0;
    CHECK(field(c) == "pirls_tol");
    c = {};
    c.pirls_max_iter = 0;
    CHECK(field(c) == "pirls_max_iter");
    c = {};
    c.outer_tol = -1;
    CHECK(field(c) == "outer_tol");
    c = {};
    c.outer_max_eval = 0;
    CHECK(field(c) == "outer_max_eval");
    c = {};
    c.n_restarts = -1;
    CHECK(field(c) == "n_restarts");
    c = {};
    c.singular_tol = 0;
    CHECK(field(c) == "singular_tol");
    c = {};
    c.param_bound = 0;
    CHECK(field(c) == "param_bound");
    c = {};
    c.outer_tol = 0;
    CHECK_THROWS_AS(fit(small_sim(1), ModelSpec{}, c), ConfigError);
}

TEST_CASE("a tiny evaluation budget is reported, not hidden") {
    FitConfig c;
    c.outer_max_eval = 5;
    c.n_restarts = 0;
    const FitResult f = fit(small_sim(7), ModelSpec{}, c);
    CHECK_FALSE(f.converged);
    CHECK_FALSE(f.notes.empty());
}

TEST_CASE("extract_blups from stored ids equals extraction from the design") {
    const Dataset d = small_sim(8);
    const DesignMatrices m = build_design(d, ModelSpec{});
    const FitResult f = fit(m);
    const auto a = extract_blups(f, m), b = extract_blups(f);
    REQUIRE(a.students.size() == b.students.size());
    for (std::size_t i = 0; i < a.students.size(); ++i) {
        CHECK(a.students[i].id == b.students[i].id);
        CHECK(a.students[i].theta == b.students[i].theta);
        CHECK(a.students[i].delta == b.students[i].delta);
    }
    FitResult broken = f;
    broken.modes.conservativeResize(broken.modes.size() - 1);
    CHECK_THROWS_AS(extract_blups(broken), Error);
}

}  // TEST_SUITE
