#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "lcsens/errors.hpp"
#include "lcsens/serialize.hpp"
#include "lcsens/simulate.hpp"

using namespace lcsens;

namespace {

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

FitResult awkward_fit() {
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    FitResult f;
    f.spec = {Variant::IAFM, false};
    f.fixed = {0.1 + 0.2, -1.0 / 3.0};
    f.student_block = {2, 0.6000000000000001, 0.0, 5e-324};
    f.kc_block = {2, 1e-300, -0.0, 123456789.123456789};
    for (int s = 0; s < 7; ++s) f.blups.students.push_back({"sté" + std::to_string(s), u(gen), u(gen) * 1e-9});
    for (int k = 0; k < 3; ++k) f.blups.kcs.push_back({"k \"" + std::to_string(k), u(gen), u(gen)});
    f.modes.resize(20);
    for (Eigen::Index i = 0; i < f.modes.size(); ++i) f.modes(i) = u(gen) * std::pow(10.0, static_cast<double>(i - 10));
    f.deviance = 1234.5678901234567;
    f.n_params = 6;
    f.aic = f.deviance + 2.0 * f.n_params;
    f.converged = false;
    f.singular = true;
    f.n_obs = 1000;
    f.n_students = 7;
    f.n_kcs = 3;
    f.n_evaluations = 4321;
    f.notes = {"one", "two, with comma"};
    f.config_echo.outer_tol = 1e-7;
    f.config_echo.restart_seed = 18446744073709551615ULL;
    f.config_echo.init_fixed = FixedEffects{0.25, 0.01};
    f.config_echo.fixed_covariance = CovarianceParams{{2, 0.5, 0.1, 0.05}, {2, 0.4, 0.0, 0.02}};
    return f;
}

}  // namespace

TEST_SUITE("serialize") {

TEST_CASE("fit documents round-trip bit-exactly") {
    const FitResult f = awkward_fit();
    const std::string text = dump(to_json(f));
    const FitResult g = fit_result_from_json(json::parse(text));
    CHECK(dump(to_json(g)) == text);
    CHECK(g.spec == f.spec);
    CHECK(same_bits(g.fixed.theta, f.fixed.theta));
    CHECK(same_bits(g.fixed.delta, f.fixed.delta));
    CHECK(same_bits(g.student_block.l22, f.student_block.l22));
    CHECK(same_bits(g.kc_block.l21, f.kc_block.l21));
    CHECK(same_bits(g.kc_block.l22, f.kc_block.l22));
    REQUIRE(g.modes.size() == f.modes.size());
    for (Eigen::Index i = 0; i < f.modes.size(); ++i) CHECK(same_bits(g.modes(i), f.modes(i)));
    for (std::size_t i = 0; i < f.blups.students.size(); ++i) {
        CHECK(g.blups.students[i].id == f.blups.students[i].id);
        CHECK(same_bits(g.blups.students[i].delta, f.blups.students[i].delta));
    }
    CHECK(g.notes == f.notes);
    CHECK(g.config_echo.restart_seed == f.config_echo.restart_seed);
    CHECK(g.config_echo.init_fixed == f.config_echo.init_fixed);
    CHECK(g.config_echo.fixed_covariance == f.config_echo.fixed_covariance);
    CHECK_FALSE(g.config_echo.init_covariance);
    CHECK(same_bits(g.config_echo.outer_tol, 1e-7));
}

TEST_CASE("a real fit round-trips") {
    SimConfig c;
    c.n_students = 30;
    c.n_kcs = 5;
    c.stopping.length = 6;
    const FitResult f = fit(simulate(c).data, ModelSpec{});
    const std::string text = dump(to_json(f));
    CHECK(dump(to_json(fit_result_from_json(json::parse(text)))) == text);
    const json j = json::parse(text);
    CHECK(j["schema"] == kFitSchema);
    CHECK(j["model"] == "iafm");
    CHECK(j["student"]["sd_slope"].get<double>() == f.student_block.sd_slope());
    CHECK(j["blups"]["students"].size() == 30);
    CHECK(text.back() == '\n');
}

TEST_CASE("malformed fit documents") {
    json j = to_json(awkward_fit());
    json bad = j;
    bad["schema"] = "lcsens.fit/0";
    CHECK_THROWS_AS(fit_result_from_json(bad), FormatError);
    bad = j;
    bad.erase("deviance");
    CHECK_THROWS_AS(fit_result_from_json(bad), FormatError);
    bad = j;
    bad["n_obs"] = "many";
    CHECK_THROWS_AS(fit_result_from_json(bad), FormatError);
    bad = j;
    bad["model"] = "pfa";
    CHECK_THROWS_AS(fit_result_from_json(bad), ConfigError);
}

TEST_CASE("fit config documents") {
    FitConfig c;
    c.n_restarts = 4;
    c.init_covariance = CovarianceParams{{1, 0.7, 0, 0}, {2, 0.3, 0.01, 0.02}};
    const FitConfig d = fit_config_from_json(to_json(c));
    CHECK(d.n_restarts == 4);
    CHECK(d.init_covariance == c.init_covariance);
    // Unknown keys are absent keys; present keys must parse.
    const FitConfig e = fit_config_from_json(json::parse(R"({"outer_tol": 1e-9})"));
    CHECK(e.outer_tol == 1e-9);
    CHECK(e.pirls_max_iter == FitConfig{}.pirls_max_iter);
    try {
        fit_config_from_json(json::parse(R"({"n_restarts": "two"})"));
        FAIL("expected ConfigError");
    } catch (const ConfigError& err) {
        CHECK(err.field() == "n_restarts");
    }
}

TEST_CASE("simulation configs round-trip and validate") {
    SimConfig c;
    c.family = CurveFamily::EXP_APPROACH;
    c.exp.wheelspin_fraction = 0.35;
    c.exp.kc_log_rate_sd = 0.45;
    c.stopping.kind = StopKind::MASTERY_EXIT;
    c.stopping.consecutive_correct = 4;
    c.stopping.attrition = 0.02;
    c.kcs_per_student = 3;
    c.seed = 77;
    const SimConfig d = sim_config_from_json(to_json(c));
    CHECK(dump(to_json(d)) == dump(to_json(c)));
    CHECK(d.exp.kc_log_rate_sd == 0.45);
    CHECK(d.stopping.attrition == 0.02);
    try {
        sim_config_from_json(json::parse(R"({"family": "EXP_APPROACH", "population": {"wheelspin_fraction": 1.5}})"));
        FAIL("expected ConfigError");
    } catch (const ConfigError& err) {
        CHECK(err.field() == "wheelspin_fraction");
    }
    CHECK_THROWS_AS(sim_config_from_json(json::parse(R"({"family": "POWER_LAW"})")), ConfigError);
}

TEST_CASE("truth and summaries serialize with sentinels") {
    SimConfig c;
    c.n_students = 3;
    c.n_kcs = 2;
    const json t = to_json(simulate(c).truth);
    CHECK(t["students"].size() == 3);
    CHECK(t["students"][0].contains("theta_i"));
    CHECK(t["pairs"].size() == 6);
    FitSummary s;
    s.sd_delta = 0.1;
    const json j = to_json(s);
    CHECK(j["mastery_typical"] == kNotReached);
    CHECK(j["shrinkage_delta"] == kUndefined);
    CHECK(j["sd_delta"] == 0.1);
}

TEST_CASE("file helpers report missing paths") {
    CHECK_THROWS_AS(read_json_file("/nonexistent/dir/x.json"), FormatError);
    CHECK_THROWS_AS(write_text_file("/nonexistent/dir/x.json", "{}"), FormatError);
    const auto path = std::filesystem::temp_directory_path() / "lcsens_serialize_test.json";
    write_text_file(path, "{\"a\": 1}\n");
    CHECK(read_json_file(path)["a"] == 1);
    write_text_file(path, "{not json");
    CHECK_THROWS_AS(read_json_file(path), FormatError);
    std::filesystem::remove(path);
}

}  // TEST_SUITE
