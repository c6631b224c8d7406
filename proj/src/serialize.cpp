#include "lcsens/serialize.hpp"

#include <fstream>
#include <sstream>

#include "lcsens/errors.hpp"

namespace lcsens {

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(key, std::string("bad value: ") + e.what());
    }
}

json block_json(const CovarianceBlock& b) {
    return json{{"dim", b.dim},
                {"l11", b.l11},
                {"l21", b.l21},
                {"l22", b.l22},
                {"sd_intercept", b.sd_intercept()},
                {"sd_slope", b.sd_slope()},
                {"corr", b.correlation()}};
}

CovarianceBlock block_from_json(const json& j) {
    CovarianceBlock b;
    b.dim = j.at("dim").get<int>();
    b.l11 = j.at("l11").get<double>();
    b.l21 = j.at("l21").get<double>();
    b.l22 = j.at("l22").get<double>();
    return b;
}

json fixed_json(const FixedEffects& f) { return json{{"theta", f.theta}, {"delta", f.delta}}; }
FixedEffects fixed_from_json(const json& j) { return {j.at("theta").get<double>(), j.at("delta").get<double>()}; }

json cov_json(const CovarianceParams& c) { return json{{"student", block_json(c.student)}, {"kc", block_json(c.kc)}}; }
CovarianceParams cov_from_json(const json& j) {
    return {block_from_json(j.at("student")), block_from_json(j.at("kc"))};
}

json opt_json(const std::optional<double>& v, const char* sentinel) {
    return v ? json(*v) : json(sentinel);
}

}  // namespace

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json to_json(const FitConfig& c) {
    json j{{"pirls_tol", c.pirls_tol},       {"pirls_max_iter", c.pirls_max_iter}, {"outer_tol", c.outer_tol},
           {"outer_max_eval", c.outer_max_eval}, {"n_restarts", c.n_restarts},       {"singular_tol", c.singular_tol},
           {"restart_seed", c.restart_seed}, {"param_bound", c.param_bound}};
    if (c.init_fixed) j["init_fixed"] = fixed_json(*c.init_fixed);
    if (c.init_covariance) j["init_covariance"] = cov_json(*c.init_covariance);
    if (c.fixed_covariance) j["fixed_covariance"] = cov_json(*c.fixed_covariance);
    return j;
}

FitConfig fit_config_from_json(const json& j) {
    FitConfig c;
    read_opt(j, "pirls_tol", c.pirls_tol);
    read_opt(j, "pirls_max_iter", c.pirls_max_iter);
    read_opt(j, "outer_tol", c.outer_tol);
    read_opt(j, "outer_max_eval", c.outer_max_eval);
    read_opt(j, "n_restarts", c.n_restarts);
    read_opt(j, "singular_tol", c.singular_tol);
    read_opt(j, "restart_seed", c.restart_seed);
    read_opt(j, "param_bound", c.param_bound);
    try {
        if (j.contains("init_fixed")) c.init_fixed = fixed_from_json(j.at("init_fixed"));
        if (j.contains("init_covariance")) c.init_covariance = cov_from_json(j.at("init_covariance"));
        if (j.contains("fixed_covariance")) c.fixed_covariance = cov_from_json(j.at("fixed_covariance"));
    } catch (const json::exception& e) {
        throw ConfigError("init", e.what());
    }
    c.validate();
    return c;
}

json to_json(const FitResult& f) {
    json students = json::array(), kcs = json::array();
    for (const auto& s : f.blups.students) students.push_back({{"id", s.id}, {"theta", s.theta}, {"delta", s.delta}});
    for (const auto& k : f.blups.kcs) kcs.push_back({{"id", k.id}, {"beta", k.beta}, {"gamma", k.gamma}});
    json modes = json::array();
    for (Eigen::Index i = 0; i < f.modes.size(); ++i) modes.push_back(f.modes(i));
    return json{{"schema", kFitSchema},
                {"model", to_string(f.spec.variant)},
                {"correlated", f.spec.correlated},
                {"fixed", fixed_json(f.fixed)},
                {"student", block_json(f.student_block)},
                {"kc", block_json(f.kc_block)},
                {"blups", {{"students", students}, {"kcs", kcs}}},
                {"modes", modes},
                {"deviance", f.deviance},
                {"aic", f.aic},
                {"n_params", f.n_params},
                {"converged", f.converged},
                {"singular", f.singular},
                {"n_obs", f.n_obs},
                {"n_students", f.n_students},
                {"n_kcs", f.n_kcs},
                {"n_evaluations", f.n_evaluations},
                {"notes", f.notes},
                {"config", to_json(f.config_echo)}};
}

FitResult fit_result_from_json(const json& j) {
    try {
        if (j.at("schema").get<std::string>() != kFitSchema)
            throw FormatError("unsupported fit schema '" + j.at("schema").get<std::string>() + "'");
        FitResult f;
        f.spec.variant = variant_from_string(j.at("model").get<std::string>());
        f.spec.correlated = j.at("correlated").get<bool>();
        f.fixed = fixed_from_json(j.at("fixed"));
        f.student_block = block_from_json(j.at("student"));
        f.kc_block = block_from_json(j.at("kc"));
        f.blups.has_student_slope = f.spec.variant == Variant::IAFM;
        for (const auto& s : j.at("blups").at("students"))
            f.blups.students.push_back({s.at("id").get<std::string>(), s.at("theta").get<double>(), s.at("delta").get<double>()});
        for (const auto& k : j.at("blups").at("kcs"))
            f.blups.kcs.push_back({k.at("id").get<std::string>(), k.at("beta").get<double>(), k.at("gamma").get<double>()});
        const auto& modes = j.at("modes");
        f.modes.resize(static_cast<Eigen::Index>(modes.size()));
        for (std::size_t i = 0; i < modes.size(); ++i) f.modes(static_cast<Eigen::Index>(i)) = modes[i].get<double>();
        f.deviance = j.at("deviance").get<double>();
        f.aic = j.at("aic").get<double>();
        f.n_params = j.at("n_params").get<int>();
        f.converged = j.at("converged").get<bool>();
        f.singular = j.at("singular").get<bool>();
        f.n_obs = j.at("n_obs").get<std::size_t>();
        f.n_students = j.at("n_students").get<std::size_t>();
        f.n_kcs = j.at("n_kcs").get<std::size_t>();
        f.n_evaluations = j.at("n_evaluations").get<int>();
        f.notes = j.at("notes").get<std::vector<std::string>>();
        f.config_echo = fit_config_from_json(j.at("config"));
        return f;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed fit document: ") + e.what());
    }
}

json to_json(const EligibilityReport& e) {
    return json{{"dataset", e.dataset}, {"eligible", e.eligible}, {"reason", to_string(e.reason)}, {"detail", e.detail}};
}

namespace {

const char* family_name(CurveFamily f) { return f == CurveFamily::LINEAR_LOGODDS ? "LINEAR_LOGODDS" : "EXP_APPROACH"; }

const char* stop_name(StopKind k) {
    switch (k) {
        case StopKind::FIXED: return "FIXED";
        case StopKind::MASTERY_EXIT: return "MASTERY_EXIT";
        case StopKind::GEOMETRIC: return "GEOMETRIC";
    }
    return "?";
}

}  // namespace

json to_json(const SimConfig& c) {
    json pop;
    if (c.family == CurveFamily::LINEAR_LOGODDS) {
        const auto& p = c.linear;
        pop = {{"theta", p.theta},     {"delta", p.delta},   {"sd_theta", p.sd_theta}, {"sd_delta", p.sd_delta},
               {"corr_student", p.corr_student}, {"sd_beta", p.sd_beta}, {"sd_gamma", p.sd_gamma}, {"corr_kc", p.corr_kc}};
    } else {
        const auto& p = c.exp;
        pop = {{"eta0_mean", p.eta0_mean},
               {"eta0_sd", p.eta0_sd},
               {"eta_inf_mean", p.eta_inf_mean},
               {"eta_inf_sd", p.eta_inf_sd},
               {"log_rate_mean", p.log_rate_mean},
               {"log_rate_sd", p.log_rate_sd},
               {"wheelspin_fraction", p.wheelspin_fraction},
               {"wheelspin_rate", p.wheelspin_rate},
               {"kc_eta_sd", p.kc_eta_sd},
               {"kc_log_rate_sd", p.kc_log_rate_sd}};
    }
    return json{{"name", c.name},
                {"family", family_name(c.family)},
                {"n_students", c.n_students},
                {"n_kcs", c.n_kcs},
                {"kcs_per_student", c.kcs_per_student},
                {"population", pop},
                {"stopping",
                 {{"kind", stop_name(c.stopping.kind)},
                  {"length", c.stopping.length},
                  {"consecutive_correct", c.stopping.consecutive_correct},
                  {"attrition", c.stopping.attrition},
                  {"continue_prob", c.stopping.continue_prob}}},
                {"max_length", c.max_length},
                {"seed", c.seed}};
}

SimConfig sim_config_from_json(const json& j) {
    SimConfig c;
    read_opt(j, "name", c.name);
    std::string family = "LINEAR_LOGODDS";
    read_opt(j, "family", family);
    if (family == "LINEAR_LOGODDS") c.family = CurveFamily::LINEAR_LOGODDS;
    else if (family == "EXP_APPROACH") c.family = CurveFamily::EXP_APPROACH;
    else throw ConfigError("family", "expected LINEAR_LOGODDS or EXP_APPROACH, got '" + family + "'");
    read_opt(j, "n_students", c.n_students);
    read_opt(j, "n_kcs", c.n_kcs);
    read_opt(j, "kcs_per_student", c.kcs_per_student);
    read_opt(j, "max_length", c.max_length);
    read_opt(j, "seed", c.seed);
    if (j.contains("population")) {
        const auto& p = j.at("population");
        if (c.family == CurveFamily::LINEAR_LOGODDS) {
            auto& l = c.linear;
            read_opt(p, "theta", l.theta);
            read_opt(p, "delta", l.delta);
            read_opt(p, "sd_theta", l.sd_theta);
            read_opt(p, "sd_delta", l.sd_delta);
            read_opt(p, "corr_student", l.corr_student);
            read_opt(p, "sd_beta", l.sd_beta);
            read_opt(p, "sd_gamma", l.sd_gamma);
            read_opt(p, "corr_kc", l.corr_kc);
        } else {
            auto& e = c.exp;
            read_opt(p, "eta0_mean", e.eta0_mean);
            read_opt(p, "eta0_sd", e.eta0_sd);
            read_opt(p, "eta_inf_mean", e.eta_inf_mean);
            read_opt(p, "eta_inf_sd", e.eta_inf_sd);
            read_opt(p, "log_rate_mean", e.log_rate_mean);
            read_opt(p, "log_rate_sd", e.log_rate_sd);
            read_opt(p, "wheelspin_fraction", e.wheelspin_fraction);
            read_opt(p, "wheelspin_rate", e.wheelspin_rate);
            read_opt(p, "kc_eta_sd", e.kc_eta_sd);
            read_opt(p, "kc_log_rate_sd", e.kc_log_rate_sd);
        }
    }
    if (j.contains("stopping")) {
        const auto& s = j.at("stopping");
        std::string kind = "FIXED";
        read_opt(s, "kind", kind);
        if (kind == "FIXED") c.stopping.kind = StopKind::FIXED;
        else if (kind == "MASTERY_EXIT") c.stopping.kind = StopKind::MASTERY_EXIT;
        else if (kind == "GEOMETRIC") c.stopping.kind = StopKind::GEOMETRIC;
        else throw ConfigError("stopping.kind", "expected FIXED, MASTERY_EXIT or GEOMETRIC, got '" + kind + "'");
        read_opt(s, "length", c.stopping.length);
        read_opt(s, "consecutive_correct", c.stopping.consecutive_correct);
        read_opt(s, "attrition", c.stopping.attrition);
        read_opt(s, "continue_prob", c.stopping.continue_prob);
    }
    c.validate();
    return c;
}

json to_json(const SimTruth& t) {
    const bool linear = t.config.family == CurveFamily::LINEAR_LOGODDS;
    json students = json::array(), kcs = json::array(), pairs = json::array();
    for (const auto& s : t.students) {
        if (linear)
            students.push_back({{"id", s.id}, {"theta_i", s.intercept}, {"delta_i", s.slope}});
        else
            students.push_back({{"id", s.id},
                                {"eta0", s.intercept},
                                {"eta_inf", s.eta_inf},
                                {"rate", s.slope},
                                {"wheelspinner", s.wheelspinner}});
    }
    for (const auto& k : t.kcs) {
        if (linear)
            kcs.push_back({{"id", k.id}, {"beta_k", k.intercept}, {"gamma_k", k.slope}});
        else
            kcs.push_back({{"id", k.id}, {"level_shift", k.intercept}, {"log_rate_multiplier", k.slope}});
    }
    for (const auto& p : t.pairs) pairs.push_back({{"student", p.student_id}, {"kc", p.kc_id}, {"length", p.length}});
    return json{{"config", to_json(t.config)}, {"students", students}, {"kcs", kcs}, {"pairs", pairs}};
}

namespace {

json rows_json(const std::vector<ComparisonRow>& rows) {
    json a = json::array();
    for (const auto& r : rows)
        a.push_back({{"dataset", r.dataset},
                     {"condition_a", r.condition_a},
                     {"condition_b", r.condition_b},
                     {"parameter", r.parameter},
                     {"value_a", r.value_a},
                     {"value_b", r.value_b},
                     {"pct_change", opt_json(r.pct_change, kBaselineNearZero)},
                     {"abs_change", r.abs_change}});
    return a;
}

}  // namespace

json to_json(const SignatureReport& r) {
    return json{{"dataset", r.dataset},
                {"depth", r.depth},
                {"thresholds",
                 {{"min_pct_sd_delta", r.thresholds.min_pct_sd_delta},
                  {"max_abs_pct_sd_theta", r.thresholds.max_abs_pct_sd_theta},
                  {"min_pct_delta", r.thresholds.min_pct_delta}}},
                {"truncation",
                 {{"eligible", r.truncation_eligible},
                  {"reason", r.truncation_reason},
                  {"pct_sd_theta", r.pct_sd_theta},
                  {"pct_sd_delta", r.pct_sd_delta},
                  {"pct_delta", r.pct_delta},
                  {"pass", r.truncation_pass},
                  {"rows", rows_json(r.truncation)}}},
                {"stratify",
                 {{"eligible", r.stratify_eligible},
                  {"reason", r.stratify_reason},
                  {"short_sd_delta", r.short_sd_delta},
                  {"long_sd_delta", r.long_sd_delta},
                  {"short_delta", r.short_delta},
                  {"long_delta", r.long_delta},
                  {"pass", r.stratify_pass},
                  {"rows", rows_json(r.stratified)}}}};
}

json to_json(const FitSummary& s) {
    json j{{"dataset", s.dataset}};
    for (const auto& [name, v] : summary_fields(s)) j[name] = opt_json(v, name.rfind("mastery", 0) == 0 ? kNotReached : kUndefined);
    return j;
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write '" + path.string() + "'");
    out << text;
}

}  // namespace lcsens
