#include "lcsens/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lcsens/errors.hpp"
#include "lcsens/refit.hpp"
#include "lcsens/rng.hpp"

namespace lcsens {

void SimConfig::validate() const {
    if (n_students < 1) throw ConfigError("n_students", "must be >= 1");
    if (n_kcs < 1) throw ConfigError("n_kcs", "must be >= 1");
    if (kcs_per_student < 0 || kcs_per_student > n_kcs) throw ConfigError("kcs_per_student", "must lie in [0, n_kcs]");
    if (max_length < 1) throw ConfigError("max_length", "must be >= 1");
    const auto nonneg = [](double v, const char* field) {
        if (!(v >= 0.0)) throw ConfigError(field, "must be >= 0");
    };
    const auto corr = [](double v, const char* field) {
        if (!(std::abs(v) <= 1.0)) throw ConfigError(field, "must lie in [-1, 1]");
    };
    if (family == CurveFamily::LINEAR_LOGODDS) {
        nonneg(linear.sd_theta, "sd_theta");
        nonneg(linear.sd_delta, "sd_delta");
        nonneg(linear.sd_beta, "sd_beta");
        nonneg(linear.sd_gamma, "sd_gamma");
        corr(linear.corr_student, "corr_student");
        corr(linear.corr_kc, "corr_kc");
    } else {
        nonneg(exp.eta0_sd, "eta0_sd");
        nonneg(exp.eta_inf_sd, "eta_inf_sd");
        nonneg(exp.log_rate_sd, "log_rate_sd");
        nonneg(exp.kc_eta_sd, "kc_eta_sd");
        nonneg(exp.kc_log_rate_sd, "kc_log_rate_sd");
        nonneg(exp.wheelspin_rate, "wheelspin_rate");
        if (!(exp.wheelspin_fraction >= 0.0 && exp.wheelspin_fraction <= 1.0))
            throw ConfigError("wheelspin_fraction", "must lie in [0, 1]");
    }
    switch (stopping.kind) {
        case StopKind::FIXED:
            if (stopping.length < 1 || stopping.length > max_length)
                throw ConfigError("stopping.length", "must lie in [1, max_length]");
            break;
        case StopKind::MASTERY_EXIT:
            if (stopping.consecutive_correct < 1) throw ConfigError("stopping.consecutive_correct", "must be >= 1");
            if (!(stopping.attrition >= 0.0 && stopping.attrition < 1.0))
                throw ConfigError("stopping.attrition", "must lie in [0, 1)");
            break;
        case StopKind::GEOMETRIC:
            if (!(stopping.continue_prob > 0.0 && stopping.continue_prob < 1.0))
                throw ConfigError("stopping.continue_prob", "must lie in (0, 1)");
            break;
    }
}

double exp_approach_logodds(double eta0, double eta_inf, double rate, double t) {
    return eta_inf - (eta_inf - eta0) * std::exp(-rate * t);
}

namespace {

std::string padded(char prefix, int i, int n) {
    std::string digits = std::to_string(i);
    const std::size_t width = std::to_string(std::max(n - 1, 0)).size();
    return std::string(1, prefix) + std::string(width - std::min(width, digits.size()), '0') + digits;
}

// (a, b) with SDs (sa, sb) and correlation rho.
std::pair<double, double> bivariate(std::mt19937_64& gen, double sa, double sb, double rho) {
    std::normal_distribution<double> z;
    const double z1 = z(gen), z2 = z(gen);
    return {sa * z1, sb * (rho * z1 + std::sqrt(std::max(0.0, 1.0 - rho * rho)) * z2)};
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Simulation simulate(const SimConfig& cfg) {
    cfg.validate();
    const bool linear = cfg.family == CurveFamily::LINEAR_LOGODDS;

    Simulation sim;
    sim.truth.config = cfg;
    for (int s = 0; s < cfg.n_students; ++s) {
        SimTruth::Student st;
        st.id = padded('s', s, cfg.n_students);
        auto gen = substream(cfg.seed, "student", st.id);
        if (linear) {
            std::tie(st.intercept, st.slope) =
                bivariate(gen, cfg.linear.sd_theta, cfg.linear.sd_delta, cfg.linear.corr_student);
        } else {
            std::normal_distribution<double> z;
            std::uniform_real_distribution<double> unif;
            st.intercept = cfg.exp.eta0_mean + cfg.exp.eta0_sd * z(gen);
            st.eta_inf = cfg.exp.eta_inf_mean + cfg.exp.eta_inf_sd * z(gen);
            const double log_rate = cfg.exp.log_rate_mean + cfg.exp.log_rate_sd * z(gen);
            st.wheelspinner = unif(gen) < cfg.exp.wheelspin_fraction;
            st.slope = st.wheelspinner ? cfg.exp.wheelspin_rate : std::exp(log_rate);
        }
        sim.truth.students.push_back(std::move(st));
    }
    for (int k = 0; k < cfg.n_kcs; ++k) {
        SimTruth::Kc kc;
        kc.id = padded('k', k, cfg.n_kcs);
        auto gen = substream(cfg.seed, "kc", kc.id);
        if (linear) {
            std::tie(kc.intercept, kc.slope) = bivariate(gen, cfg.linear.sd_beta, cfg.linear.sd_gamma, cfg.linear.corr_kc);
        } else {
            std::normal_distribution<double> z;
            kc.intercept = cfg.exp.kc_eta_sd * z(gen);
            kc.slope = cfg.exp.kc_log_rate_sd * z(gen);
        }
        sim.truth.kcs.push_back(std::move(kc));
    }

    std::vector<ObservationRow> rows;
    for (const auto& st : sim.truth.students) {
        std::vector<int> practiced(static_cast<std::size_t>(cfg.n_kcs));
        std::iota(practiced.begin(), practiced.end(), 0);
        if (cfg.kcs_per_student > 0) {
            auto gen = substream(cfg.seed, "assign", st.id);
            std::shuffle(practiced.begin(), practiced.end(), gen);
            practiced.resize(static_cast<std::size_t>(cfg.kcs_per_student));
            std::sort(practiced.begin(), practiced.end());
        }
        std::int64_t order = 0;
        for (int k : practiced) {
            const auto& kc = sim.truth.kcs[static_cast<std::size_t>(k)];
            auto gen = substream(cfg.seed, "pair", st.id, kc.id);
            std::uniform_real_distribution<double> unif;

            auto logodds = [&](int t) {
                if (linear)
                    return cfg.linear.theta + st.intercept + kc.intercept +
                           (cfg.linear.delta + st.slope + kc.slope) * t;
                return exp_approach_logodds(st.intercept + kc.intercept, st.eta_inf + kc.intercept,
                                            st.slope * std::exp(kc.slope), t);
            };

            int t = 0, streak = 0;
            while (true) {
                const int y = unif(gen) < logistic(logodds(t)) ? 1 : 0;
                rows.push_back(ObservationRow{st.id, kc.id, order++, t, y});
                ++t;
                streak = y ? streak + 1 : 0;
                if (t >= cfg.max_length) break;
                if (cfg.stopping.kind == StopKind::FIXED && t >= cfg.stopping.length) break;
                if (cfg.stopping.kind == StopKind::MASTERY_EXIT) {
                    if (streak >= cfg.stopping.consecutive_correct) break;
                    if (cfg.stopping.attrition > 0.0 && unif(gen) < cfg.stopping.attrition) break;
                }
                if (cfg.stopping.kind == StopKind::GEOMETRIC && !(unif(gen) < cfg.stopping.continue_prob)) break;
            }
            sim.truth.pairs.push_back({st.id, kc.id, t});
        }
    }
    std::map<std::string, std::string> prov{{"source", "simulate"},
                                            {"seed", std::to_string(cfg.seed)},
                                            {"family", linear ? "LINEAR_LOGODDS" : "EXP_APPROACH"}};
    sim.data = make_dataset(std::move(rows), cfg.name, std::move(prov));
    return sim;
}

SignatureReport signature_experiment(const SimConfig& cfg, int depth, const ModelSpec& spec, const FitConfig& fitcfg,
                                     const SignatureThresholds& thresholds) {
    const Simulation sim = simulate(cfg);
    SignatureReport rep;
    rep.dataset = cfg.name;
    rep.depth = depth;
    rep.thresholds = thresholds;

    RefitPlan plan;
    plan.depth_or_threshold = depth;
    plan.kind = RefitKind::TRUNCATE;
    const ProtocolResult trunc = run_protocol(sim.data, plan, spec, fitcfg);
    rep.truncation_eligible = trunc.eligibility.eligible;
    rep.truncation_reason = to_string(trunc.eligibility.reason);
    if (trunc.fits.count("full") && trunc.fits.count("truncated")) {
        rep.truncation = compare(trunc.fits.at("full"), trunc.fits.at("truncated"), 0.01, cfg.name, "full", "truncated");
        auto pct = [&](const std::string& p) {
            for (const auto& r : rep.truncation)
                if (r.parameter == p) return r.pct_change.value_or(std::nan(""));
            return std::nan("");
        };
        rep.pct_sd_theta = pct("sd_theta");
        rep.pct_sd_delta = pct("sd_delta");
        rep.pct_delta = pct("delta");
        rep.truncation_pass = rep.pct_sd_delta > thresholds.min_pct_sd_delta &&
                              std::abs(rep.pct_sd_theta) < thresholds.max_abs_pct_sd_theta &&
                              rep.pct_delta > thresholds.min_pct_delta;
    }

    plan.kind = RefitKind::STRATIFY;
    const ProtocolResult strat = run_protocol(sim.data, plan, spec, fitcfg);
    rep.stratify_eligible = strat.eligibility.eligible;
    rep.stratify_reason = to_string(strat.eligibility.reason);
    if (strat.fits.count("short") && strat.fits.count("long")) {
        const auto& s = strat.fits.at("short");
        const auto& l = strat.fits.at("long");
        rep.stratified = compare(l, s, 0.01, cfg.name, "long", "short");
        rep.short_sd_delta = s.student_block.sd_slope();
        rep.long_sd_delta = l.student_block.sd_slope();
        rep.short_delta = s.fixed.delta;
        rep.long_delta = l.fixed.delta;
        rep.stratify_pass = rep.short_sd_delta > rep.long_sd_delta && rep.short_delta > rep.long_delta;
    }
    return rep;
}

}  // namespace lcsens
