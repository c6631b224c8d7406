#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lcsens/corpus.hpp"
#include "lcsens/fitter.hpp"
#include "lcsens/summary.hpp"

namespace lcsens {

enum class CurveFamily { LINEAR_LOGODDS, EXP_APPROACH };
enum class StopKind { FIXED, MASTERY_EXIT, GEOMETRIC };

struct StoppingRule {
    StopKind kind = StopKind::FIXED;
    int length = 15;               // FIXED
    int consecutive_correct = 3;   // MASTERY_EXIT; capped by max_length
    double attrition = 0.0;        // MASTERY_EXIT; per-attempt exit independent of outcomes
    double continue_prob = 0.9;    // GEOMETRIC
};

/// Population of the linear log-odds (iAFM) generative model.
struct LinearPopulation {
    double theta = 0.6;
    double delta = 0.09;
    double sd_theta = 0.6;
    double sd_delta = 0.10;
    double corr_student = 0.0;
    double sd_beta = 0.5;
    double sd_gamma = 0.05;
    double corr_kc = 0.0;
};

/// Exponential approach on the log-odds scale,
/// eta(t) = eta_inf - (eta_inf - eta0) exp(-r t), with student-level eta0,
/// eta_inf and lognormal rate r; KCs shift both levels and scale the rate.
struct ExpPopulation {
    double eta0_mean = -0.3;
    double eta0_sd = 0.6;
    double eta_inf_mean = 2.5;
    double eta_inf_sd = 0.4;
    double log_rate_mean = -1.6;
    double log_rate_sd = 0.5;
    double wheelspin_fraction = 0.2;
    double wheelspin_rate = 0.005;
    double kc_eta_sd = 0.4;
    double kc_log_rate_sd = 0.3;
};

struct SimConfig {
    std::string name = "sim";
    CurveFamily family = CurveFamily::LINEAR_LOGODDS;
    int n_students = 200;
    int n_kcs = 20;
    int kcs_per_student = 0;  // 0 = every student practices every KC
    LinearPopulation linear;
    ExpPopulation exp;
    StoppingRule stopping;
    int max_length = 60;
    std::uint64_t seed = 1;

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

struct SimTruth {
    struct Student {
        std::string id;
        double intercept = 0.0;  // LINEAR: theta_i; EXP: eta0_i
        double slope = 0.0;      // LINEAR: delta_i; EXP: rate r_i
        double eta_inf = 0.0;    // EXP only
        bool wheelspinner = false;
    };
    struct Kc {
        std::string id;
        double intercept = 0.0;  // LINEAR: beta_k; EXP: level shift
        double slope = 0.0;      // LINEAR: gamma_k; EXP: log rate multiplier
    };
    struct Pair {
        std::string student_id;
        std::string kc_id;
        int length = 0;
    };
    SimConfig config;
    std::vector<Student> students;
    std::vector<Kc> kcs;
    std::vector<Pair> pairs;
};

struct Simulation {
    Dataset data;
    SimTruth truth;
};

/// Deterministic per seed; every student, KC and pair draws from its own
/// substream.
Simulation simulate(const SimConfig& cfg);

/// Log-odds of the exponential-approach curve at opportunity t.
double exp_approach_logodds(double eta0, double eta_inf, double rate, double t);

struct SignatureThresholds {
    double min_pct_sd_delta = 40.0;       // truncation: %Δσ̂_δ above this
    double max_abs_pct_sd_theta = 15.0;   // truncation: |%Δσ̂_θ| below this
    double min_pct_delta = 0.0;           // truncation: %Δδ̂ above this
};

struct SignatureReport {
    std::string dataset;
    int depth = 10;
    SignatureThresholds thresholds;
    std::vector<ComparisonRow> truncation;   // full -> truncated
    std::vector<ComparisonRow> stratified;   // long -> short
    bool truncation_eligible = false;
    bool stratify_eligible = false;
    std::string truncation_reason;
    std::string stratify_reason;
    bool truncation_pass = false;            // all three directional checks
    bool stratify_pass = false;              // short σ̂_δ > long σ̂_δ and short δ̂ > long δ̂
    double pct_sd_theta = 0.0, pct_sd_delta = 0.0, pct_delta = 0.0;
    double short_sd_delta = 0.0, long_sd_delta = 0.0, short_delta = 0.0, long_delta = 0.0;
};

/// Simulates, runs truncation and stratification at `depth`, and scores the
/// directional signature.
SignatureReport signature_experiment(const SimConfig& cfg, int depth, const ModelSpec& spec,
                                     const FitConfig& fitcfg, const SignatureThresholds& thresholds = {});

}  // namespace lcsens
