#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lcsens/corpus.hpp"
#include "lcsens/design.hpp"
#include "lcsens/laplace.hpp"
#include "lcsens/model.hpp"

namespace lcsens {

struct FitConfig {
    double pirls_tol = 1e-8;
    int pirls_max_iter = 200;
    double outer_tol = 1e-6;  // relative deviance spread of the simplex
    int outer_max_eval = 5000;  // per Nelder-Mead run
    int n_restarts = 2;
    double singular_tol = 1e-4;
    std::uint64_t restart_seed = 20240917;
    double param_bound = 25.0;  // |entry| bound on every optimizer parameter

    std::optional<FixedEffects> init_fixed;
    std::optional<CovarianceParams> init_covariance;
    /// Pins the covariance parameters; only the fixed effects are optimized.
    std::optional<CovarianceParams> fixed_covariance;

    /// Throws ConfigError naming the first invalid field.
    void validate() const;
};

struct StudentEffect {
    std::string id;
    double theta = 0.0;  // intercept deviation
    double delta = 0.0;  // slope deviation (0 for AFM)
};

struct KcEffect {
    std::string id;
    double beta = 0.0;
    double gamma = 0.0;
};

struct RandomEffectEstimates {
    bool has_student_slope = true;
    std::vector<StudentEffect> students;
    std::vector<KcEffect> kcs;
};

struct FitResult {
    ModelSpec spec;
    FixedEffects fixed;
    CovarianceBlock student_block;
    CovarianceBlock kc_block;
    RandomEffectEstimates blups;
    Eigen::VectorXd modes;  // spherical conditional modes at the optimum
    double deviance = 0.0;
    double aic = 0.0;
    int n_params = 0;
    bool converged = false;
    bool singular = false;
    std::size_t n_obs = 0;
    std::size_t n_students = 0;
    std::size_t n_kcs = 0;
    int n_evaluations = 0;
    std::vector<std::string> notes;
    FitConfig config_echo;

    CovarianceParams covariance() const { return {student_block, kc_block}; }
};

/// Plain logistic regression of y on [1, T] by Newton-Raphson.
FixedEffects logistic_regression(const DesignMatrices& design, double* deviance = nullptr);

/// Maximizes the Laplace-approximated likelihood over (ζ, β) with bounded
/// Nelder-Mead plus jittered restarts. Deterministic for a given config.
FitResult fit(const DesignMatrices& design, const FitConfig& cfg = {});
FitResult fit(const Dataset& d, const ModelSpec& spec, const FitConfig& cfg = {});

/// b = Λ(ζ) u split into per-student and per-KC (intercept, slope) entries.
/// Needs the ids, so it is given the design the fit was computed on.
RandomEffectEstimates extract_blups(const FitResult& fit, const DesignMatrices& design);

/// b = Λ(ζ) u from the ids already stored in fit.blups.
RandomEffectEstimates extract_blups(const FitResult& fit);

/// True when a Cholesky diagonal of either block (l11, or l22 of a 2x2
/// block) is below tol. This covers a zero intercept or slope SD and a
/// correlation of +-1.
bool is_singular(const CovarianceBlock& block, double tol);
bool is_singular(const FitResult& fit, double tol);

}  // namespace lcsens
