#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <array>
#include <vector>

#include "lcsens/design.hpp"
#include "lcsens/model.hpp"

namespace lcsens {

struct PirlsOptions {
    double tol = 1e-8;  // relative change of the penalized deviance
    int max_iter = 200;
};

struct PirlsResult {
    Eigen::VectorXd u;             // spherical conditional modes
    double penalized_deviance = 0;  // -2 loglik(u) + u'u
    double deviance = 0;            // -2 loglik(u)
    double log_det = 0;             // log det(Λ'Z'WZΛ + I) at the mode
    Eigen::VectorXd weights;       // mu (1 - mu) at the mode
    int iterations = 0;

    double laplace_deviance() const noexcept { return penalized_deviance + log_det; }
};

/// Repeated PIRLS solves on one design. The sparsity pattern of the inner
/// system Λ'Z'WZΛ + I is fixed by the design, so the symbolic factorization
/// (AMD ordering) runs once and each Newton step only refactors numerically.
/// Successive solve() calls warm-start from the previous mode.
///
/// Holds a reference to the design; the design must outlive the evaluator.
class LaplaceEvaluator {
public:
    explicit LaplaceEvaluator(const DesignMatrices& design, PirlsOptions options = {});

    /// Minimizes -2 loglik + u'u over u starting at u0. Throws InnerLoopError
    /// when max_iter is exhausted.
    PirlsResult solve(const FixedEffects& fixed, const CovarianceParams& zeta, const Eigen::VectorXd& u0);

    /// Same, warm-started from the last mode this evaluator found.
    PirlsResult solve(const FixedEffects& fixed, const CovarianceParams& zeta);

    double laplace_deviance(const FixedEffects& fixed, const CovarianceParams& zeta) {
        return solve(fixed, zeta).laplace_deviance();
    }

    /// log det(Λ'Z'WZΛ + I) for explicit per-row weights.
    double log_det(const CovarianceParams& zeta, const Eigen::VectorXd& weights);

    const DesignMatrices& design() const noexcept { return design_; }
    void reset_warm_start() { warm_.setZero(); }

private:
    struct Slots {
        std::array<int, 10> idx{};  // lower triangle of the local 4x4 block, -1 when absent
    };

    // One pass over the rows at u: returns -2 loglik and, when requested,
    // fills the inner system values and the right-hand side Λ'Z'(y - mu) - u.
    double evaluate(const FixedEffects& fixed, const CovarianceParams& zeta, const Eigen::VectorXd& u,
                    bool build_system, const Eigen::VectorXd* fixed_weights = nullptr);
    double factor_log_det();

    const DesignMatrices& design_;
    PirlsOptions options_;
    Eigen::SparseMatrix<double> system_;  // lower triangle only
    std::vector<Slots> slots_;            // per pair block
    std::vector<int> diag_slots_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> solver_;
    Eigen::VectorXd rhs_;
    Eigen::VectorXd weights_;
    Eigen::VectorXd warm_;
};

/// One-shot PIRLS from u0.
PirlsResult pirls(const DesignMatrices& design, const FixedEffects& fixed, const CovarianceParams& zeta,
                  const Eigen::VectorXd& u0, const PirlsOptions& options = {});

/// Laplace approximation to -2 log of the marginal likelihood:
/// -2 loglik(u) + u'u + log det(Λ'Z'WZΛ + I), evaluated at the PIRLS mode.
double laplace_deviance(const DesignMatrices& design, const FixedEffects& fixed, const CovarianceParams& zeta,
                        const PirlsOptions& options = {});

/// Bernoulli deviance -2 sum[y log mu + (1-y) log(1-mu)] for a linear predictor.
double bernoulli_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& eta);

}  // namespace lcsens
