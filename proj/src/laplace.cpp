#include "lcsens/laplace.hpp"

#include <cmath>
#include <limits>

#include "lcsens/errors.hpp"

namespace lcsens {

namespace {

constexpr int tri(int a, int b) { return a * (a + 1) / 2 + b; }  // a >= b

// -2 log p(y | eta) for a single Bernoulli draw; also returns mu.
inline double bernoulli_term(double y, double eta, double& mu) {
    const double a = std::exp(-std::abs(eta));
    const double l = std::log1p(a);
    if (eta >= 0.0) {
        mu = 1.0 / (1.0 + a);
        return 2.0 * (y > 0.5 ? l : eta + l);
    }
    mu = a / (1.0 + a);
    return 2.0 * (y > 0.5 ? l - eta : l);
}

}  // namespace

double bernoulli_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
    double dev = 0.0, mu = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) dev += bernoulli_term(y(i), eta(i), mu);
    return dev;
}

LaplaceEvaluator::LaplaceEvaluator(const DesignMatrices& design, PirlsOptions options)
    : design_(design), options_(options) {
    const int q = design_.q();
    const bool slope = design_.student_dim() == 2;

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(design_.pair_blocks.size() * 10 + static_cast<std::size_t>(q));
    for (int c = 0; c < q; ++c) trip.emplace_back(c, c, 0.0);
    for (const auto& pb : design_.pair_blocks) {
        const std::array<int, 4> col{design_.student_col(pb.student, 0), slope ? design_.student_col(pb.student, 1) : -1,
                                     design_.kc_col(pb.kc, 0), design_.kc_col(pb.kc, 1)};
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b <= a; ++b)
                if (col[a] >= 0 && col[b] >= 0) trip.emplace_back(col[a], col[b], 0.0);
    }
    system_.resize(q, q);
    system_.setFromTriplets(trip.begin(), trip.end());
    system_.makeCompressed();

    auto slot = [&](int r, int c) { return static_cast<int>(&system_.coeffRef(r, c) - system_.valuePtr()); };
    diag_slots_.resize(static_cast<std::size_t>(q));
    for (int c = 0; c < q; ++c) diag_slots_[static_cast<std::size_t>(c)] = slot(c, c);
    slots_.resize(design_.pair_blocks.size());
    for (std::size_t p = 0; p < design_.pair_blocks.size(); ++p) {
        const auto& pb = design_.pair_blocks[p];
        const std::array<int, 4> col{design_.student_col(pb.student, 0), slope ? design_.student_col(pb.student, 1) : -1,
                                     design_.kc_col(pb.kc, 0), design_.kc_col(pb.kc, 1)};
        slots_[p].idx.fill(-1);
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b <= a; ++b)
                if (col[a] >= 0 && col[b] >= 0) slots_[p].idx[static_cast<std::size_t>(tri(a, b))] = slot(col[a], col[b]);
    }

    solver_.analyzePattern(system_);
    rhs_.resize(q);
    weights_.resize(static_cast<Eigen::Index>(design_.n_obs()));
    warm_ = Eigen::VectorXd::Zero(q);
}

double LaplaceEvaluator::evaluate(const FixedEffects& fixed, const CovarianceParams& zeta, const Eigen::VectorXd& u,
                                  bool build_system, const Eigen::VectorXd* fixed_weights) {
    const bool slope = design_.student_dim() == 2;
    const auto& sb = zeta.student;
    const auto& kb = zeta.kc;

    // Per-factor 2 x d Cholesky blocks; AFM's student block is [[l11], [0]].
    Eigen::Matrix2d Ls, Lk;
    Ls << sb.l11, 0.0, slope ? sb.l21 : 0.0, slope ? sb.l22 : 0.0;
    Lk << kb.l11, 0.0, kb.l21, kb.l22;

    double* values = system_.valuePtr();
    if (build_system) {
        std::fill(values, values + system_.nonZeros(), 0.0);
        for (int s : diag_slots_) values[s] = 1.0;
        rhs_ = -u;
    }

    double dev = 0.0;
    const double* y = design_.y.data();
    const double* T = design_.opportunity.data();
    for (std::size_t p = 0; p < design_.pair_blocks.size(); ++p) {
        const auto& pb = design_.pair_blocks[p];
        const int cs0 = design_.student_col(pb.student, 0);
        const int ck0 = design_.kc_col(pb.kc, 0);
        const double us0 = u(cs0), us1 = slope ? u(cs0 + 1) : 0.0;
        const double uk0 = u(ck0), uk1 = u(ck0 + 1);
        const double bs0 = Ls(0, 0) * us0;
        const double bs1 = Ls(1, 0) * us0 + Ls(1, 1) * us1;
        const double bk0 = Lk(0, 0) * uk0;
        const double bk1 = Lk(1, 0) * uk0 + Lk(1, 1) * uk1;
        const double intercept = fixed.theta + bs0 + bk0;
        const double rate = fixed.delta + bs1 + bk1;

        double s0 = 0, s1 = 0, s2 = 0, r0 = 0, r1 = 0;
        for (std::size_t i = pb.first; i < pb.first + pb.length; ++i) {
            double w, e = 0.0;
            if (fixed_weights) {
                w = (*fixed_weights)(static_cast<Eigen::Index>(i));
            } else {
                double mu = 0.0;
                dev += bernoulli_term(y[i], intercept + rate * T[i], mu);
                w = mu * (1.0 - mu);
                e = y[i] - mu;
                weights_(static_cast<Eigen::Index>(i)) = w;
            }
            if (build_system) {
                s0 += w;
                s1 += w * T[i];
                s2 += w * T[i] * T[i];
                r0 += e;
                r1 += e * T[i];
            }
        }
        if (!build_system) continue;

        Eigen::Matrix2d G;
        G << s0, s1, s1, s2;
        const Eigen::Vector2d r(r0, r1);
        const Eigen::Matrix2d GLs = G * Ls;
        const Eigen::Matrix2d GLk = G * Lk;
        const Eigen::Matrix2d Pss = Ls.transpose() * GLs;
        const Eigen::Matrix2d Pks = Lk.transpose() * GLs;
        const Eigen::Matrix2d Pkk = Lk.transpose() * GLk;

        const auto& idx = slots_[p].idx;
        values[idx[tri(0, 0)]] += Pss(0, 0);
        if (slope) {
            values[idx[tri(1, 0)]] += Pss(1, 0);
            values[idx[tri(1, 1)]] += Pss(1, 1);
            values[idx[tri(2, 1)]] += Pks(0, 1);
            values[idx[tri(3, 1)]] += Pks(1, 1);
        }
        values[idx[tri(2, 0)]] += Pks(0, 0);
        values[idx[tri(3, 0)]] += Pks(1, 0);
        values[idx[tri(2, 2)]] += Pkk(0, 0);
        values[idx[tri(3, 2)]] += Pkk(1, 0);
        values[idx[tri(3, 3)]] += Pkk(1, 1);

        const Eigen::Vector2d gs = Ls.transpose() * r;
        const Eigen::Vector2d gk = Lk.transpose() * r;
        rhs_(cs0) += gs(0);
        if (slope) rhs_(cs0 + 1) += gs(1);
        rhs_(ck0) += gk(0);
        rhs_(ck0 + 1) += gk(1);
    }
    return dev;
}

double LaplaceEvaluator::factor_log_det() {
    solver_.factorize(system_);
    if (solver_.info() != Eigen::Success) throw InnerLoopError("inner system factorization failed", 0.0, 0);
    return solver_.vectorD().array().log().sum();
}

PirlsResult LaplaceEvaluator::solve(const FixedEffects& fixed, const CovarianceParams& zeta) {
    return solve(fixed, zeta, warm_);
}

PirlsResult LaplaceEvaluator::solve(const FixedEffects& fixed, const CovarianceParams& zeta,
                                    const Eigen::VectorXd& u0) {
    Eigen::VectorXd u = u0;
    double dev = evaluate(fixed, zeta, u, true);
    double obj = dev + u.squaredNorm();
    double log_det = factor_log_det();

    int iter = 0;
    bool converged = false;
    while (iter < options_.max_iter) {
        ++iter;
        const Eigen::VectorXd du = solver_.solve(rhs_);
        double step = 1.0;
        bool accepted = false;
        Eigen::VectorXd trial;
        double trial_dev = 0.0, trial_obj = 0.0;
        while (step > 1e-10) {
            trial = u + step * du;
            trial_dev = evaluate(fixed, zeta, trial, true);
            trial_obj = trial_dev + trial.squaredNorm();
            if (std::isfinite(trial_obj) && trial_obj <= obj) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // No descent along the Newton direction: u is the mode to working
            // precision. Restore the system at u.
            dev = evaluate(fixed, zeta, u, true);
            log_det = factor_log_det();
            converged = true;
            break;
        }
        const double change = obj - trial_obj;
        u.swap(trial);
        dev = trial_dev;
        obj = trial_obj;
        log_det = factor_log_det();
        if (change <= options_.tol * (std::abs(obj) + options_.tol)) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw InnerLoopError("PIRLS did not converge in " + std::to_string(options_.max_iter) + " iterations", obj,
                             iter);

    warm_ = u;
    PirlsResult res;
    res.u = std::move(u);
    res.deviance = dev;
    res.penalized_deviance = obj;
    res.log_det = log_det;
    res.weights = weights_;
    res.iterations = iter;
    return res;
}

double LaplaceEvaluator::log_det(const CovarianceParams& zeta, const Eigen::VectorXd& weights) {
    evaluate(FixedEffects{}, zeta, Eigen::VectorXd::Zero(design_.q()), true, &weights);
    return factor_log_det();
}

PirlsResult pirls(const DesignMatrices& design, const FixedEffects& fixed, const CovarianceParams& zeta,
                  const Eigen::VectorXd& u0, const PirlsOptions& options) {
    LaplaceEvaluator ev(design, options);
    return ev.solve(fixed, zeta, u0);
}

double laplace_deviance(const DesignMatrices& design, const FixedEffects& fixed, const CovarianceParams& zeta,
                        const PirlsOptions& options) {
    LaplaceEvaluator ev(design, options);
    return ev.laplace_deviance(fixed, zeta);
}

}  // namespace lcsens
