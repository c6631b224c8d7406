#include "lcsens/fitter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Dense>

#include "lcsens/errors.hpp"
#include "lcsens/nelder_mead.hpp"

namespace lcsens {

void FitConfig::validate() const {
    if (!(pirls_tol > 0)) throw ConfigError("pirls_tol", "must be > 0");
    if (pirls_max_iter < 1) throw ConfigError("pirls_max_iter", "must be >= 1");
    if (!(outer_tol > 0)) throw ConfigError("outer_tol", "must be > 0");
    if (outer_max_eval < 1) throw ConfigError("outer_max_eval", "must be >= 1");
    if (n_restarts < 0) throw ConfigError("n_restarts", "must be >= 0");
    if (!(singular_tol > 0)) throw ConfigError("singular_tol", "must be > 0");
    if (!(param_bound > 0)) throw ConfigError("param_bound", "must be > 0");
}

bool is_singular(const CovarianceBlock& block, double tol) {
    if (block.l11 < tol) return true;
    return block.dim == 2 && block.l22 < tol;
}

bool is_singular(const FitResult& fit, double tol) {
    return is_singular(fit.student_block, tol) || is_singular(fit.kc_block, tol);
}

FixedEffects logistic_regression(const DesignMatrices& design, double* deviance) {
    Eigen::Vector2d beta = Eigen::Vector2d::Zero();
    auto dev_at = [&](const Eigen::Vector2d& b) {
        return bernoulli_deviance(design.y, design.X * b);
    };
    double dev = dev_at(beta);
    for (int iter = 0; iter < 100; ++iter) {
        const Eigen::VectorXd eta = design.X * beta;
        const Eigen::ArrayXd mu = 1.0 / (1.0 + (-eta.array()).exp());
        const Eigen::ArrayXd w = mu * (1.0 - mu);
        const Eigen::Matrix2d H = design.X.transpose() * (design.X.array().colwise() * w).matrix();
        const Eigen::Vector2d g = design.X.transpose() * (design.y.array() - mu).matrix();
        const Eigen::Vector2d step = H.ldlt().solve(g);
        double t = 1.0;
        Eigen::Vector2d next = beta + step;
        double next_dev = dev_at(next);
        while (!(next_dev <= dev) && t > 1e-10) {
            t *= 0.5;
            next = beta + t * step;
            next_dev = dev_at(next);
        }
        if (!(next_dev <= dev)) break;
        const double change = dev - next_dev;
        beta = next;
        dev = next_dev;
        if (change <= 1e-14 * (dev + 1e-14) && step.lpNorm<Eigen::Infinity>() < 1e-10) break;
        if (step.lpNorm<Eigen::Infinity>() < 1e-12) break;
    }
    if (deviance) *deviance = dev;
    return {beta(0), beta(1)};
}

namespace {

// Optimizer parameter layout: [theta, delta, student block..., kc block...]
// with each 2x2 block stored as (l11, l21, l22), or (l11, l22) when
// uncorrelated; AFM's student block is (l11).
struct Layout {
    ModelSpec spec;
    bool pinned = false;

    std::size_t size() const {
        return 2 + (pinned ? 0 : static_cast<std::size_t>(covariance_param_count(spec)));
    }

    std::vector<double> pack(const FixedEffects& fe, const CovarianceParams& cp) const {
        std::vector<double> x{fe.theta, fe.delta};
        if (pinned) return x;
        auto block = [&](const CovarianceBlock& b) {
            x.push_back(b.l11);
            if (b.dim == 2) {
                if (spec.correlated) x.push_back(b.l21);
                x.push_back(b.l22);
            }
        };
        block(cp.student);
        block(cp.kc);
        return x;
    }

    void unpack(std::span<const double> x, FixedEffects& fe, CovarianceParams& cp) const {
        fe.theta = x[0];
        fe.delta = x[1];
        if (pinned) return;
        std::size_t i = 2;
        auto block = [&](CovarianceBlock& b) {
            b.l11 = x[i++];
            if (b.dim == 2) {
                b.l21 = spec.correlated ? x[i++] : 0.0;
                b.l22 = x[i++];
            }
        };
        block(cp.student);
        block(cp.kc);
    }

    // role per entry: 0 fixed intercept, 1 fixed slope, 2 diag intercept,
    // 3 off-diagonal, 4 diag slope
    std::vector<int> roles() const {
        std::vector<int> r{0, 1};
        if (pinned) return r;
        auto block = [&](int dim) {
            r.push_back(2);
            if (dim == 2) {
                if (spec.correlated) r.push_back(3);
                r.push_back(4);
            }
        };
        block(spec.variant == Variant::IAFM ? 2 : 1);
        block(2);
        return r;
    }
};

CovarianceParams default_start(const ModelSpec& spec) {
    CovarianceParams cp = CovarianceParams::zeros(spec);
    cp.student.l11 = 1.0;
    if (cp.student.dim == 2) cp.student.l22 = 0.1;
    cp.kc.l11 = 1.0;
    cp.kc.l22 = 0.1;
    return cp;
}

}  // namespace

RandomEffectEstimates extract_blups(const FitResult& fit, const DesignMatrices& design) {
    RandomEffectEstimates re;
    re.has_student_slope = fit.spec.variant == Variant::IAFM;
    re.students.reserve(design.n_students());
    for (std::size_t s = 0; s < design.n_students(); ++s) re.students.push_back({design.student_ids[s], 0.0, 0.0});
    for (std::size_t k = 0; k < design.n_kcs(); ++k) re.kcs.push_back({design.kc_ids[k], 0.0, 0.0});
    FitResult copy_ids = fit;
    copy_ids.blups = re;
    return extract_blups(copy_ids);
}

RandomEffectEstimates extract_blups(const FitResult& fit) {
    RandomEffectEstimates re = fit.blups;
    re.has_student_slope = fit.spec.variant == Variant::IAFM;
    const int sdim = re.has_student_slope ? 2 : 1;
    const int ns = static_cast<int>(re.students.size());
    const int nk = static_cast<int>(re.kcs.size());
    const auto& sb = fit.student_block;
    const auto& kb = fit.kc_block;
    if (fit.modes.size() != sdim * ns + 2 * nk) throw Error("extract_blups: mode vector does not match the effect ids");
    for (int s = 0; s < ns; ++s) {
        const double u0 = fit.modes(sdim * s);
        re.students[static_cast<std::size_t>(s)].theta = sb.l11 * u0;
        re.students[static_cast<std::size_t>(s)].delta = sdim == 2 ? sb.l21 * u0 + sb.l22 * fit.modes(sdim * s + 1) : 0.0;
    }
    for (int k = 0; k < nk; ++k) {
        const double u0 = fit.modes(sdim * ns + 2 * k);
        const double u1 = fit.modes(sdim * ns + 2 * k + 1);
        re.kcs[static_cast<std::size_t>(k)].beta = kb.l11 * u0;
        re.kcs[static_cast<std::size_t>(k)].gamma = kb.l21 * u0 + kb.l22 * u1;
    }
    return re;
}

FitResult fit(const Dataset& d, const ModelSpec& spec, const FitConfig& cfg) {
    const DesignMatrices design = build_design(d, spec);
    return fit(design, cfg);
}

FitResult fit(const DesignMatrices& design, const FitConfig& cfg) {
    cfg.validate();
    const ModelSpec& spec = design.spec;
    LaplaceEvaluator ev(design, PirlsOptions{cfg.pirls_tol, cfg.pirls_max_iter});

    const Layout layout{spec, cfg.fixed_covariance.has_value()};
    FixedEffects fe0 = cfg.init_fixed ? *cfg.init_fixed : logistic_regression(design);
    CovarianceParams cp0 = cfg.fixed_covariance ? *cfg.fixed_covariance
                           : cfg.init_covariance ? *cfg.init_covariance
                                                 : default_start(spec);
    cp0.student.dim = spec.variant == Variant::IAFM ? 2 : 1;
    cp0.kc.dim = 2;
    if (!spec.correlated) {
        cp0.student.l21 = 0.0;
        cp0.kc.l21 = 0.0;
    }

    const auto roles = layout.roles();
    const std::size_t n = layout.size();
    std::vector<double> lower(n), upper(n, cfg.param_bound), step(n);
    for (std::size_t i = 0; i < n; ++i) {
        const bool diag = roles[i] == 2 || roles[i] == 4;
        lower[i] = diag ? 0.0 : -cfg.param_bound;
        static constexpr double kStep[] = {0.1, 0.01, 0.2, 0.02, 0.02};
        step[i] = kStep[roles[i]];
    }

    CovarianceParams cp_work = cp0;
    const Objective objective = [&](std::span<const double> x) {
        FixedEffects fe;
        layout.unpack(x, fe, cp_work);
        try {
            return ev.laplace_deviance(fe, cp_work);
        } catch (const InnerLoopError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    NelderMeadOptions nm;
    nm.ftol_rel = cfg.outer_tol;
    nm.max_eval = cfg.outer_max_eval;

    FitResult res;
    res.spec = spec;
    res.config_echo = cfg;

    NelderMeadResult best = nelder_mead(objective, layout.pack(fe0, cp0), step, lower, upper, nm);
    int evaluations = best.evaluations;
    bool best_converged = best.converged;
    std::mt19937_64 rng(cfg.restart_seed);
    std::normal_distribution<double> jitter(0.0, 1.0);
    for (int r = 0; r < cfg.n_restarts; ++r) {
        std::vector<double> x = best.x;
        for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i] + 0.5 * step[i] * jitter(rng), lower[i], upper[i]);
        NelderMeadResult run = nelder_mead(objective, std::move(x), step, lower, upper, nm);
        evaluations += run.evaluations;
        if (run.f < best.f) {
            best_converged = run.converged;
            best = std::move(run);
        }
    }
    if (!std::isfinite(best.f)) throw InnerLoopError("no finite Laplace deviance found", best.f, evaluations);

    // The relative stopping rule can halt on the flat ridge next to a
    // zero variance; refit with each diagonal held at 0 and keep the boundary
    // solution when it is at least as good.
    for (std::size_t i = 0; i < n; ++i) {
        if (!(roles[i] == 2 || roles[i] == 4) || best.x[i] == 0.0) continue;
        std::vector<double> x = best.x;
        x[i] = 0.0;
        const double f0 = objective(x);
        ++evaluations;
        if (!(f0 <= best.f + 2.0 * (cfg.outer_tol * std::abs(best.f)))) continue;
        std::vector<double> sub_step = step, sub_upper = upper;
        sub_step[i] = 0.0;
        sub_upper[i] = 0.0;
        NelderMeadResult run = nelder_mead(objective, std::move(x), sub_step, lower, sub_upper, nm);
        evaluations += run.evaluations;
        if (run.f <= best.f) {
            best_converged = run.converged;
            best = std::move(run);
        }
    }

    FixedEffects fe;
    CovarianceParams cp = cp0;
    layout.unpack(best.x, fe, cp);
    ev.reset_warm_start();
    const PirlsResult mode = ev.solve(fe, cp);

    res.fixed = fe;
    res.student_block = cp.student;
    res.kc_block = cp.kc;
    res.modes = mode.u;
    res.deviance = mode.laplace_deviance();
    res.n_params = 2 + covariance_param_count(spec);
    res.aic = res.deviance + 2.0 * res.n_params;
    res.n_obs = design.n_obs();
    res.n_students = design.n_students();
    res.n_kcs = design.n_kcs();
    res.n_evaluations = evaluations;
    res.converged = best_converged;
    if (!best_converged) res.notes.push_back("outer optimizer did not meet outer_tol within outer_max_eval");
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(best.x[i]) >= cfg.param_bound * (1.0 - 1e-9)) {
            res.converged = false;
            res.notes.push_back("parameter at bound |x| = " + std::to_string(cfg.param_bound) +
                                " (likely separation)");
            break;
        }
    }
    if (cfg.fixed_covariance) res.notes.push_back("covariance parameters pinned");
    res.blups = extract_blups(res, design);
    res.singular = is_singular(res, cfg.singular_tol);
    return res;
}

}  // namespace lcsens
