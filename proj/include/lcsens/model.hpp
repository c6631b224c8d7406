#pragma once

#include <cmath>
#include <string>

namespace lcsens {

/// AFM drops the per-student slope random effect; everything else is shared.
enum class Variant { IAFM, AFM };

struct ModelSpec {
    Variant variant = Variant::IAFM;
    // Correlated 2x2 blocks by default; false pins the off-diagonal
    // Cholesky entries at zero.
    bool correlated = true;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

/// Population intercept (log-odds) and learning rate (log-odds per opportunity).
struct FixedEffects {
    double theta = 0.0;
    double delta = 0.0;

    friend bool operator==(const FixedEffects&, const FixedEffects&) = default;
};

/// Lower-triangular Cholesky factor of a relative covariance block,
/// [[l11, 0], [l21, l22]]. A 1x1 block uses l11 only.
struct CovarianceBlock {
    int dim = 2;
    double l11 = 0.0;
    double l21 = 0.0;
    double l22 = 0.0;

    double sd_intercept() const noexcept { return l11; }
    double sd_slope() const noexcept { return dim == 2 ? std::hypot(l21, l22) : 0.0; }
    double correlation() const noexcept {
        const double s = sd_slope();
        return s > 0.0 ? l21 / s : 0.0;
    }

    friend bool operator==(const CovarianceBlock&, const CovarianceBlock&) = default;
};

/// Covariance parameters of both grouping factors (the ζ of the outer search).
struct CovarianceParams {
    CovarianceBlock student;
    CovarianceBlock kc;

    /// All-zero parameters shaped for `spec`.
    static CovarianceParams zeros(const ModelSpec& spec);

    friend bool operator==(const CovarianceParams&, const CovarianceParams&) = default;
};

/// Free covariance parameters implied by `spec`.
int covariance_param_count(const ModelSpec& spec);

/// 2 fixed effects plus the free covariance parameters.
int param_count(const ModelSpec& spec);

}  // namespace lcsens
