#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cstddef>
#include <string>
#include <vector>

#include "lcsens/corpus.hpp"
#include "lcsens/model.hpp"

namespace lcsens {

/// Design of the learning-curve GLMM for one dataset.
///
/// Column layout of Z (and of the spherical effects u):
///   IAFM: student s -> (2s, 2s+1); KC k -> (2S+2k, 2S+2k+1)
///   AFM:  student s -> s;          KC k -> (S+2k,  S+2k+1)
/// Each row of Z carries 1 at the intercept columns and T at the slope
/// columns of its owning student and KC.
struct DesignMatrices {
    /// One (student, KC) run of consecutive rows.
    struct PairBlock {
        int student = 0;
        int kc = 0;
        std::size_t first = 0;
        std::size_t length = 0;
    };

    ModelSpec spec;
    std::vector<std::string> student_ids;  // sorted; index = student level
    std::vector<std::string> kc_ids;       // sorted; index = KC level
    std::vector<PairBlock> pair_blocks;

    Eigen::MatrixX2d X;           // [1, T]
    Eigen::SparseMatrix<double> Z;  // n x q
    Eigen::VectorXd y;
    Eigen::VectorXd opportunity;

    std::size_t n_obs() const noexcept { return static_cast<std::size_t>(y.size()); }
    std::size_t n_students() const noexcept { return student_ids.size(); }
    std::size_t n_kcs() const noexcept { return kc_ids.size(); }
    int student_dim() const noexcept { return spec.variant == Variant::IAFM ? 2 : 1; }
    int q() const noexcept {
        return static_cast<int>(student_dim() * n_students() + 2 * n_kcs());
    }

    /// which = 0 for the intercept column, 1 for the slope column.
    int student_col(int s, int which = 0) const noexcept { return student_dim() * s + which; }
    int kc_col(int k, int which = 0) const noexcept {
        return static_cast<int>(student_dim() * n_students()) + 2 * k + which;
    }

    /// Block-diagonal relative covariance factor, b = Λ u.
    Eigen::SparseMatrix<double> lambda(const CovarianceParams& zeta) const;
};

/// Throws DegenerateDesignError when the data has a single student or a
/// single KC, unless `allow_degenerate` (used for one-factor test problems).
DesignMatrices build_design(const Dataset& d, const ModelSpec& spec, bool allow_degenerate = false);

}  // namespace lcsens
