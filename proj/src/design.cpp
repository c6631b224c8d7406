#include "lcsens/design.hpp"

#include <algorithm>

#include "lcsens/errors.hpp"

namespace lcsens {

std::string to_string(Variant v) { return v == Variant::IAFM ? "iafm" : "afm"; }

Variant variant_from_string(const std::string& s) {
    if (s == "iafm" || s == "IAFM") return Variant::IAFM;
    if (s == "afm" || s == "AFM") return Variant::AFM;
    throw ConfigError("model", "expected iafm or afm, got '" + s + "'");
}

CovarianceParams CovarianceParams::zeros(const ModelSpec& spec) {
    CovarianceParams p;
    p.student.dim = spec.variant == Variant::IAFM ? 2 : 1;
    p.kc.dim = 2;
    return p;
}

int covariance_param_count(const ModelSpec& spec) {
    const int block2 = spec.correlated ? 3 : 2;
    return (spec.variant == Variant::IAFM ? block2 : 1) + block2;
}

int param_count(const ModelSpec& spec) { return 2 + covariance_param_count(spec); }

Eigen::SparseMatrix<double> DesignMatrices::lambda(const CovarianceParams& zeta) const {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(3 * (n_students() + n_kcs())));
    for (int s = 0; s < static_cast<int>(n_students()); ++s) {
        t.emplace_back(student_col(s, 0), student_col(s, 0), zeta.student.l11);
        if (student_dim() == 2) {
            t.emplace_back(student_col(s, 1), student_col(s, 0), zeta.student.l21);
            t.emplace_back(student_col(s, 1), student_col(s, 1), zeta.student.l22);
        }
    }
    for (int k = 0; k < static_cast<int>(n_kcs()); ++k) {
        t.emplace_back(kc_col(k, 0), kc_col(k, 0), zeta.kc.l11);
        t.emplace_back(kc_col(k, 1), kc_col(k, 0), zeta.kc.l21);
        t.emplace_back(kc_col(k, 1), kc_col(k, 1), zeta.kc.l22);
    }
    Eigen::SparseMatrix<double> L(q(), q());
    L.setFromTriplets(t.begin(), t.end());
    return L;
}

DesignMatrices build_design(const Dataset& d, const ModelSpec& spec, bool allow_degenerate) {
    if (d.empty()) throw EmptyDatasetError("cannot build a design from an empty dataset");

    DesignMatrices m;
    m.spec = spec;
    m.student_ids = student_ids(d);
    m.kc_ids = kc_ids(d);
    if (!allow_degenerate && (m.n_students() < 2 || m.n_kcs() < 2))
        throw DegenerateDesignError("degenerate design: " + std::to_string(m.n_students()) + " student(s), " +
                                    std::to_string(m.n_kcs()) +
                                    " KC(s); each grouping factor needs at least 2 levels");

    const auto n = static_cast<Eigen::Index>(d.n_obs());
    m.X.resize(n, 2);
    m.y.resize(n);
    m.opportunity.resize(n);

    auto kc_index = [&](const std::string& id) {
        return static_cast<int>(std::lower_bound(m.kc_ids.begin(), m.kc_ids.end(), id) - m.kc_ids.begin());
    };

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n) * 4);
    int student = -1;
    for (const auto& p : pairs(d)) {
        if (student < 0 || m.student_ids[static_cast<std::size_t>(student)] != p.student_id) ++student;
        const int kc = kc_index(p.kc_id);
        m.pair_blocks.push_back({student, kc, p.first_row, p.length});
        for (std::size_t i = p.first_row; i < p.first_row + p.length; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            const double T = d.rows[i].opportunity;
            m.X(r, 0) = 1.0;
            m.X(r, 1) = T;
            m.y(r) = d.rows[i].outcome;
            m.opportunity(r) = T;
            trip.emplace_back(r, m.student_col(student, 0), 1.0);
            if (m.student_dim() == 2) trip.emplace_back(r, m.student_col(student, 1), T);
            trip.emplace_back(r, m.kc_col(kc, 0), 1.0);
            trip.emplace_back(r, m.kc_col(kc, 1), T);
        }
    }
    m.Z.resize(n, m.q());
    m.Z.setFromTriplets(trip.begin(), trip.end());
    return m;
}

}  // namespace lcsens
