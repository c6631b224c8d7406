#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lcsens/corpus.hpp"
#include "oracles.hpp"

namespace testing_support {

/// Rows for raw pairs; order indices interleave a student's pairs so the
/// corpus is not trivially pre-grouped.
inline lcsens::Dataset to_dataset(const std::vector<oracle::RawPair>& pairs, const std::string& name = "random") {
    std::vector<lcsens::ObservationRow> rows;
    std::map<std::string, std::int64_t> clock;
    std::size_t longest = 0;
    for (const auto& p : pairs) longest = std::max(longest, p.outcomes.size());
    for (std::size_t t = 0; t < longest; ++t)
        for (const auto& p : pairs) {
            if (t >= p.outcomes.size()) continue;
            rows.push_back({p.student, p.kc, clock[p.student]++, 0, p.outcomes[t]});
        }
    return lcsens::make_dataset(std::move(rows), name);
}

inline std::string to_tsv(const lcsens::Dataset& d) {
    std::ostringstream s;
    lcsens::write_tsv(s, d);
    return s.str();
}

inline lcsens::Dataset from_tsv(const std::string& text, const std::string& name = "dataset") {
    std::istringstream in(text);
    return lcsens::parse_transactions(in, lcsens::ColumnMapping{}, name);
}

/// Dataset with one pair per (student, kc, length) triple and outcomes drawn
/// with probability p_correct.
inline lcsens::Dataset with_lengths(const std::vector<std::tuple<std::string, std::string, int>>& spec,
                                    std::uint64_t seed = 1, double p_correct = 0.6) {
    std::mt19937_64 gen(seed);
    std::bernoulli_distribution b(p_correct);
    std::vector<oracle::RawPair> pairs;
    for (const auto& [s, k, L] : spec) {
        oracle::RawPair p{s, k, {}};
        for (int i = 0; i < L; ++i) p.outcomes.push_back(b(gen) ? 1 : 0);
        pairs.push_back(std::move(p));
    }
    return to_dataset(pairs);
}

inline bool same_rows(const lcsens::Dataset& a, const lcsens::Dataset& b) {
    if (a.rows.size() != b.rows.size()) return false;
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        const auto &x = a.rows[i], &y = b.rows[i];
        if (x.student_id != y.student_id || x.kc_id != y.kc_id || x.order_index != y.order_index ||
            x.opportunity != y.opportunity || x.outcome != y.outcome)
            return false;
    }
    return true;
}

}  // namespace testing_support
