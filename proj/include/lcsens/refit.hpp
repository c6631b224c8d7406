#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>

#include "lcsens/corpus.hpp"
#include "lcsens/errors.hpp"
#include "lcsens/fitter.hpp"

namespace lcsens {

enum class RefitKind { TRUNCATE, STRATIFY, RANDOM_WINDOW };

struct RefitPlan {
    RefitKind kind = RefitKind::TRUNCATE;
    int depth_or_threshold = 10;
    int window_length = 10;
    bool reindex_opportunities = false;
    std::uint64_t seed = 0;

    void validate() const;
};

enum class Eligibility { OK, NO_LONG_PAIRS, SINGULAR_FULL, SINGULAR_TRANSFORMED, SINGULAR_STRATUM, INSUFFICIENT_STRATUM };

std::string to_string(RefitKind k);
RefitKind refit_kind_from_string(const std::string& s);
std::string to_string(Eligibility e);

struct EligibilityReport {
    std::string dataset;
    bool eligible = false;
    Eligibility reason = Eligibility::OK;
    std::string detail;
};

struct ProtocolResult {
    std::map<std::string, FitResult> fits;  // condition -> fit
    EligibilityReport eligibility;
};

/// Fitter failure inside run_protocol, tagged with the condition.
class RefitError : public Error {
public:
    RefitError(std::string condition, const std::string& what)
        : Error(condition + ": " + what), condition_(std::move(condition)) {}
    const std::string& condition() const noexcept { return condition_; }

private:
    std::string condition_;
};

/// Keeps the first min(L, depth) attempts of each pair.
Dataset truncate(const Dataset& d, int depth);

/// Pairs with L <= threshold go whole into `first` (short), the rest into
/// `second` (long). Either may be empty.
std::pair<Dataset, Dataset> stratify(const Dataset& d, int threshold);

/// Each pair longer than `length` keeps a contiguous window whose start is
/// uniform on {0..L-length}, drawn from a substream of (seed, student, KC).
/// Original opportunity values are kept unless `reindex`, so without
/// reindexing a windowed pair's opportunities need not start at 0.
Dataset random_window(const Dataset& d, int length, std::uint64_t seed, bool reindex = false);

/// Runs the protocol's fits and applies its eligibility rules. Conditions:
/// TRUNCATE -> {full, truncated}; STRATIFY -> {short, long}; RANDOM_WINDOW ->
/// {full, windowed}. `jobs` > 1 fits the conditions concurrently.
ProtocolResult run_protocol(const Dataset& d, const RefitPlan& plan, const ModelSpec& spec, const FitConfig& cfg,
                            int jobs = 1);

}  // namespace lcsens
