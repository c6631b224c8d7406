#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace lcsens {

/// One practice attempt.
struct ObservationRow {
    std::string student_id;
    std::string kc_id;
    std::int64_t order_index = 0;  // chronological rank within the source log
    int opportunity = 0;           // prior attempts by this student on this KC
    int outcome = 0;               // 1 = correct on first try

    friend bool operator==(const ObservationRow&, const ObservationRow&) = default;
};

/// Rows are kept sorted by (student, KC, order_index); opportunity counts are
/// always 0..L-1 within each (student, KC) pair. Build through make_dataset()
/// or the parser so the invariant holds.
struct Dataset {
    std::string name;
    std::vector<ObservationRow> rows;
    std::map<std::string, std::string> provenance;

    std::size_t n_obs() const noexcept { return rows.size(); }
    bool empty() const noexcept { return rows.empty(); }
};

/// A contiguous run rows[first_row, first_row + length) of one student on one KC.
struct PracticePair {
    std::string student_id;
    std::string kc_id;
    std::size_t first_row = 0;
    std::size_t length = 0;
};

struct CorpusStats {
    std::size_t n_students = 0;
    std::size_t n_kcs = 0;
    std::size_t n_obs = 0;
    std::size_t n_pairs = 0;
    int threshold = 10;
    double pair_length_median = 0.0;
    std::size_t pair_length_max = 0;
    double obs_per_student_median = 0.0;
    double pct_pairs_gt = 0.0;  // fraction of pairs with L > threshold
    double pct_obs_gt = 0.0;    // fraction of observations in such pairs
    std::vector<std::pair<std::size_t, double>> ecdf;  // (length, cumulative fraction)
};

/// Maps source columns onto the canonical fields. The defaults read the
/// canonical TSV (`student kc order outcome`).
struct ColumnMapping {
    std::string student = "student";
    std::string kc = "kc";
    std::string order = "order";
    std::string outcome = "outcome";
    std::vector<std::string> correct_values = {"1", "correct"};      // case-insensitive
    std::vector<std::string> incorrect_values = {"0", "incorrect"};  // case-insensitive

    /// Reads `key=value` lines (keys: student, kc, order, outcome, correct,
    /// incorrect; the last two are comma-separated). `#` starts a comment.
    static ColumnMapping from_file(const std::filesystem::path& path);
    static ColumnMapping parse(std::istream& in);
};

/// Sorts rows by (student, KC, order_index), stable on ties, and recomputes
/// opportunity counts from scratch.
Dataset make_dataset(std::vector<ObservationRow> rows, std::string name,
                     std::map<std::string, std::string> provenance = {});

/// Parses tab-separated text with a header row. Rows with a missing student or
/// KC or an outcome outside the mapping's encodings are dropped and counted in
/// provenance. Order values compare numerically when every value is an
/// integer, lexically otherwise.
Dataset parse_transactions(std::istream& raw, const ColumnMapping& mapping,
                           std::string name = "dataset");

Dataset load_transactions(const std::filesystem::path& path,
                          const ColumnMapping& mapping = {});

/// Canonical TSV: header `student\tkc\torder\toutcome`, LF line endings.
void write_tsv(std::ostream& out, const Dataset& d);
void save_tsv(const std::filesystem::path& path, const Dataset& d);

/// Throws FormatError naming the first violated invariant.
void validate(const Dataset& d);

/// Keeps KCs practiced by at least `min_students` distinct students with at
/// least one pair of length >= `min_opportunities`. Single pass.
Dataset preprocess(const Dataset& d, int min_students = 10, int min_opportunities = 2);

std::vector<PracticePair> pairs(const Dataset& d);

CorpusStats describe(const Dataset& d, int threshold = 10);

/// Step-function ECDF of pair lengths evaluated at x.
double ecdf_at(const CorpusStats& stats, double x);

/// Distinct ids in sorted order.
std::vector<std::string> student_ids(const Dataset& d);
std::vector<std::string> kc_ids(const Dataset& d);

void write_stats_csv(std::ostream& out, const CorpusStats& stats, const std::string& dataset);
void write_ecdf_csv(std::ostream& out, const CorpusStats& stats);

inline constexpr const char* kStatsCsvHeader =
    "dataset,n_students,n_kcs,n_obs,n_pairs,pair_med,pair_max,obs_per_student_med,threshold,"
    "pct_pairs_gt,pct_obs_gt";
inline constexpr const char* kEcdfCsvHeader = "length,cum_fraction";

}  // namespace lcsens
