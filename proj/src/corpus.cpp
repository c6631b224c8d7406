#include "lcsens/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "lcsens/errors.hpp"
#include "lcsens/quantile.hpp"
#include "text_util.hpp"

namespace lcsens {

namespace {

bool row_less(const ObservationRow& a, const ObservationRow& b) {
    if (a.student_id != b.student_id) return a.student_id < b.student_id;
    if (a.kc_id != b.kc_id) return a.kc_id < b.kc_id;
    return a.order_index < b.order_index;
}

bool same_pair(const ObservationRow& a, const ObservationRow& b) {
    return a.student_id == b.student_id && a.kc_id == b.kc_id;
}

std::vector<std::string> parse_list(std::string_view v) {
    std::vector<std::string> out;
    for (auto item : detail::split(v, ',')) {
        item = detail::trim(item);
        if (!item.empty()) out.push_back(detail::lower(item));
    }
    return out;
}

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

}  // namespace

ColumnMapping ColumnMapping::parse(std::istream& in) {
    ColumnMapping m;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view sv = line;
        if (auto hash = sv.find('#'); hash != std::string_view::npos) sv = sv.substr(0, hash);
        sv = detail::trim(sv);
        if (sv.empty()) continue;
        const auto eq = sv.find('=');
        if (eq == std::string_view::npos)
            throw FormatError("column mapping line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = detail::lower(detail::trim(sv.substr(0, eq)));
        const std::string value(detail::trim(sv.substr(eq + 1)));
        if (key == "student") m.student = value;
        else if (key == "kc") m.kc = value;
        else if (key == "order") m.order = value;
        else if (key == "outcome") m.outcome = value;
        else if (key == "correct") m.correct_values = parse_list(value);
        else if (key == "incorrect") m.incorrect_values = parse_list(value);
        else throw FormatError("column mapping line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    return m;
}

ColumnMapping ColumnMapping::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open column mapping '" + path.string() + "'");
    return parse(in);
}

Dataset make_dataset(std::vector<ObservationRow> rows, std::string name,
                     std::map<std::string, std::string> provenance) {
    std::stable_sort(rows.begin(), rows.end(), row_less);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].opportunity = (i > 0 && same_pair(rows[i - 1], rows[i])) ? rows[i - 1].opportunity + 1 : 0;
    }
    return Dataset{std::move(name), std::move(rows), std::move(provenance)};
}

Dataset parse_transactions(std::istream& raw, const ColumnMapping& mapping, std::string name) {
    std::string line;
    if (!std::getline(raw, line)) throw FormatError("input is empty: header row required");
    const std::string header = strip_cr(line);
    const auto columns = detail::split(header, '\t');

    auto column_index = [&](const std::string& col) -> std::size_t {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (detail::trim(columns[i]) == col) return i;
        throw FormatError("missing column '" + col + "'");
    };
    const std::size_t i_student = column_index(mapping.student);
    const std::size_t i_kc = column_index(mapping.kc);
    const std::size_t i_order = column_index(mapping.order);
    const std::size_t i_outcome = column_index(mapping.outcome);

    struct RawRow {
        std::string student, kc, order;
        int outcome;
    };
    std::vector<RawRow> kept;
    std::size_t n_read = 0, drop_student = 0, drop_kc = 0, drop_outcome = 0;

    while (std::getline(raw, line)) {
        line = strip_cr(std::move(line));
        if (line.empty()) continue;
        ++n_read;
        const auto fields = detail::split(line, '\t');
        auto field = [&](std::size_t i) { return i < fields.size() ? detail::trim(fields[i]) : std::string_view{}; };

        const auto student = field(i_student);
        const auto kc = field(i_kc);
        if (student.empty()) { ++drop_student; continue; }
        if (kc.empty()) { ++drop_kc; continue; }
        const std::string outcome = detail::lower(field(i_outcome));
        int y = -1;
        if (std::find(mapping.correct_values.begin(), mapping.correct_values.end(), outcome) != mapping.correct_values.end()) y = 1;
        else if (std::find(mapping.incorrect_values.begin(), mapping.incorrect_values.end(), outcome) != mapping.incorrect_values.end()) y = 0;
        if (y < 0) { ++drop_outcome; continue; }
        kept.push_back(RawRow{std::string(student), std::string(kc), std::string(field(i_order)), y});
    }

    // Non-negative integer order values are used as-is; anything else is
    // ranked lexically (equal keys share a rank).
    bool integer_order = true;
    for (const auto& r : kept) {
        const auto v = detail::parse_int(r.order);
        if (!v || *v < 0) { integer_order = false; break; }
    }
    std::vector<std::int64_t> order_index(kept.size());
    if (integer_order) {
        for (std::size_t i = 0; i < kept.size(); ++i) order_index[i] = *detail::parse_int(kept[i].order);
    } else {
        std::vector<std::string> keys;
        keys.reserve(kept.size());
        for (const auto& r : kept) keys.push_back(r.order);
        std::sort(keys.begin(), keys.end());
        keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
        for (std::size_t i = 0; i < kept.size(); ++i)
            order_index[i] = std::lower_bound(keys.begin(), keys.end(), kept[i].order) - keys.begin();
    }

    std::vector<ObservationRow> rows;
    rows.reserve(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i)
        rows.push_back(ObservationRow{std::move(kept[i].student), std::move(kept[i].kc), order_index[i], 0, kept[i].outcome});

    std::map<std::string, std::string> prov{
        {"rows_read", std::to_string(n_read)},
        {"dropped_missing_student", std::to_string(drop_student)},
        {"dropped_missing_kc", std::to_string(drop_kc)},
        {"dropped_unknown_outcome", std::to_string(drop_outcome)},
        {"order_key", integer_order ? "integer" : "lexical-rank"},
    };
    Dataset d = make_dataset(std::move(rows), std::move(name), std::move(prov));

    for (std::size_t i = 1; i < d.rows.size(); ++i) {
        const auto& a = d.rows[i - 1];
        const auto& b = d.rows[i];
        if (same_pair(a, b) && a.order_index == b.order_index)
            throw AmbiguityError("duplicate (student, kc, order) triple: (" + a.student_id + ", " + a.kc_id +
                                 ", " + std::to_string(a.order_index) + ")");
    }
    return d;
}

Dataset load_transactions(const std::filesystem::path& path, const ColumnMapping& mapping) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path.string() + "'");
    Dataset d = parse_transactions(in, mapping, path.stem().string());
    d.provenance["source"] = path.string();
    return d;
}

void write_tsv(std::ostream& out, const Dataset& d) {
    out << "student\tkc\torder\toutcome\n";
    for (const auto& r : d.rows)
        out << r.student_id << '\t' << r.kc_id << '\t' << r.order_index << '\t' << r.outcome << '\n';
}

void save_tsv(const std::filesystem::path& path, const Dataset& d) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write '" + path.string() + "'");
    write_tsv(out, d);
}

void validate(const Dataset& d) {
    for (std::size_t i = 0; i < d.rows.size(); ++i) {
        const auto& r = d.rows[i];
        const std::string where = "row " + std::to_string(i);
        if (r.student_id.empty()) throw FormatError(where + ": empty student_id");
        if (r.kc_id.empty()) throw FormatError(where + ": empty kc_id");
        if (r.outcome != 0 && r.outcome != 1) throw FormatError(where + ": non-binary outcome");
        if (i > 0 && row_less(r, d.rows[i - 1])) throw FormatError(where + ": rows not sorted by (student, kc, order)");
        const int expected = (i > 0 && same_pair(d.rows[i - 1], r)) ? d.rows[i - 1].opportunity + 1 : 0;
        if (r.opportunity != expected)
            throw FormatError(where + ": opportunity " + std::to_string(r.opportunity) + ", expected " +
                              std::to_string(expected));
    }
}

std::vector<PracticePair> pairs(const Dataset& d) {
    std::vector<PracticePair> out;
    for (std::size_t i = 0; i < d.rows.size(); ++i) {
        if (i == 0 || !same_pair(d.rows[i - 1], d.rows[i]))
            out.push_back(PracticePair{d.rows[i].student_id, d.rows[i].kc_id, i, 0});
        ++out.back().length;
    }
    return out;
}

Dataset preprocess(const Dataset& d, int min_students, int min_opportunities) {
    struct KcTally {
        std::set<std::string> students;
        std::size_t max_length = 0;
    };
    std::map<std::string, KcTally> tally;
    for (const auto& p : pairs(d)) {
        auto& t = tally[p.kc_id];
        t.students.insert(p.student_id);
        t.max_length = std::max(t.max_length, p.length);
    }

    std::set<std::string> keep;
    std::vector<std::string> reasons;
    for (const auto& [kc, t] : tally) {
        const bool enough_students = t.students.size() >= static_cast<std::size_t>(min_students);
        const bool enough_practice = t.max_length >= static_cast<std::size_t>(min_opportunities);
        if (enough_students && enough_practice) {
            keep.insert(kc);
            continue;
        }
        std::string why = kc + ":";
        if (!enough_students)
            why += " " + std::to_string(t.students.size()) + " students < " + std::to_string(min_students);
        if (!enough_practice)
            why += " max pair length " + std::to_string(t.max_length) + " < " + std::to_string(min_opportunities);
        reasons.push_back(std::move(why));
    }

    std::vector<ObservationRow> rows;
    rows.reserve(d.rows.size());
    for (const auto& r : d.rows)
        if (keep.count(r.kc_id)) rows.push_back(r);
    if (rows.empty())
        throw EmptyDatasetError("no KC of '" + d.name + "' passes the preprocessing filter", std::move(reasons));

    auto prov = d.provenance;
    prov["preprocess"] = "min_students=" + std::to_string(min_students) +
                         ";min_opportunities=" + std::to_string(min_opportunities) + ";single_pass";
    prov["preprocess_kcs_removed"] = std::to_string(tally.size() - keep.size());
    prov["preprocess_obs_removed"] = std::to_string(d.rows.size() - rows.size());
    return make_dataset(std::move(rows), d.name, std::move(prov));
}

std::vector<std::string> student_ids(const Dataset& d) {
    std::vector<std::string> ids;
    for (const auto& r : d.rows)
        if (ids.empty() || ids.back() != r.student_id) ids.push_back(r.student_id);
    return ids;  // rows are sorted by student first
}

std::vector<std::string> kc_ids(const Dataset& d) {
    std::set<std::string> ids;
    for (const auto& r : d.rows) ids.insert(r.kc_id);
    return {ids.begin(), ids.end()};
}

CorpusStats describe(const Dataset& d, int threshold) {
    if (d.empty()) throw EmptyDatasetError("cannot describe an empty dataset");
    const auto ps = pairs(d);

    CorpusStats s;
    s.threshold = threshold;
    s.n_obs = d.n_obs();
    s.n_pairs = ps.size();
    s.n_kcs = kc_ids(d).size();

    std::vector<double> lengths;
    lengths.reserve(ps.size());
    std::size_t long_pairs = 0, long_obs = 0;
    for (const auto& p : ps) {
        lengths.push_back(static_cast<double>(p.length));
        s.pair_length_max = std::max(s.pair_length_max, p.length);
        if (p.length > static_cast<std::size_t>(threshold)) {
            ++long_pairs;
            long_obs += p.length;
        }
    }
    std::sort(lengths.begin(), lengths.end());
    s.pair_length_median = quantile_sorted(lengths, 0.5);
    s.pct_pairs_gt = static_cast<double>(long_pairs) / static_cast<double>(ps.size());
    s.pct_obs_gt = static_cast<double>(long_obs) / static_cast<double>(s.n_obs);

    std::vector<double> per_student;
    for (std::size_t i = 0; i < d.rows.size(); ++i) {
        if (i == 0 || d.rows[i].student_id != d.rows[i - 1].student_id) per_student.push_back(0.0);
        per_student.back() += 1.0;
    }
    s.n_students = per_student.size();
    s.obs_per_student_median = median(per_student);

    for (std::size_t i = 0; i < lengths.size(); ++i) {
        if (i + 1 < lengths.size() && lengths[i + 1] == lengths[i]) continue;
        s.ecdf.emplace_back(static_cast<std::size_t>(lengths[i]),
                            static_cast<double>(i + 1) / static_cast<double>(lengths.size()));
    }
    return s;
}

double ecdf_at(const CorpusStats& stats, double x) {
    double f = 0.0;
    for (const auto& [len, frac] : stats.ecdf) {
        if (static_cast<double>(len) > x) break;
        f = frac;
    }
    return f;
}

void write_stats_csv(std::ostream& out, const CorpusStats& s, const std::string& dataset) {
    using detail::format_double;
    out << kStatsCsvHeader << '\n'
        << dataset << ',' << s.n_students << ',' << s.n_kcs << ',' << s.n_obs << ',' << s.n_pairs << ','
        << format_double(s.pair_length_median) << ',' << s.pair_length_max << ','
        << format_double(s.obs_per_student_median) << ',' << s.threshold << ',' << format_double(s.pct_pairs_gt)
        << ',' << format_double(s.pct_obs_gt) << '\n';
}

void write_ecdf_csv(std::ostream& out, const CorpusStats& s) {
    out << kEcdfCsvHeader << '\n';
    for (const auto& [len, frac] : s.ecdf) out << len << ',' << detail::format_double(frac) << '\n';
}

}  // namespace lcsens
