#include "lcsens/refit.hpp"

#include <algorithm>
#include <functional>
#include <future>
#include <set>

#include "lcsens/rng.hpp"

namespace lcsens {

namespace {

Dataset sorted_keep_opportunity(const Dataset& src, std::vector<ObservationRow> rows,
                                std::map<std::string, std::string> provenance) {
    // Rows come from an already sorted dataset and keep their order.
    return Dataset{src.name, std::move(rows), std::move(provenance)};
}

std::size_t count_levels(const Dataset& d, bool students) {
    std::set<std::string> ids;
    for (const auto& r : d.rows) ids.insert(students ? r.student_id : r.kc_id);
    return ids.size();
}

}  // namespace

void RefitPlan::validate() const {
    if (depth_or_threshold < 1) throw ConfigError("depth_or_threshold", "must be >= 1");
    if (kind == RefitKind::RANDOM_WINDOW && window_length < 1) throw ConfigError("window_length", "must be >= 1");
}

std::string to_string(RefitKind k) {
    switch (k) {
        case RefitKind::TRUNCATE: return "truncate";
        case RefitKind::STRATIFY: return "stratify";
        case RefitKind::RANDOM_WINDOW: return "window";
    }
    return "?";
}

RefitKind refit_kind_from_string(const std::string& s) {
    if (s == "truncate") return RefitKind::TRUNCATE;
    if (s == "stratify") return RefitKind::STRATIFY;
    if (s == "window" || s == "random_window") return RefitKind::RANDOM_WINDOW;
    throw ConfigError("protocol", "expected truncate, stratify or window, got '" + s + "'");
}

std::string to_string(Eligibility e) {
    switch (e) {
        case Eligibility::OK: return "OK";
        case Eligibility::NO_LONG_PAIRS: return "NO_LONG_PAIRS";
        case Eligibility::SINGULAR_FULL: return "SINGULAR_FULL";
        case Eligibility::SINGULAR_TRANSFORMED: return "SINGULAR_TRANSFORMED";
        case Eligibility::SINGULAR_STRATUM: return "SINGULAR_STRATUM";
        case Eligibility::INSUFFICIENT_STRATUM: return "INSUFFICIENT_STRATUM";
    }
    return "?";
}

Dataset truncate(const Dataset& d, int depth) {
    if (depth < 1) throw ConfigError("depth", "must be >= 1");
    std::vector<ObservationRow> rows;
    rows.reserve(d.rows.size());
    for (const auto& p : pairs(d)) {
        const std::size_t keep = std::min(p.length, static_cast<std::size_t>(depth));
        rows.insert(rows.end(), d.rows.begin() + static_cast<std::ptrdiff_t>(p.first_row),
                    d.rows.begin() + static_cast<std::ptrdiff_t>(p.first_row + keep));
    }
    auto prov = d.provenance;
    prov["refit"] = "truncate";
    prov["truncate_depth"] = std::to_string(depth);
    prov["truncate_dropped_obs"] = std::to_string(d.rows.size() - rows.size());
    return sorted_keep_opportunity(d, std::move(rows), std::move(prov));
}

std::pair<Dataset, Dataset> stratify(const Dataset& d, int threshold) {
    if (threshold < 1) throw ConfigError("threshold", "must be >= 1");
    std::vector<ObservationRow> short_rows, long_rows;
    for (const auto& p : pairs(d)) {
        auto& dst = p.length <= static_cast<std::size_t>(threshold) ? short_rows : long_rows;
        dst.insert(dst.end(), d.rows.begin() + static_cast<std::ptrdiff_t>(p.first_row),
                   d.rows.begin() + static_cast<std::ptrdiff_t>(p.first_row + p.length));
    }
    auto prov = d.provenance;
    prov["refit"] = "stratify";
    prov["stratify_threshold"] = std::to_string(threshold);
    auto short_prov = prov, long_prov = prov;
    short_prov["stratum"] = "short";
    long_prov["stratum"] = "long";
    Dataset s = sorted_keep_opportunity(d, std::move(short_rows), std::move(short_prov));
    Dataset l = sorted_keep_opportunity(d, std::move(long_rows), std::move(long_prov));
    s.name = d.name + ":short";
    l.name = d.name + ":long";
    return {std::move(s), std::move(l)};
}

Dataset random_window(const Dataset& d, int length, std::uint64_t seed, bool reindex) {
    if (length < 1) throw ConfigError("window_length", "must be >= 1");
    const auto len = static_cast<std::size_t>(length);
    std::vector<ObservationRow> rows;
    rows.reserve(d.rows.size());
    for (const auto& p : pairs(d)) {
        std::size_t start = 0, keep = p.length;
        if (p.length > len) {
            auto gen = substream(seed, "window", p.student_id, p.kc_id);
            start = std::uniform_int_distribution<std::size_t>(0, p.length - len)(gen);
            keep = len;
        }
        for (std::size_t i = 0; i < keep; ++i) {
            ObservationRow r = d.rows[p.first_row + start + i];
            if (reindex) r.opportunity = static_cast<int>(i);
            rows.push_back(std::move(r));
        }
    }
    auto prov = d.provenance;
    prov["refit"] = "random_window";
    prov["window_length"] = std::to_string(length);
    prov["window_seed"] = std::to_string(seed);
    prov["window_reindex"] = reindex ? "true" : "false";
    prov["window_dropped_obs"] = std::to_string(d.rows.size() - rows.size());
    return sorted_keep_opportunity(d, std::move(rows), std::move(prov));
}

ProtocolResult run_protocol(const Dataset& d, const RefitPlan& plan, const ModelSpec& spec, const FitConfig& cfg,
                            int jobs) {
    plan.validate();
    ProtocolResult out;
    out.eligibility.dataset = d.name;

    auto fail = [&](Eligibility why, std::string detail) {
        out.eligibility.eligible = false;
        out.eligibility.reason = why;
        out.eligibility.detail = std::move(detail);
        return out;
    };

    std::vector<std::pair<std::string, Dataset>> conditions;
    const std::size_t max_len = [&] {
        std::size_t m = 0;
        for (const auto& p : pairs(d)) m = std::max(m, p.length);
        return m;
    }();

    switch (plan.kind) {
        case RefitKind::TRUNCATE:
            if (max_len <= static_cast<std::size_t>(plan.depth_or_threshold))
                return fail(Eligibility::NO_LONG_PAIRS,
                            "no pair longer than " + std::to_string(plan.depth_or_threshold) + " attempts");
            conditions.emplace_back("full", d);
            conditions.emplace_back("truncated", truncate(d, plan.depth_or_threshold));
            break;
        case RefitKind::RANDOM_WINDOW:
            if (max_len <= static_cast<std::size_t>(plan.window_length))
                return fail(Eligibility::NO_LONG_PAIRS,
                            "no pair longer than " + std::to_string(plan.window_length) + " attempts");
            conditions.emplace_back("full", d);
            conditions.emplace_back("windowed",
                                    random_window(d, plan.window_length, plan.seed, plan.reindex_opportunities));
            break;
        case RefitKind::STRATIFY: {
            auto [short_d, long_d] = stratify(d, plan.depth_or_threshold);
            for (const auto* s : {&short_d, &long_d}) {
                const std::size_t ns = count_levels(*s, true), nk = count_levels(*s, false);
                if (ns < 2 || nk < 2)
                    return fail(Eligibility::INSUFFICIENT_STRATUM,
                                s->name + " has " + std::to_string(ns) + " student(s) and " + std::to_string(nk) +
                                    " KC(s); need at least 2 of each");
            }
            conditions.emplace_back("short", std::move(short_d));
            conditions.emplace_back("long", std::move(long_d));
            break;
        }
    }

    auto run_one = [&spec, &cfg](const std::string& name, const Dataset& data) {
        try {
            return fit(data, spec, cfg);
        } catch (const std::exception& e) {
            throw RefitError(name, e.what());
        }
    };
    if (jobs > 1) {
        std::vector<std::future<FitResult>> futures;
        for (const auto& [name, data] : conditions)
            futures.push_back(std::async(std::launch::async, run_one, std::cref(name), std::cref(data)));
        for (std::size_t i = 0; i < conditions.size(); ++i) out.fits.emplace(conditions[i].first, futures[i].get());
    } else {
        for (const auto& [name, data] : conditions) out.fits.emplace(name, run_one(name, data));
    }

    out.eligibility.eligible = true;
    out.eligibility.reason = Eligibility::OK;
    const auto& first = out.fits.at(conditions[0].first);
    const auto& second = out.fits.at(conditions[1].first);
    if (plan.kind == RefitKind::STRATIFY) {
        if (first.singular || second.singular)
            return fail(Eligibility::SINGULAR_STRATUM, std::string(first.singular ? "short" : "long") + " stratum fit is singular");
    } else {
        if (first.singular) return fail(Eligibility::SINGULAR_FULL, "full-data fit is singular");
        if (second.singular) return fail(Eligibility::SINGULAR_TRANSFORMED, conditions[1].first + " fit is singular");
    }
    return out;
}

}  // namespace lcsens
