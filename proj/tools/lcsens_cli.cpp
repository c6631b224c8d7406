// lcsens command-line driver: fit, refit, describe, simulate, signature.
//
// Every command writes its artifacts into --out DIR and finishes by writing
// DIR/manifest.json. Exit codes: 0 ok, 1 error, 2 singular fit, 3 ineligible.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "lcsens/corpus.hpp"
#include "lcsens/errors.hpp"
#include "lcsens/fitter.hpp"
#include "lcsens/refit.hpp"
#include "lcsens/serialize.hpp"
#include "lcsens/simulate.hpp"
#include "lcsens/summary.hpp"

namespace fs = std::filesystem;
using namespace lcsens;

namespace {

enum Exit { kOk = 0, kError = 1, kSingular = 2, kIneligible = 3 };

struct Manifest {
    std::string command;
    std::vector<std::string> argv;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    json config = json::object();
    std::optional<std::uint64_t> seed;
    fs::path dir;

    void write(int exit_code, double seconds, const std::string& error = {}) const {
        json j{{"command", command},
               {"argv", argv},
               {"tool_version", LCSENS_VERSION},
               {"inputs", inputs},
               {"config", config},
               {"seed", seed ? json(*seed) : json(nullptr)},
               {"outputs", outputs},
               {"exit_code", exit_code},
               {"wall_clock_seconds", seconds}};
        if (!error.empty()) j["error"] = error;
        write_text_file(dir / "manifest.json", dump(j));
    }
};

struct DataOptions {
    std::string path;
    std::string mapping;
    int min_students = 10;
    int min_opportunities = 2;
    bool no_preprocess = false;
};

void add_data_options(CLI::App* cmd, DataOptions& o) {
    cmd->add_option("data", o.path, "Transaction TSV (canonical or mapped)")->required();
    cmd->add_option("--mapping", o.mapping, "key=value column mapping file");
    cmd->add_option("--min-students", o.min_students, "Drop KCs practiced by fewer students")->capture_default_str();
    cmd->add_option("--min-opportunities", o.min_opportunities, "Drop KCs whose longest pair is shorter")
        ->capture_default_str();
    cmd->add_flag("--no-preprocess", o.no_preprocess, "Skip the KC filter");
}

Dataset load(const DataOptions& o, Manifest& m) {
    if (!fs::exists(o.path)) throw FormatError("input file '" + o.path + "' does not exist");
    ColumnMapping mapping;
    if (!o.mapping.empty()) {
        mapping = ColumnMapping::from_file(o.mapping);
        m.inputs.push_back(o.mapping);
    }
    m.inputs.push_back(o.path);
    Dataset d = load_transactions(o.path, mapping);
    m.config["data"] = {{"min_students", o.min_students},
                        {"min_opportunities", o.min_opportunities},
                        {"preprocess", !o.no_preprocess}};
    return o.no_preprocess ? d : preprocess(d, o.min_students, o.min_opportunities);
}

struct ModelOptions {
    std::string model = "iafm";
    std::string config;
    bool uncorrelated = false;
};

void add_model_options(CLI::App* cmd, ModelOptions& o) {
    cmd->add_option("--model", o.model, "iafm or afm")->check(CLI::IsMember({"iafm", "afm"}))->capture_default_str();
    cmd->add_option("--config", o.config, "FitConfig JSON");
    cmd->add_flag("--uncorrelated", o.uncorrelated, "Diagonal random-effect covariance blocks");
}

std::pair<ModelSpec, FitConfig> model_setup(const ModelOptions& o, Manifest& m) {
    ModelSpec spec{variant_from_string(o.model), !o.uncorrelated};
    FitConfig cfg;
    if (!o.config.empty()) {
        cfg = fit_config_from_json(read_json_file(o.config));
        m.inputs.push_back(o.config);
    }
    cfg.validate();
    m.config["model"] = to_string(spec.variant);
    m.config["correlated"] = spec.correlated;
    m.config["fit"] = to_json(cfg);
    return {spec, cfg};
}

void emit(Manifest& m, const std::string& name, const std::string& text) {
    write_text_file(m.dir / name, text);
    m.outputs.push_back((m.dir / name).string());
}

std::string csv(const std::vector<ComparisonRow>& rows) {
    std::ostringstream s;
    write_comparison_csv(s, rows);
    return s.str();
}

std::string dataset_name(const std::string& path) { return fs::path(path).stem().string(); }

int cmd_fit(const DataOptions& data, const ModelOptions& model, Manifest& m) {
    Dataset d = load(data, m);
    d.name = dataset_name(data.path);
    const auto [spec, cfg] = model_setup(model, m);
    const FitResult f = fit(d, spec, cfg);
    emit(m, "fit.json", dump(to_json(f)));
    const FitSummary s = summarize(f, 0.8, d.name);
    std::ostringstream sc;
    write_summary_csv(sc, std::span<const FitSummary>(&s, 1));
    emit(m, "summary.csv", sc.str());
    if (f.singular) {
        std::cerr << "lcsens: fit is singular (a variance component is below singular_tol)\n";
        return kSingular;
    }
    if (!f.converged) {
        for (const auto& n : f.notes) std::cerr << "lcsens: " << n << "\n";
        return kError;
    }
    return kOk;
}

struct RefitOptions {
    std::string protocol = "truncate";
    int depth = 10;
    std::optional<int> threshold;
    int length = 10;
    std::uint64_t seed = 0;
    bool reindex = false;
    int jobs = 1;
};

int cmd_refit(const DataOptions& data, const ModelOptions& model, const RefitOptions& o, Manifest& m) {
    Dataset d = load(data, m);
    d.name = dataset_name(data.path);
    const auto [spec, cfg] = model_setup(model, m);
    RefitPlan plan;
    plan.kind = refit_kind_from_string(o.protocol);
    plan.depth_or_threshold = o.threshold.value_or(o.depth);
    plan.window_length = o.length;
    plan.seed = o.seed;
    plan.reindex_opportunities = o.reindex;
    plan.validate();
    m.seed = o.seed;
    m.config["refit"] = {{"protocol", to_string(plan.kind)},
                         {"depth_or_threshold", plan.depth_or_threshold},
                         {"window_length", plan.window_length},
                         {"reindex_opportunities", plan.reindex_opportunities},
                         {"seed", plan.seed}};

    const ProtocolResult r = run_protocol(d, plan, spec, cfg, o.jobs);
    for (const auto& [cond, f] : r.fits) emit(m, "fit_" + cond + ".json", dump(to_json(f)));
    emit(m, "eligibility.json", dump(to_json(r.eligibility)));
    if (!r.eligibility.eligible) {
        std::cerr << "lcsens: ineligible (" << to_string(r.eligibility.reason) << "): " << r.eligibility.detail << "\n";
        return kIneligible;
    }
    const std::string a = plan.kind == RefitKind::STRATIFY ? "long" : "full";
    const std::string b = plan.kind == RefitKind::STRATIFY ? "short"
                          : plan.kind == RefitKind::TRUNCATE ? "truncated"
                                                             : "windowed";
    emit(m, "comparison.csv", csv(compare(r.fits.at(a), r.fits.at(b), 0.01, d.name, a, b)));
    return kOk;
}

int cmd_describe(const DataOptions& data, int threshold, Manifest& m) {
    Dataset d = load(data, m);
    m.config["threshold"] = threshold;
    const CorpusStats st = describe(d, threshold);
    std::ostringstream stats, ecdf;
    write_stats_csv(stats, st, dataset_name(data.path));
    write_ecdf_csv(ecdf, st);
    emit(m, "stats.csv", stats.str());
    emit(m, "ecdf.csv", ecdf.str());
    return kOk;
}

SimConfig sim_setup(const std::string& config, std::optional<std::uint64_t> seed, Manifest& m) {
    json j = json::object();
    if (!config.empty()) {
        j = read_json_file(config);
        m.inputs.push_back(config);
    }
    if (seed) j["seed"] = *seed;
    SimConfig c = sim_config_from_json(j);
    m.seed = c.seed;
    m.config["simulation"] = to_json(c);
    return c;
}

int cmd_simulate(const std::string& config, std::optional<std::uint64_t> seed, Manifest& m) {
    const SimConfig c = sim_setup(config, seed, m);
    const Simulation sim = simulate(c);
    std::ostringstream tsv;
    write_tsv(tsv, sim.data);
    emit(m, "data.tsv", tsv.str());
    emit(m, "truth.json", dump(to_json(sim.truth)));
    return kOk;
}

int cmd_signature(const std::string& config, std::optional<std::uint64_t> seed, int depth, const ModelOptions& model,
                  const SignatureThresholds& th, Manifest& m) {
    const SimConfig c = sim_setup(config, seed, m);
    const auto [spec, cfg] = model_setup(model, m);
    m.config["depth"] = depth;
    const SignatureReport rep = signature_experiment(c, depth, spec, cfg, th);
    emit(m, "signature.json", dump(to_json(rep)));
    std::vector<ComparisonRow> rows = rep.truncation;
    rows.insert(rows.end(), rep.stratified.begin(), rep.stratified.end());
    emit(m, "comparison.csv", csv(rows));
    std::cout << "truncation: " << (rep.truncation_pass ? "PASS" : "FAIL") << " (%sd_theta " << rep.pct_sd_theta
              << ", %sd_delta " << rep.pct_sd_delta << ", %delta " << rep.pct_delta << ")\n"
              << "stratify:   " << (rep.stratify_pass ? "PASS" : "FAIL") << " (sd_delta short " << rep.short_sd_delta
              << " long " << rep.long_sd_delta << ", delta short " << rep.short_delta << " long " << rep.long_delta
              << ")\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learning-curve sensitivity toolkit (iAFM/AFM)"};
    app.set_version_flag("--version", std::string(LCSENS_VERSION));
    app.require_subcommand(1);

    std::string out;
    DataOptions data;
    ModelOptions model;
    RefitOptions refit;
    int describe_threshold = 10;
    std::string sim_config;
    std::optional<std::uint64_t> sim_seed;
    int sig_depth = 10;
    SignatureThresholds thresholds;

    auto* fit_cmd = app.add_subcommand("fit", "Fit iAFM/AFM and write fit.json");
    add_data_options(fit_cmd, data);
    add_model_options(fit_cmd, model);

    auto* refit_cmd = app.add_subcommand("refit", "Run a sensitivity protocol");
    add_data_options(refit_cmd, data);
    add_model_options(refit_cmd, model);
    refit_cmd->add_option("--protocol", refit.protocol, "truncate, stratify or window")->capture_default_str();
    refit_cmd->add_option("--depth", refit.depth, "Truncation depth")->capture_default_str();
    refit_cmd->add_option("--threshold", refit.threshold, "Stratification threshold (defaults to --depth)");
    refit_cmd->add_option("--length", refit.length, "Random window length")->capture_default_str();
    refit_cmd->add_option("--seed", refit.seed, "Random window seed")->capture_default_str();
    refit_cmd->add_flag("--reindex", refit.reindex, "Restart opportunity counts at each window start");
    refit_cmd->add_option("--jobs", refit.jobs, "Concurrent fits")->check(CLI::PositiveNumber)->capture_default_str();

    auto* describe_cmd = app.add_subcommand("describe", "Corpus statistics and pair-length ECDF");
    add_data_options(describe_cmd, data);
    describe_cmd->add_option("--threshold", describe_threshold, "Long-pair threshold")->capture_default_str();

    auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic corpus");
    sim_cmd->add_option("--config", sim_config, "SimConfig JSON");
    sim_cmd->add_option("--seed", sim_seed, "Override the config seed");

    auto* sig_cmd = app.add_subcommand("signature", "Truncation and stratification signature on a simulation");
    sig_cmd->add_option("--config", sim_config, "SimConfig JSON");
    sig_cmd->add_option("--seed", sim_seed, "Override the config seed");
    sig_cmd->add_option("--depth", sig_depth, "Truncation depth and stratification threshold")->capture_default_str();
    sig_cmd->add_option("--model", model.model)->check(CLI::IsMember({"iafm", "afm"}))->capture_default_str();
    sig_cmd->add_option("--fit-config", model.config, "FitConfig JSON");
    sig_cmd->add_option("--min-pct-sd-delta", thresholds.min_pct_sd_delta)->capture_default_str();
    sig_cmd->add_option("--max-abs-pct-sd-theta", thresholds.max_abs_pct_sd_theta)->capture_default_str();
    sig_cmd->add_option("--min-pct-delta", thresholds.min_pct_delta)->capture_default_str();

    for (auto* c : {fit_cmd, refit_cmd, describe_cmd, sim_cmd, sig_cmd})
        c->add_option("--out", out, "Run directory")->required();

    CLI11_PARSE(app, argc, argv);

    Manifest m;
    m.command = app.get_subcommands().front()->get_name();
    m.argv.assign(argv, argv + argc);
    m.dir = out;
    const auto t0 = std::chrono::steady_clock::now();
    auto seconds = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

    int code = kError;
    try {
        fs::create_directories(m.dir);
        if (m.command == "fit") code = cmd_fit(data, model, m);
        else if (m.command == "refit") code = cmd_refit(data, model, refit, m);
        else if (m.command == "describe") code = cmd_describe(data, describe_threshold, m);
        else if (m.command == "simulate") code = cmd_simulate(sim_config, sim_seed, m);
        else code = cmd_signature(sim_config, sim_seed, sig_depth, model, thresholds, m);
        m.write(code, seconds());
    } catch (const std::exception& e) {
        std::cerr << "lcsens: error: " << e.what() << "\n";
        if (const auto* empty = dynamic_cast<const EmptyDatasetError*>(&e))
            for (const auto& r : empty->reasons()) std::cerr << "  " << r << "\n";
        try {
            if (fs::is_directory(m.dir)) m.write(kError, seconds(), e.what());
        } catch (const std::exception&) {
        }
        return kError;
    }
    return code;
}
