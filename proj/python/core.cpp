// Python bindings. Structured results cross the boundary as JSON documents
// (the same ones the CLI writes) and arrive in Python as dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "lcsens/corpus.hpp"
#include "lcsens/errors.hpp"
#include "lcsens/fitter.hpp"
#include "lcsens/refit.hpp"
#include "lcsens/serialize.hpp"
#include "lcsens/simulate.hpp"
#include "lcsens/summary.hpp"

namespace py = pybind11;
using namespace lcsens;

namespace {

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::object& o) {
    if (o.is_none()) return json::object();
    return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

ModelSpec model_spec(const std::string& model, bool correlated) { return {variant_from_string(model), correlated}; }

FitConfig fit_config(const py::object& cfg) { return fit_config_from_json(from_py(cfg)); }

py::dict stats_dict(const CorpusStats& s) {
    py::dict d;
    d["n_students"] = s.n_students;
    d["n_kcs"] = s.n_kcs;
    d["n_obs"] = s.n_obs;
    d["n_pairs"] = s.n_pairs;
    d["threshold"] = s.threshold;
    d["pair_length_median"] = s.pair_length_median;
    d["pair_length_max"] = s.pair_length_max;
    d["obs_per_student_median"] = s.obs_per_student_median;
    d["pct_pairs_gt"] = s.pct_pairs_gt;
    d["pct_obs_gt"] = s.pct_obs_gt;
    d["ecdf"] = s.ecdf;
    return d;
}

std::string tsv(const Dataset& d) {
    std::ostringstream out;
    write_tsv(out, d);
    return out.str();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Learning-curve sensitivity analysis: corpora, iAFM/AFM fits, refit protocols, simulation";
    m.attr("__version__") = LCSENS_VERSION;

    // Translators are tried newest first, so the base class goes first.
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

    py::class_<Dataset>(m, "Dataset")
        .def_readonly("name", &Dataset::name)
        .def_property_readonly("n_obs", &Dataset::n_obs)
        .def_property_readonly("n_students", [](const Dataset& d) { return student_ids(d).size(); })
        .def_property_readonly("n_kcs", [](const Dataset& d) { return kc_ids(d).size(); })
        .def_readonly("provenance", &Dataset::provenance)
        .def("to_tsv", &tsv)
        .def("__len__", &Dataset::n_obs)
        .def("__repr__", [](const Dataset& d) {
            return "<Dataset " + d.name + ": " + std::to_string(d.n_obs()) + " rows>";
        });

    m.def(
        "load",
        [](const std::string& path, const std::optional<std::string>& mapping) {
            return load_transactions(path, mapping ? ColumnMapping::from_file(*mapping) : ColumnMapping{});
        },
        py::arg("path"), py::arg("mapping") = py::none(), "Reads a canonical TSV or a mapped transaction export.");
    m.def(
        "from_tsv",
        [](const std::string& text, const std::string& name) {
            std::istringstream in(text);
            return parse_transactions(in, ColumnMapping{}, name);
        },
        py::arg("text"), py::arg("name") = "dataset");
    m.def("save_tsv", [](const std::string& path, const Dataset& d) { save_tsv(path, d); });
    m.def("preprocess", &preprocess, py::arg("dataset"), py::arg("min_students") = 10, py::arg("min_opportunities") = 2);
    m.def(
        "describe", [](const Dataset& d, int threshold) { return stats_dict(describe(d, threshold)); },
        py::arg("dataset"), py::arg("threshold") = 10);

    m.def("truncate", &lcsens::truncate, py::arg("dataset"), py::arg("depth"));
    m.def("stratify", &stratify, py::arg("dataset"), py::arg("threshold"));
    m.def("random_window", &random_window, py::arg("dataset"), py::arg("length"), py::arg("seed"),
          py::arg("reindex") = false);

    m.def(
        "fit",
        [](const Dataset& d, const std::string& model, bool correlated, const py::object& config) {
            const ModelSpec spec = model_spec(model, correlated);
            const FitConfig cfg = fit_config(config);
            FitResult f;
            {
                py::gil_scoped_release release;
                f = fit(d, spec, cfg);
            }
            return to_py(to_json(f));
        },
        py::arg("dataset"), py::arg("model") = "iafm", py::arg("correlated") = true, py::arg("config") = py::none(),
        "Fits the model and returns the fit document.");

    m.def(
        "summarize",
        [](const py::object& fit_doc, double target, const std::string& dataset) {
            return to_py(to_json(summarize(fit_result_from_json(from_py(fit_doc)), target, dataset)));
        },
        py::arg("fit"), py::arg("mastery_target") = 0.8, py::arg("dataset") = "");

    m.def(
        "compare",
        [](const py::object& a, const py::object& b, double floor) {
            py::list out;
            for (const auto& r : compare(fit_result_from_json(from_py(a)), fit_result_from_json(from_py(b)), floor)) {
                py::dict row;
                row["parameter"] = r.parameter;
                row["value_a"] = r.value_a;
                row["value_b"] = r.value_b;
                row["pct_change"] = r.pct_change ? py::object(py::float_(*r.pct_change)) : py::object(py::none());
                row["abs_change"] = r.abs_change;
                out.append(row);
            }
            return out;
        },
        py::arg("a"), py::arg("b"), py::arg("floor") = 0.01);

    m.def(
        "refit",
        [](const Dataset& d, const std::string& kind, int depth, const std::string& model, bool correlated,
           std::uint64_t seed, bool reindex, const py::object& config, int jobs) {
            RefitPlan plan;
            plan.kind = refit_kind_from_string(kind);
            plan.depth_or_threshold = depth;
            plan.window_length = depth;
            plan.seed = seed;
            plan.reindex_opportunities = reindex;
            const ModelSpec spec = model_spec(model, correlated);
            const FitConfig cfg = fit_config(config);
            ProtocolResult r;
            {
                py::gil_scoped_release release;
                r = run_protocol(d, plan, spec, cfg, jobs);
            }
            py::dict fits;
            for (const auto& [cond, f] : r.fits) fits[py::str(cond)] = to_py(to_json(f));
            py::dict out;
            out["eligibility"] = to_py(to_json(r.eligibility));
            out["fits"] = fits;
            return out;
        },
        py::arg("dataset"), py::arg("kind") = "truncate", py::arg("depth") = 10, py::arg("model") = "iafm",
        py::arg("correlated") = true, py::arg("seed") = 0, py::arg("reindex") = false, py::arg("config") = py::none(),
        py::arg("jobs") = 1);

    m.def(
        "simulate",
        [](const py::object& config) {
            const Simulation s = simulate(sim_config_from_json(from_py(config)));
            return py::make_tuple(s.data, to_py(to_json(s.truth)));
        },
        py::arg("config") = py::none(), "Returns (dataset, truth) for a simulation config dict.");

    m.def(
        "signature",
        [](const py::object& config, int depth, const std::string& model) {
            const SimConfig cfg = sim_config_from_json(from_py(config));
            const ModelSpec spec = model_spec(model, true);
            SignatureReport rep;
            {
                py::gil_scoped_release release;
                rep = signature_experiment(cfg, depth, spec, FitConfig{});
            }
            return to_py(to_json(rep));
        },
        py::arg("config"), py::arg("depth") = 10, py::arg("model") = "iafm");
}
