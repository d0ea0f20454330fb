#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "crtiv/ci_engine.hpp"
#include "crtiv/cli.hpp"
#include "crtiv/data_model.hpp"
#include "crtiv/error.hpp"
#include "crtiv/estimators.hpp"
#include "crtiv/identification.hpp"
#include "crtiv/simulation.hpp"

namespace py = pybind11;
using namespace crtiv;

namespace {

std::vector<ClusterSummary> summaries_from_arrays(const std::vector<std::string>& cluster_id, const std::vector<int>& z,
                                                  const std::vector<int>& d, const std::vector<double>& y) {
    if (cluster_id.size() != z.size() || z.size() != d.size() || d.size() != y.size())
        throw Error(ErrorCode::InvalidInput, "cluster_id, z, d and y must have the same length");
    std::vector<UnitRecord> rows(y.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = {cluster_id[i], z[i], d[i], y[i]};
    return summarize(ClusterTrial::from_records(rows));
}

Method parse_method(const std::string& s) {
    if (s == "cl" || s == "cluster_level") return Method::ClusterLevel;
    if (s == "tsls") return Method::TSLS;
    if (s == "er" || s == "effect_ratio") return Method::EffectRatio;
    throw Error(ErrorCode::InvalidInput, "unknown method '" + s + "' (expected cl, tsls or er)");
}

PermutationOptions perm_options(std::uint64_t cap, std::uint64_t draws, std::uint64_t seed, unsigned workers) {
    PermutationOptions o;
    o.cap = cap;
    o.exhaustive = draws == 0;
    o.draws = draws;
    o.seed = seed;
    o.workers = workers;
    return o;
}

py::dict report_dict(const EstimateReport& r) {
    py::dict out;
    out["method"] = std::string(method_tag(r.method));
    out["point"] = r.point;
    out["variance"] = r.variance ? py::cast(*r.variance) : py::none();
    out["region"] = r.region;
    out["alpha"] = r.alpha;
    out["diagnostics"] = r.diagnostics;
    out["warnings"] = r.warnings;
    return out;
}

py::dict run_estimate(const std::vector<ClusterSummary>& s, const std::string& method, double alpha,
                      const std::string& ci, std::uint64_t perm_cap, std::uint64_t perm_draws, std::uint64_t seed,
                      unsigned workers) {
    const Method m = parse_method(method);
    if (m != Method::EffectRatio && ci == "permutation")
        throw Error(ErrorCode::InvalidInput, "the permutation region is only available for the effect ratio");
    EstimateReport r;
    if (m == Method::ClusterLevel) {
        r = estimate_cluster_level(s, alpha);
    } else if (m == Method::TSLS) {
        r = estimate_tsls(s, alpha);
    } else {
        EffectRatioOptions opt;
        if (ci == "permutation") {
            opt.region = RegionMethod::Permutation;
            opt.permutation = perm_options(perm_cap, perm_draws, seed, workers);
        }
        r = estimate_effect_ratio(s, alpha, opt);
    }
    return report_dict(r);
}

std::vector<OracleClusterSpec> specs_from(const std::vector<std::tuple<std::int64_t, std::int64_t, double>>& rows) {
    std::vector<OracleClusterSpec> out;
    for (const auto& [n, n_co, tau] : rows) {
        OracleClusterSpec s{n, n_co, tau, {}};
        s.validate();
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_crtiv, m) {
    m.doc() = "Complier average causal effects in cluster-randomized trials";
    m.attr("__version__") = std::string(kToolVersion);

    static py::exception<Error> exc(m, "CrtivError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            exc((std::string(to_string(e.code())) + ": " + e.what()).c_str());
        }
    });

    py::class_<ClusterSummary>(m, "ClusterSummary")
        .def(py::init<>())
        .def_readwrite("n", &ClusterSummary::n)
        .def_readwrite("y_sum", &ClusterSummary::y_sum)
        .def_readwrite("d_sum", &ClusterSummary::d_sum)
        .def_readwrite("y_bar", &ClusterSummary::y_bar)
        .def_readwrite("d_bar", &ClusterSummary::d_bar)
        .def_readwrite("z", &ClusterSummary::z);

    py::class_<ConfidenceRegion>(m, "Region")
        .def_property_readonly("kind", [](const ConfidenceRegion& r) { return std::string(kind_tag(r.kind)); })
        .def_readonly("lo", &ConfidenceRegion::lo)
        .def_readonly("hi", &ConfidenceRegion::hi)
        .def_readonly("alpha", &ConfidenceRegion::alpha)
        .def("contains", &ConfidenceRegion::contains)
        .def("is_infinite", &ConfidenceRegion::is_infinite)
        .def("length", &ConfidenceRegion::length)
        .def("__repr__", [](const ConfidenceRegion& r) { return "Region(" + format_region(r, 8) + ")"; });

    m.def("summarize", &summaries_from_arrays, py::arg("cluster_id"), py::arg("z"), py::arg("d"), py::arg("y"),
          "Per-cluster sums from unit-level columns.");

    m.def(
        "estimate",
        [](const std::vector<std::string>& cluster_id, const std::vector<int>& z, const std::vector<int>& d,
           const std::vector<double>& y, const std::string& method, double alpha, const std::string& ci,
           std::uint64_t perm_cap, std::uint64_t perm_draws, std::uint64_t seed, unsigned workers) {
            return run_estimate(summaries_from_arrays(cluster_id, z, d, y), method, alpha, ci, perm_cap, perm_draws,
                                seed, workers);
        },
        py::arg("cluster_id"), py::arg("z"), py::arg("d"), py::arg("y"), py::arg("method") = "er",
        py::arg("alpha") = 0.05, py::arg("ci") = "", py::arg("perm_cap") = 2'000'000, py::arg("perm_draws") = 0,
        py::arg("seed") = 0, py::arg("workers") = 1,
        "Point estimate, variance and confidence region. ci='permutation' selects the randomization region "
        "for the effect ratio.");

    m.def(
        "estimate_csv",
        [](const std::string& path, const std::string& method, double alpha, const std::string& ci,
           std::uint64_t perm_cap, std::uint64_t perm_draws, std::uint64_t seed, unsigned workers) {
            return run_estimate(summarize(ingest_csv(path)), method, alpha, ci, perm_cap, perm_draws, seed, workers);
        },
        py::arg("path"), py::arg("method") = "er", py::arg("alpha") = 0.05, py::arg("ci") = "",
        py::arg("perm_cap") = 2'000'000, py::arg("perm_draws") = 0, py::arg("seed") = 0, py::arg("workers") = 1);

    m.def(
        "quadratic_region",
        [](const std::vector<ClusterSummary>& s, double alpha) { return quadratic_region(s, alpha); },
        py::arg("summaries"), py::arg("alpha") = 0.05);

    m.def(
        "permutation_region",
        [](const std::vector<ClusterSummary>& s, double alpha, std::uint64_t cap, std::uint64_t draws,
           std::uint64_t seed, unsigned workers) {
            py::gil_scoped_release release;
            return permutation_region(s, alpha, perm_options(cap, draws, seed, workers));
        },
        py::arg("summaries"), py::arg("alpha") = 0.05, py::arg("cap") = 2'000'000, py::arg("draws") = 0,
        py::arg("seed") = 0, py::arg("workers") = 1);

    using SpecRows = std::vector<std::tuple<std::int64_t, std::int64_t, double>>;
    m.def(
        "method_weights",
        [](const SpecRows& rows, const std::string& method) {
            return method_weights(specs_from(rows), parse_method(method));
        },
        py::arg("specs"), py::arg("method"), "Weights on the cluster CACEs; specs are (n, n_co, tau) rows.");
    m.def(
        "identified_value",
        [](const SpecRows& rows, const std::string& method) {
            return identified_value(specs_from(rows), parse_method(method));
        },
        py::arg("specs"), py::arg("method"));
    m.def(
        "true_cace", [](const SpecRows& rows) { return true_cace(specs_from(rows)); }, py::arg("specs"));

    m.def(
        "simulate",
        [](const std::string& scenario_path, unsigned workers, std::optional<std::uint64_t> seed,
           std::optional<std::size_t> replicates) {
            auto sc = load_scenario(scenario_path);
            if (seed) sc.dgp.seed = *seed;
            if (replicates) sc.replicates = *replicates;
            sc.validate();
            SimReport report;
            {
                py::gil_scoped_release release;
                report = run_scenario(sc, workers);
            }
            py::list cells;
            for (const auto& c : report.cells) {
                py::dict d;
                d["method"] = c.method;
                d["J"] = c.J;
                d["gamma"] = c.gamma;
                d["replicates"] = c.replicates;
                d["skipped"] = c.skipped;
                d["mean_estimate"] = c.mean_estimate;
                d["mean_truth"] = c.mean_truth;
                d["bias_ratio"] = c.bias_ratio;
                d["coverage"] = c.coverage;
                d["mean_ci_length"] = c.mean_ci_length;
                d["infinite_ci_rate"] = c.infinite_ci_rate;
                cells.append(d);
            }
            return cells;
        },
        py::arg("scenario"), py::arg("workers") = 1, py::arg("seed") = py::none(),
        py::arg("replicates") = py::none(), "Runs a scenario file and returns one dict per grid cell.");

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::vector<std::string> full{"crtiv"};
            full.insert(full.end(), args.begin(), args.end());
            std::vector<const char*> argv;
            for (auto& a : full) argv.push_back(a.c_str());
            std::ostringstream out, err;
            const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
