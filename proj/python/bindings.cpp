#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dualstop/config.hpp"
#include "dualstop/errors.hpp"
#include "dualstop/evaluation.hpp"
#include "dualstop/net_io.hpp"
#include "dualstop/oracles.hpp"
#include "dualstop/pipeline.hpp"

namespace py = pybind11;
using namespace dualstop;

namespace {

RunConfig config_from(const std::string& text) { return parse_config(nlohmann::json::parse(text, nullptr, true, true)); }

py::dict bounds_dict(const BoundsEstimate& b) {
    py::dict d;
    d["lower_mean"] = b.lower_mean;
    d["lower_se"] = b.lower_se;
    d["upper_mean"] = b.upper_mean;
    d["upper_se"] = b.upper_se;
    d["gap_mean"] = b.gap_mean;
    d["gap_se"] = b.gap_se;
    d["n_eval"] = b.n_eval;
    d["n_repeats"] = b.n_repeats;
    d["repeat_lower"] = b.repeat_lower;
    d["repeat_upper"] = b.repeat_upper;
    return d;
}

// [paths x rows x cols] view of a flat row-major buffer, copied into a new array.
py::array_t<double> cube(const std::vector<double>& flat, std::size_t paths, std::size_t rows, std::size_t cols) {
    py::array_t<double> out({paths, rows, cols});
    std::copy(flat.begin(), flat.end(), out.mutable_data());
    return out;
}

}  // namespace

PYBIND11_MODULE(_dualstop, m) {
    m.doc() = "Primal-dual Bermudan option bounds with neural regression";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ResourceError>(m, "ResourceError", PyExc_MemoryError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
    py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

    m.def("black_scholes_put", &black_scholes_put, py::arg("spot"), py::arg("strike"), py::arg("rate"),
          py::arg("vol"), py::arg("maturity"), py::arg("dividend") = 0.0);
    m.def("black_scholes_call", &black_scholes_call, py::arg("spot"), py::arg("strike"), py::arg("rate"),
          py::arg("vol"), py::arg("maturity"), py::arg("dividend") = 0.0);
    m.def("binomial_bermudan_put", &binomial_bermudan_put, py::arg("spot"), py::arg("strike"), py::arg("rate"),
          py::arg("vol"), py::arg("maturity"), py::arg("exercise_dates"), py::arg("tree_steps"));
    m.def(
        "heston_european_put",
        [](double s0, double v0, double rate, double lam, double sigma, double xi, double rho, double strike,
           double maturity) {
            return heston_european_put({s0, v0, rate, lam, sigma, xi, rho}, strike, maturity);
        },
        py::arg("s0"), py::arg("v0"), py::arg("rate"), py::arg("lam"), py::arg("sigma"), py::arg("xi"),
        py::arg("rho"), py::arg("strike"), py::arg("maturity"));

    m.def(
        "resolve_config", [](const std::string& text) { return to_json(config_from(text)).dump(); },
        py::arg("config_json"), "Validate a JSON configuration and return it with defaults filled in.");
    m.def(
        "describe_plan", [](const std::string& text) { return describe_plan(config_from(text)); },
        py::arg("config_json"));

    m.def(
        "simulate",
        [](const std::string& text, std::size_t paths, std::uint64_t seed) {
            const RunConfig cfg = config_from(text);
            PathBatch b;
            {
                py::gil_scoped_release release;
                b = simulate(PathModel(cfg.model), cfg.grid, paths, seed, cfg.memory_cap);
            }
            const auto steps = static_cast<std::size_t>(b.steps);
            return py::make_tuple(cube(b.states, b.paths, steps + 1, b.state_dim),
                                  cube(b.increments, b.paths, steps, b.brownian_dim));
        },
        py::arg("config_json"), py::arg("paths"), py::arg("seed"),
        "Simulated states [paths, steps+1, state] and Brownian increments [paths, steps, factor].");

    m.def(
        "run",
        [](const std::string& text, std::optional<std::uint64_t> seed, std::optional<std::filesystem::path> out) {
            RunOptions options;
            options.seed = seed;
            options.out = out;
            std::optional<RunOutcome> outcome;
            {
                py::gil_scoped_release release;
                outcome = run_pipeline(config_from(text), options);
            }
            py::dict d = bounds_dict(outcome->bounds);
            d["directory"] = outcome->directory.string();
            d["parameter_count"] = outcome->parameter_count;
            return d;
        },
        py::arg("config_json"), py::arg("seed") = py::none(), py::arg("out") = py::none(),
        "Run the full pipeline and return the pooled bounds.");

    m.def("render_report", &render_report, py::arg("directory"));

    m.def(
        "evaluate_policy",
        [](const std::filesystem::path& policy_dir, const std::string& text, std::size_t paths, std::uint64_t seed) {
            const RunConfig cfg = config_from(text);
            const LoadedPolicy loaded = load_policy(policy_dir);
            if (loaded.manifest.model_hash != model_hash(cfg.model))
                throw ConfigError("policy was trained for a different model");
            PathEstimates e;
            {
                py::gil_scoped_release release;
                EvalOptions options;
                options.mode = cfg.eval_mode;
                options.rebalancing = cfg.rebalancing;
                e = evaluate_policy(loaded.policy, PathModel(cfg.model), paths, seed, options);
            }
            py::dict d;
            d["lower"] = e.lower;
            d["upper"] = e.upper;
            d["plain"] = e.plain;
            d["stop_date"] = e.stop_date;
            d["bounds"] = bounds_dict(bounds_from(e));
            return d;
        },
        py::arg("policy_dir"), py::arg("config_json"), py::arg("paths"), py::arg("seed"),
        "Per-path lower and upper summands of a saved policy on fresh paths.");
}
