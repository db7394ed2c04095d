#include "garchx/io.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace garchx;

namespace {

ParamVector make_theta(const ModelSpec& spec, const Eigen::VectorXd& theta) {
    if (static_cast<std::size_t>(theta.size()) != spec.dim()) {
        throw std::invalid_argument("theta has " + std::to_string(theta.size()) + " entries, model expects " +
                                    std::to_string(spec.dim()));
    }
    return ParamVector(spec, theta);
}

ModelSpec spec_for(const Dataset& data, std::size_t p, std::size_t q) { return {p, q, data.d()}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "GARCH(p,q)-X estimation and covariate selection";
    m.attr("SCHEMA_VERSION") = kSchemaVersion;
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<Dataset>(m, "Dataset")
        .def(py::init([](std::vector<double> eps, RowMatrix X, std::vector<double> pre_eps2,
                         std::vector<double> pre_sigma2, std::vector<double> pre_x) {
                 if (X.size() == 0) X.resize(static_cast<Eigen::Index>(eps.size()), 0);
                 Dataset d{std::move(eps), std::move(X), std::move(pre_eps2), std::move(pre_sigma2),
                           std::move(pre_x)};
                 if (static_cast<std::size_t>(d.X.rows()) != d.n()) {
                     throw std::invalid_argument("X must have one row per observation");
                 }
                 return d;
             }),
             py::arg("eps"), py::arg("X") = RowMatrix(), py::arg("presample_eps2") = std::vector<double>{},
             py::arg("presample_sigma2") = std::vector<double>{}, py::arg("presample_X") = std::vector<double>{})
        .def_readonly("eps", &Dataset::eps)
        .def_readonly("X", &Dataset::X)
        .def_readonly("presample_eps2", &Dataset::presample_eps2)
        .def_readonly("presample_sigma2", &Dataset::presample_sigma2)
        .def_readonly("presample_X", &Dataset::presample_X)
        .def_property_readonly("n", &Dataset::n)
        .def_property_readonly("d", &Dataset::d)
        .def("__repr__", [](const Dataset& d) {
            return "<Dataset n=" + std::to_string(d.n()) + " d=" + std::to_string(d.d()) + ">";
        });

    py::class_<FitResult>(m, "FitResult")
        .def_property_readonly("theta", [](const FitResult& f) { return f.theta_hat.flat(); })
        .def_property_readonly("names", [](const FitResult& f) { return ParamVector::names(f.spec); })
        .def_property_readonly("sigma2", [](const FitResult& f) { return f.sigma2_path.sigma2; })
        .def_property_readonly("std_errors",
                               [](const FitResult& f) {
                                   return Eigen::VectorXd(
                                       (f.Sigma_hat.diagonal() / static_cast<double>(f.n)).cwiseSqrt());
                               })
        .def_readonly("n", &FitResult::n)
        .def_readonly("objective", &FitResult::objective)
        .def_readonly("loglik", &FitResult::loglik)
        .def_readonly("J", &FitResult::J_hat)
        .def_readonly("I", &FitResult::I_hat)
        .def_readonly("Sigma", &FitResult::Sigma_hat)
        .def_readonly("J_condition", &FitResult::J_condition)
        .def_readonly("ridge_applied", &FitResult::ridge_applied)
        .def_readonly("converged", &FitResult::converged)
        .def_readonly("iterations", &FitResult::iterations)
        .def_readonly("boundary", &FitResult::boundary_mask)
        .def_readonly("message", &FitResult::message);

    m.def(
        "simulate",
        [](int scenario, std::size_t d, const std::string& shock, std::size_t n, std::uint64_t seed,
           std::size_t burnin) {
            auto cfg = ScenarioConfig::builtin(scenario, d, ShockDist::parse(shock), n, seed);
            cfg.burnin = burnin;
            auto sim = simulate_garchx_detailed(cfg);
            return py::make_tuple(std::move(sim.data), std::move(sim.sigma2));
        },
        py::arg("scenario") = 1, py::arg("d") = 5, py::arg("shock") = "Normal", py::arg("n") = 1000,
        py::arg("seed") = 0, py::arg("burnin") = 500,
        "Simulates a built-in scenario; returns (dataset, true conditional variances).");

    m.def(
        "true_theta",
        [](int scenario, std::size_t d) {
            return ScenarioConfig::builtin(scenario, d, ShockDist::normal(), 1000, 0).theta_true.flat();
        },
        py::arg("scenario") = 1, py::arg("d") = 5);

    m.def(
        "volatility",
        [](const Eigen::VectorXd& theta, const Dataset& data, std::size_t p, std::size_t q) {
            const auto spec = spec_for(data, p, q);
            return volatility_recursion(spec, make_theta(spec, theta), data).sigma2;
        },
        py::arg("theta"), py::arg("data"), py::arg("p") = 1, py::arg("q") = 1);

    m.def(
        "volatility_gradient",
        [](const Eigen::VectorXd& theta, const Dataset& data, std::size_t p, std::size_t q) {
            const auto spec = spec_for(data, p, q);
            return volatility_gradient(spec, make_theta(spec, theta), data).dsigma2;
        },
        py::arg("theta"), py::arg("data"), py::arg("p") = 1, py::arg("q") = 1);

    m.def(
        "objective",
        [](const Eigen::VectorXd& theta, const Dataset& data, std::size_t p, std::size_t q) {
            const auto spec = spec_for(data, p, q);
            return qml_objective(spec, make_theta(spec, theta), data);
        },
        py::arg("theta"), py::arg("data"), py::arg("p") = 1, py::arg("q") = 1);

    m.def(
        "gradient",
        [](const Eigen::VectorXd& theta, const Dataset& data, std::size_t p, std::size_t q) {
            const auto spec = spec_for(data, p, q);
            return qml_gradient(spec, make_theta(spec, theta), data);
        },
        py::arg("theta"), py::arg("data"), py::arg("p") = 1, py::arg("q") = 1);

    m.def(
        "fit",
        [](const Dataset& data, std::size_t p, std::size_t q, const std::string& options) {
            const FitOptions opts = options.empty() ? FitOptions{} : fit_options_from_json(json::parse(options));
            py::gil_scoped_release release;
            return fit_qmle(spec_for(data, p, q), data, opts);
        },
        py::arg("data"), py::arg("p") = 1, py::arg("q") = 1, py::arg("options") = "",
        "Gaussian QMLE; options is a JSON object with the keys of the config 'fit' section.");

    m.def("p_value", &p_value, py::arg("t"));

    m.def(
        "by_fdr_select",
        [](const std::vector<double>& pvalues, double alpha, const std::string& method) {
            const auto r = by_fdr_select(pvalues, alpha, parse_selection_method(method));
            py::dict out;
            out["selected"] = r.selected;
            out["adjusted_p"] = r.adjusted_p;
            out["cutoff_index"] = r.cutoff_index;
            return out;
        },
        py::arg("pvalues"), py::arg("alpha") = 0.05, py::arg("method") = "by");

    m.def(
        "select_report",
        [](const Dataset& data, std::size_t p, std::size_t q, double alpha, const std::string& method,
           std::vector<std::string> names) {
            if (names.empty()) {
                for (std::size_t k = 1; k <= data.d(); ++k) names.push_back("X" + std::to_string(k));
            }
            if (names.size() != data.d()) throw std::invalid_argument("one name per covariate is required");
            const auto m = parse_selection_method(method);
            std::optional<VariableSelection> vs;
            {
                py::gil_scoped_release release;
                vs = select_variables(spec_for(data, p, q), data, alpha, m);
            }
            return dump_json(to_json(make_selection_report(*vs, names)));
        },
        py::arg("data"), py::arg("p") = 1, py::arg("q") = 1, py::arg("alpha") = 0.05, py::arg("method") = "by",
        py::arg("names") = std::vector<std::string>{}, "Runs the selection pipeline; returns the structured report.");

    m.def(
        "run_experiment",
        [](const std::string& config) {
            const auto plan = plan_from_json(json::parse(config));
            std::vector<AggregateRow> rows;
            {
                py::gil_scoped_release release;
                rows = run_experiment(plan);
            }
            return py::make_tuple(dump_json(experiment_results_to_json(plan, rows)), format_tables(rows));
        },
        py::arg("config"), "Runs a Monte Carlo plan given as config JSON; returns (results JSON, tables).");

    m.def(
        "read_dataset",
        [](const std::filesystem::path& path) {
            std::vector<std::string> names;
            auto data = read_dataset_csv(path, &names);
            return py::make_tuple(std::move(data), std::move(names));
        },
        py::arg("path"));
    m.def("write_dataset", &write_dataset_csv, py::arg("path"), py::arg("data"),
          py::arg("names") = std::vector<std::string>{});
}
