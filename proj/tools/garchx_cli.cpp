// garchx: simulate, fit, select and Monte Carlo driver.

#include "garchx/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace garchx;

namespace {

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct CommonOpts {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string format = "structured";
};

struct DataOpts {
    std::string data;                  // dataset file written by `simulate`
    std::vector<std::string> prices;   // one or more dated CSV files
    std::string target;
    std::vector<std::string> covariates;
    std::string date_column;
    std::string target_kind;
    std::string transform;
    std::vector<std::string> column_transforms;  // name=mode
};

struct ModelOpts {
    std::optional<std::size_t> p, q;
};

struct SelectOpts {
    std::optional<double> alpha;
    std::string method;
};

/// Reads the config; relative data paths in it are taken from the config's directory.
json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    json cfg = read_json_file(path);
    if (!cfg.contains("data") || !cfg.at("data").is_object()) return cfg;
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    auto rebase = [&](json& entry) {
        const std::filesystem::path p = entry.get<std::string>();
        if (p.is_relative()) entry = (base / p).lexically_normal().string();
    };
    json& data = cfg.at("data");
    if (data.contains("dataset")) rebase(data.at("dataset"));
    if (data.contains("files")) {
        for (auto& f : data.at("files")) rebase(f);
    }
    return cfg;
}

/// Resolves the input either from a dataset file or from dated price files.
PreparedSeries load_series(const DataOpts& cli, const json& cfg, json& meta) {
    const json dcfg = cfg.value("data", json::object());
    std::string dataset = cli.data.empty() ? dcfg.value("dataset", std::string{}) : cli.data;
    std::vector<std::string> files = cli.prices;
    if (files.empty() && dcfg.contains("files")) files = dcfg.at("files").get<std::vector<std::string>>();
    if (dataset.empty() == files.empty()) throw UsageError("give exactly one of --data or --prices");

    PreparedSeries series;
    if (!dataset.empty()) {
        series.data = read_dataset_csv(dataset, &series.covariate_names);
        meta["input"] = dataset;
        return series;
    }

    SeriesSchema schema;
    schema.target = cli.target.empty() ? dcfg.value("target", std::string{}) : cli.target;
    schema.covariates = cli.covariates.empty() ? dcfg.value("covariates", std::vector<std::string>{}) : cli.covariates;
    schema.date_column = cli.date_column.empty() ? dcfg.value("date_column", schema.date_column) : cli.date_column;
    const std::string delim = dcfg.value("delimiter", std::string(","));
    if (delim.size() != 1) throw UsageError("delimiter must be a single character");
    schema.delimiter = delim[0];
    if (schema.target.empty()) throw UsageError("--target is required with --prices");

    std::vector<fs::path> paths(files.begin(), files.end());
    const SeriesTable table = ingest_csv(paths, schema);

    TransformOptions topt;
    const std::string kind = cli.target_kind.empty() ? dcfg.value("target_kind", std::string("price")) : cli.target_kind;
    if (kind == "price") {
        topt.target = TargetKind::price;
    } else if (kind == "returns") {
        topt.target = TargetKind::returns;
    } else {
        throw UsageError("target kind must be price or returns");
    }
    const std::string mode = cli.transform.empty() ? dcfg.value("transform", to_string(topt.default_mode)) : cli.transform;
    topt.default_mode = parse_covariate_transform(mode);
    if (dcfg.contains("column_transforms")) {
        for (const auto& [name, m] : dcfg.at("column_transforms").items()) {
            topt.per_column[name] = parse_covariate_transform(m.get<std::string>());
        }
    }
    for (const auto& spec : cli.column_transforms) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw UsageError("--column-transform expects name=mode");
        topt.per_column[spec.substr(0, eq)] = parse_covariate_transform(spec.substr(eq + 1));
    }
    series = transform_series(table, topt);

    meta["input"] = files;
    meta["rows_in"] = table.rows_in;
    meta["rows_dropped"] = table.dropped;
    meta["rows_out"] = table.rows();
    meta["rows_dropped_missing"] = table.dropped_missing;
    meta["first_date"] = series.eps_dates.front();
    meta["last_date"] = series.eps_dates.back();
    meta["target"] = table.target_name;
    meta["target_kind"] = kind;
    meta["transform"] = mode;
    return series;
}

ModelSpec resolve_spec(const ModelOpts& cli, const json& cfg, std::size_t d) {
    const json m = cfg.value("model", json::object());
    return ModelSpec{cli.p.value_or(m.value("p", std::size_t{1})), cli.q.value_or(m.value("q", std::size_t{1})), d};
}

FitOptions resolve_fit(const json& cfg, const CommonOpts& common) {
    FitOptions opts = fit_options_from_json(cfg.value("fit", json::object()));
    if (common.seed) opts.seed = *common.seed;
    return opts;
}

std::map<std::string, std::string> flatten(const json& meta) {
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : meta.items()) out[k] = v.is_string() ? v.get<std::string>() : v.dump();
    return out;
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
    } else {
        write_text_file(path, text);
    }
}

// ---------------------------------------------------------------------------

int cmd_simulate(const CommonOpts& common, int scenario, std::size_t d, const std::string& shock, std::size_t n,
                 const std::string& sigma_out) {
    json cfg = load_config(common.config);
    json scfg = cfg.contains("scenario") ? cfg.at("scenario") : cfg;
    if (scenario > 0) scfg["id"] = scenario;
    if (d > 0) scfg["d"] = d;
    if (!shock.empty()) scfg["shock"] = shock;
    if (n > 0) scfg["n"] = n;
    if (common.seed) scfg["seed"] = *common.seed;
    const ScenarioConfig sc = scenario_from_json(scfg);
    const SimulatedSeries sim = simulate_garchx_detailed(sc);
    if (common.out.empty()) throw UsageError("--out is required for simulate");
    write_dataset_csv(common.out, sim.data);
    if (!sigma_out.empty()) {
        std::string text = "t,sigma2,w\n";
        for (std::size_t t = 0; t < sim.sigma2.size(); ++t) {
            text += std::to_string(t + 1) + ',' + json(sim.sigma2[t]).dump() + ',' + json(sim.shocks[t]).dump() + '\n';
        }
        write_text_file(sigma_out, text);
    }
    std::cerr << "simulated " << sc.n << " observations (scenario " << sc.scenario_id << ", d=" << sc.spec.d << ", "
              << sc.shock.label() << ")\n";
    return 0;
}

int cmd_fit(const CommonOpts& common, const DataOpts& dopts, const ModelOpts& mopts) {
    const json cfg = load_config(common.config);
    json meta = json::object();
    PreparedSeries series = load_series(dopts, cfg, meta);
    const ModelSpec spec = resolve_spec(mopts, cfg, series.data.d());
    const FitOptions fit_opts = resolve_fit(cfg, common);
    const FitResult fit = fit_qmle(spec, series.data, fit_opts);
    const ModelSummary summary = summarize_fit(fit, "full", series.covariate_names);

    const ReportFormat fmt = parse_report_format(common.format);
    if (fmt == ReportFormat::dsv) {
        write_output(common.out, to_dsv(summary));
    } else {
        json j = {{"schema_version", kSchemaVersion}, {"kind", "fit"}, {"model", to_json(summary)}};
        j["metadata"] = flatten(meta);
        write_output(common.out, dump_json(j));
    }
    if (!fit.converged) std::cerr << "warning: optimizer did not converge: " << fit.message << '\n';
    return 0;
}

int cmd_select(const CommonOpts& common, const DataOpts& dopts, const ModelOpts& mopts, const SelectOpts& sopts) {
    const json cfg = load_config(common.config);
    const json scfg = cfg.value("selection", json::object());
    json meta = json::object();
    PreparedSeries series = load_series(dopts, cfg, meta);
    const ModelSpec spec = resolve_spec(mopts, cfg, series.data.d());
    if (spec.d == 0) throw UsageError("selection needs at least one covariate");
    const FitOptions fit_opts = resolve_fit(cfg, common);
    const double alpha = sopts.alpha.value_or(scfg.value("alpha", 0.05));
    const SelectionMethod method =
        parse_selection_method(sopts.method.empty() ? scfg.value("method", std::string("by")) : sopts.method);

    const VariableSelection vs = select_variables(spec, series.data, alpha, method, fit_opts);
    SelectionReport report = make_selection_report(vs, series.covariate_names);
    report.metadata = flatten(meta);
    if (common.out.empty() || common.out == "-") {
        std::cout << (parse_report_format(common.format) == ReportFormat::dsv ? to_dsv(report)
                                                                               : dump_json(to_json(report)));
    } else {
        emit_report(report, common.out, parse_report_format(common.format));
    }
    return 0;
}

struct McOpts {
    std::optional<std::size_t> reps, workers;
    std::optional<double> alpha;
    std::string method;
    int scenario = 0;
    std::size_t d = 0;
    std::vector<std::string> shocks;
    std::vector<std::size_t> sizes;
    std::string results;
};

int cmd_montecarlo(const CommonOpts& common, const McOpts& mc) {
    json cfg = load_config(common.config);
    json& scfg = cfg["scenario"];
    if (scfg.is_null()) scfg = json::object();
    if (mc.scenario > 0) scfg["id"] = mc.scenario;
    if (mc.d > 0) scfg["d"] = mc.d;
    json& ecfg = cfg["experiment"];
    if (ecfg.is_null()) ecfg = json::object();
    if (mc.reps) ecfg["replications"] = *mc.reps;
    if (mc.workers) ecfg["workers"] = *mc.workers;
    if (mc.alpha) ecfg["alpha"] = *mc.alpha;
    if (!mc.method.empty()) ecfg["method"] = mc.method;
    if (!mc.shocks.empty()) ecfg["shocks"] = mc.shocks;
    if (!mc.sizes.empty()) ecfg["sample_sizes"] = mc.sizes;
    if (common.seed) cfg["seed"] = *common.seed;
    const ExperimentPlan plan = plan_from_json(cfg);

    const auto rows = run_experiment(plan);
    const ReportFormat fmt = parse_report_format(common.format);
    const json results = experiment_results_to_json(plan, rows);
    if (fmt == ReportFormat::dsv) {
        write_output(common.out, format_tables(rows));
        if (!mc.results.empty()) write_text_file(mc.results, dump_json(results));
    } else {
        write_output(common.out, dump_json(results));
    }
    for (const auto& r : rows) {
        if (r.flagged) {
            std::cerr << "warning: cell n=" << r.n << " " << r.shock.label() << " dropped " << r.failures << " of "
                      << r.replications << " replications\n";
        }
    }
    return 0;
}

int cmd_report(const CommonOpts& common, const std::string& input) {
    const json j = read_json_file(input);
    const std::string kind = j.value("kind", std::string{});
    const ReportFormat fmt = parse_report_format(common.format);
    if (kind == "selection") {
        const SelectionReport r = selection_report_from_json(j);
        write_output(common.out, fmt == ReportFormat::dsv ? to_dsv(r) : dump_json(to_json(r)));
    } else if (kind == "montecarlo") {
        const auto rows = experiment_rows_from_json(j);
        write_output(common.out, fmt == ReportFormat::dsv ? format_tables(rows) : dump_json(j));
    } else if (kind == "fit") {
        const ModelSummary m = model_summary_from_json(j.at("model"));
        write_output(common.out, fmt == ReportFormat::dsv ? to_dsv(m) : dump_json(j));
    } else {
        throw UsageError(input + ": not a garchx report");
    }
    return 0;
}

void add_common(CLI::App* app, CommonOpts& c) {
    app->add_option("--config", c.config, "JSON configuration file")->check(CLI::ExistingFile);
    app->add_option("--seed", c.seed, "Master seed (overrides the config)");
    app->add_option("--out", c.out, "Output path ('-' or omitted: stdout)");
    app->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"dsv", "structured"}));
}

void add_data(CLI::App* app, DataOpts& d, ModelOpts& m) {
    app->add_option("--data", d.data, "Dataset file (t,eps,X1..)")->check(CLI::ExistingFile);
    app->add_option("--prices", d.prices, "Dated CSV file(s), joined on the date column")->check(CLI::ExistingFile);
    app->add_option("--target", d.target, "Target column in the price files");
    app->add_option("--covariates", d.covariates, "Covariate columns (default: all others)")->delimiter(',');
    app->add_option("--date-column", d.date_column, "Name of the date column (default: date)");
    app->add_option("--target-kind", d.target_kind, "price or returns")->check(CLI::IsMember({"price", "returns"}));
    app->add_option("--transform", d.transform,
                    "Covariate transform: level, level_scaled, abs_log_return_x100, squared_log_return_x100");
    app->add_option("--column-transform", d.column_transforms, "Per-column transform as name=mode");
    app->add_option("-p", m.p, "ARCH order");
    app->add_option("-q", m.q, "GARCH order");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GARCH-X estimation, covariate selection and Monte Carlo experiments"};
    app.require_subcommand(1);

    CommonOpts common;
    DataOpts dopts;
    ModelOpts mopts;
    SelectOpts sopts;
    McOpts mc;
    int sim_scenario = 0;
    std::size_t sim_d = 0, sim_n = 0;
    std::string sim_shock, sim_sigma, report_in;

    auto* sim = app.add_subcommand("simulate", "Simulate a GARCH-X dataset from a scenario");
    add_common(sim, common);
    sim->add_option("--scenario", sim_scenario, "Scenario id (1-4)");
    sim->add_option("-d", sim_d, "Number of covariates (5 or 8)");
    sim->add_option("--shock", sim_shock, "normal, t5 or t5raw");
    sim->add_option("-n", sim_n, "Sample size");
    sim->add_option("--sigma-out", sim_sigma, "Also write the true variance path and shocks");

    auto* fit = app.add_subcommand("fit", "Fit a GARCH-X model by QMLE");
    add_common(fit, common);
    add_data(fit, dopts, mopts);

    auto* sel = app.add_subcommand("select", "Test every covariate and select with an FDR or Bonferroni rule");
    add_common(sel, common);
    add_data(sel, dopts, mopts);
    sel->add_option("--alpha", sopts.alpha, "Level of the selection rule");
    sel->add_option("--method", sopts.method, "by or bonferroni")->check(CLI::IsMember({"by", "bonferroni"}));

    auto* mcc = app.add_subcommand("montecarlo", "Run a Monte Carlo selection experiment");
    add_common(mcc, common);
    mcc->add_option("--reps", mc.reps, "Replications per cell");
    mcc->add_option("--workers", mc.workers, "Worker threads (0: all cores)");
    mcc->add_option("--alpha", mc.alpha, "Level of the selection rule");
    mcc->add_option("--method", mc.method, "by or bonferroni")->check(CLI::IsMember({"by", "bonferroni"}));
    mcc->add_option("--scenario", mc.scenario, "Scenario id (1-4)");
    mcc->add_option("-d", mc.d, "Number of covariates (5 or 8)");
    mcc->add_option("--shocks", mc.shocks, "Shock distributions")->delimiter(',');
    mcc->add_option("--sizes", mc.sizes, "Sample sizes")->delimiter(',');
    mcc->add_option("--results", mc.results, "Also write structured results when --format dsv");

    auto* rep = app.add_subcommand("report", "Convert a structured report to another format");
    add_common(rep, common);
    rep->add_option("--in", report_in, "Structured report")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*sim) return cmd_simulate(common, sim_scenario, sim_d, sim_shock, sim_n, sim_sigma);
        if (*fit) return cmd_fit(common, dopts, mopts);
        if (*sel) return cmd_select(common, dopts, mopts, sopts);
        if (*mcc) return cmd_montecarlo(common, mc);
        if (*rep) return cmd_report(common, report_in);
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
