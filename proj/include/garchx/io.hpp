#pragma once

#include "garchx/montecarlo.hpp"
#include "garchx/qmle.hpp"
#include "garchx/selection.hpp"
#include "garchx/simulate.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace garchx {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Series ingestion

struct SeriesSchema {
    std::string date_column = "date";
    std::string target;
    std::vector<std::string> covariates;  ///< empty: every other column
    char delimiter = ',';
};

/// Date-aligned target and covariate columns after the cleaning pass.
/// rows_in counts distinct dates over all inputs; rows_in == rows() + dropped.
struct SeriesTable {
    std::vector<std::string> dates;
    std::string target_name;
    std::vector<double> target;
    std::vector<std::string> covariate_names;
    RowMatrix covariates;
    std::size_t rows_in = 0;
    std::size_t dropped = 0;          ///< all rows removed
    std::size_t dropped_missing = 0;  ///< rows removed because of a missing cell
    std::vector<std::string> sources;

    [[nodiscard]] std::size_t rows() const noexcept { return dates.size(); }
};

/// Normalizes an ISO-8601 date (YYYY-MM-DD, optionally followed by a time
/// part); throws std::invalid_argument if it does not parse.
[[nodiscard]] std::string parse_iso_date(const std::string& text);

/// Reads one or more delimiter-separated files (header row required), joins
/// them on the date column (inner join), sorts by date, and drops rows with a
/// missing cell in any used column. Missing cells are empty, NA, NaN, null or ".".
[[nodiscard]] SeriesTable ingest_csv(const std::vector<std::filesystem::path>& paths, const SeriesSchema& schema);
[[nodiscard]] SeriesTable ingest_csv(const std::filesystem::path& path, const SeriesSchema& schema);

// ---------------------------------------------------------------------------
// Transforms

enum class CovariateTransform { level, level_scaled, abs_log_return_x100, squared_log_return_x100 };
enum class TargetKind { price, returns };

[[nodiscard]] std::string to_string(CovariateTransform mode);
[[nodiscard]] CovariateTransform parse_covariate_transform(const std::string& name);

struct TransformOptions {
    TargetKind target = TargetKind::price;
    CovariateTransform default_mode = CovariateTransform::level_scaled;
    std::map<std::string, CovariateTransform> per_column;
};

/// Dataset built from a SeriesTable, with the dates behind every row.
/// eps[t] and X row t share eps_dates[t]; the variance of eps[t] uses the
/// covariate row dated x_dates[t - 1] (presample_x_date for t = 0).
struct PreparedSeries {
    Dataset data;
    std::vector<std::string> eps_dates;
    std::vector<std::string> x_dates;
    std::string presample_x_date;
    std::vector<std::string> covariate_names;
    double target_mean = 0.0;  ///< removed from the returns
};

/// Target: demeaned 100 x log-returns (or demeaned returns as given).
/// Covariates per column: level, level divided by its sample mean, or the
/// absolute / squared 100 x log-return; every output is nonnegative.
[[nodiscard]] PreparedSeries transform_series(const SeriesTable& table, const TransformOptions& opts = {});

// ---------------------------------------------------------------------------
// Dataset files: header "t,eps,X1..Xd" (or named covariates); rows with
// t <= 0 carry the presample (only eps^2 matters there; X only at t = 0).

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data,
                       const std::vector<std::string>& names = {});
[[nodiscard]] Dataset read_dataset_csv(const std::filesystem::path& path, std::vector<std::string>* names = nullptr);

// ---------------------------------------------------------------------------
// Configuration (JSON)

[[nodiscard]] json to_json(const ModelSpec& spec);
[[nodiscard]] json to_json(const ScenarioConfig& cfg);
[[nodiscard]] json to_json(const FitOptions& opts);
[[nodiscard]] json to_json(const ExperimentPlan& plan);

/// Reads {"id", "d", "shock", "n", "burnin", "seed"} plus optional
/// "theta" (flat vector with "p"/"q") and "covariates" overrides.
[[nodiscard]] ScenarioConfig scenario_from_json(const json& j);
[[nodiscard]] FitOptions fit_options_from_json(const json& j);
/// Reads the "scenario", "experiment", "fit" and "seed" keys of a config.
[[nodiscard]] ExperimentPlan plan_from_json(const json& root);

[[nodiscard]] json read_json_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Reports

enum class ReportFormat { dsv, structured };
[[nodiscard]] ReportFormat parse_report_format(const std::string& name);

struct ParameterRow {
    std::string name;
    double estimate = 0.0;
    double std_error = 0.0;  ///< sqrt(Sigma_hat[j, j] / n)
    double t_stat = 0.0;
    bool at_boundary = false;

    friend bool operator==(const ParameterRow&, const ParameterRow&) = default;
};

struct ModelSummary {
    std::string label;
    std::size_t p = 0;
    std::size_t q = 0;
    std::vector<std::string> covariates;
    std::vector<ParameterRow> params;
    std::size_t n = 0;
    double loglik = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    bool converged = false;
    double J_condition = 0.0;

    friend bool operator==(const ModelSummary&, const ModelSummary&) = default;
};

struct CovariateRow {
    std::size_t index = 0;  ///< 1-based input column
    std::string name;
    double estimate = 0.0;
    double std_error = 0.0;
    double t_stat = 0.0;
    double p_value = 0.0;
    double adjusted_p = 0.0;
    double sigma_kk = 0.0;
    bool selected = false;

    friend bool operator==(const CovariateRow&, const CovariateRow&) = default;
};

struct SelectionReport {
    int schema_version = kSchemaVersion;
    std::string method;
    double alpha = 0.05;
    std::size_t n = 0;
    std::size_t cutoff_index = 0;
    std::vector<CovariateRow> covariates;  ///< input column order
    std::vector<std::string> selected;
    ModelSummary full;
    ModelSummary null_model;
    std::optional<ModelSummary> selected_model;
    std::map<std::string, std::string> metadata;

    friend bool operator==(const SelectionReport&, const SelectionReport&) = default;
};

[[nodiscard]] ModelSummary summarize_fit(const FitResult& fit, const std::string& label,
                                         const std::vector<std::string>& covariate_names);
[[nodiscard]] SelectionReport make_selection_report(const VariableSelection& vs,
                                                    const std::vector<std::string>& covariate_names);

[[nodiscard]] json to_json(const ModelSummary& m);
[[nodiscard]] json to_json(const SelectionReport& r);
[[nodiscard]] ModelSummary model_summary_from_json(const json& j);
[[nodiscard]] SelectionReport selection_report_from_json(const json& j);

[[nodiscard]] std::string to_dsv(const ModelSummary& m, char delimiter = ',');
[[nodiscard]] std::string to_dsv(const SelectionReport& r, char delimiter = ',');

[[nodiscard]] json to_json(const AggregateRow& row);
[[nodiscard]] AggregateRow aggregate_row_from_json(const json& j);
/// Structured Monte Carlo results: plan echo plus one record per cell.
[[nodiscard]] json experiment_results_to_json(const ExperimentPlan& plan, const std::vector<AggregateRow>& rows);
[[nodiscard]] std::vector<AggregateRow> experiment_rows_from_json(const json& j);

/// Writes text to path, throwing std::runtime_error if the path is not writable.
void write_text_file(const std::filesystem::path& path, const std::string& text);
/// Stable serialization used for every structured output.
[[nodiscard]] std::string dump_json(const json& j);

void emit_report(const SelectionReport& report, const std::filesystem::path& path, ReportFormat format);
[[nodiscard]] SelectionReport read_selection_report(const std::filesystem::path& path);

}  // namespace garchx
