#pragma once

#include "garchx/selection.hpp"
#include "garchx/simulate.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace garchx {

struct ExperimentPlan {
    ScenarioConfig scenario;  ///< template; n, shock and seed are overridden per cell
    std::vector<std::size_t> sample_sizes{500, 1000, 5000, 10000};
    std::vector<ShockDist> shocks{ShockDist::normal()};
    std::size_t replications = 200;
    double alpha = 0.05;
    SelectionMethod method = SelectionMethod::by_fdr;
    std::uint64_t seed = 20250101;
    std::size_t workers = 1;  ///< 0 uses the hardware concurrency
    FitOptions fit{};

    void validate() const;
};

struct MeanMetrics {
    double corr_selected = 0.0;
    double incorr_selected = 0.0;
    double corr_excluded = 0.0;
    double incorr_excluded = 0.0;
};

struct IcMeans {
    double bic_full = 0.0;
    double bic_null = 0.0;
    double bic_selected = 0.0;
    double aic_full = 0.0;
    double aic_null = 0.0;
    double aic_selected = 0.0;
};

struct AggregateRow {
    int scenario_id = 1;
    std::size_t n = 0;
    ShockDist shock{};
    std::size_t d = 0;
    std::size_t replications = 0;  ///< attempted
    std::size_t failures = 0;      ///< dropped: non-converged or numerically failed full fits
    bool flagged = false;          ///< failures above 10% of attempts
    MeanMetrics mean_metrics;
    std::vector<double> freq;  ///< per-covariate selection frequency
    IcMeans ic_means;
    double exact_recovery_rate = 0.0;
    double mean_fdp = 0.0;  ///< mean of V / max(R, 1)
};

struct ReplicationOutcome {
    bool ok = false;
    std::string error;
    SelectionMetrics metrics;
    std::vector<std::size_t> selected;
    InfoCriteria ic_full, ic_null, ic_selected;
    bool exact_recovery = false;
    double fdp = 0.0;
};

/// Seed of one replication: a hash of the master seed, the cell and the
/// replication index.
[[nodiscard]] std::uint64_t replication_seed(std::uint64_t master_seed, const ScenarioConfig& cell,
                                             std::size_t replication);

/// simulate -> select_variables -> metrics for one configured dataset.
[[nodiscard]] ReplicationOutcome run_replication(const ScenarioConfig& cfg, double alpha, SelectionMethod method,
                                                 const FitOptions& fit);

/// Runs every (shock, n) cell of the plan. Results do not depend on the
/// number of workers.
[[nodiscard]] std::vector<AggregateRow> run_experiment(const ExperimentPlan& plan);

/// Delimiter-separated tables: a metrics table (rows grouped by d and shock,
/// one column per sample size), a per-covariate frequency table, an
/// information-criteria table and a run summary.
[[nodiscard]] std::string format_tables(const std::vector<AggregateRow>& rows, char delimiter = ',');

/// Inverse of format_tables at the printed precision.
[[nodiscard]] std::vector<AggregateRow> parse_tables(const std::string& text, char delimiter = ',');

}  // namespace garchx
