#pragma once

#include "garchx/qmle.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace garchx {

enum class SelectionMethod { by_fdr, bonferroni };

[[nodiscard]] std::string to_string(SelectionMethod method);
/// Accepts "by", "by_fdr" and "bonferroni".
[[nodiscard]] SelectionMethod parse_selection_method(const std::string& name);

struct TestReport {
    std::size_t k = 0;  ///< 1-based covariate index
    double t_stat = 0.0;
    double p_value = 0.5;
    double sigma_kk = 0.0;  ///< diagonal of Sigma_hat for gamma_k; near zero flags a degenerate test
};

struct SelectionResult {
    std::vector<TestReport> reports;
    SelectionMethod method = SelectionMethod::by_fdr;
    double alpha = 0.05;
    std::size_t cutoff_index = 0;       ///< number of rejected hypotheses
    std::vector<std::size_t> selected;  ///< 1-based, ascending
    std::vector<double> adjusted_p;     ///< BY step-up adjusted p-values, input order
};

struct SelectionMetrics {
    std::size_t corr_selected = 0;
    std::size_t incorr_selected = 0;
    std::size_t corr_excluded = 0;
    std::size_t incorr_excluded = 0;

    friend bool operator==(const SelectionMetrics&, const SelectionMetrics&) = default;
};

struct InfoCriteria {
    double loglik = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    std::size_t k_params = 0;
    std::size_t n = 0;
};

/// sqrt(n) gamma_k / sqrt(Sigma_hat[j, j]) for the 1-based covariate k.
[[nodiscard]] double wald_stat(const FitResult& fit, std::size_t k);

/// One-sided chi-bar-square p-value, 1 - Phi(|t|).
[[nodiscard]] double p_value(double t);

/// Harmonic number sum_{l=1}^d 1/l.
[[nodiscard]] double harmonic(std::size_t d);

/// Benjamini-Yekutieli step-up (or Bonferroni) over p-values in covariate
/// order. Ties are broken by original index; ties at the cutoff are kept.
[[nodiscard]] SelectionResult by_fdr_select(std::span<const double> pvalues, double alpha,
                                            SelectionMethod method = SelectionMethod::by_fdr);

[[nodiscard]] SelectionMetrics selection_metrics(std::span<const std::size_t> selected,
                                                 std::span<const std::size_t> relevant, std::size_t d);

[[nodiscard]] InfoCriteria info_criteria(double loglik, std::size_t k_params, std::size_t n);

/// Dataset restricted to the given 1-based covariate columns.
[[nodiscard]] Dataset subset_covariates(const Dataset& data, std::span<const std::size_t> columns);

struct VariableSelection {
    FitResult full;
    SelectionResult selection;
    std::optional<FitResult> selected_fit;  ///< empty when nothing is selected
    FitResult null_fit;
    InfoCriteria ic_null;
    InfoCriteria ic_selected;  ///< equals ic_null when nothing is selected
    InfoCriteria ic_full;
};

/// Full fit, per-covariate Wald tests, multiple-testing cutoff, refit on the
/// selected covariates, and the null / selected / full information criteria.
[[nodiscard]] VariableSelection select_variables(const ModelSpec& spec, const Dataset& data, double alpha = 0.05,
                                                 SelectionMethod method = SelectionMethod::by_fdr,
                                                 const FitOptions& opts = {});

/// Selection tests on an existing full-model fit.
[[nodiscard]] SelectionResult test_covariates(const FitResult& full, double alpha, SelectionMethod method);

}  // namespace garchx
