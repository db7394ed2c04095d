#include "garchx/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace garchx {

std::string to_string(SelectionMethod method) {
    return method == SelectionMethod::by_fdr ? "by" : "bonferroni";
}

SelectionMethod parse_selection_method(const std::string& name) {
    if (name == "by" || name == "by_fdr" || name == "BY" || name == "BY_FDR") return SelectionMethod::by_fdr;
    if (name == "bonferroni") return SelectionMethod::bonferroni;
    throw std::invalid_argument("unknown selection method '" + name + "' (expected by or bonferroni)");
}

double wald_stat(const FitResult& fit, std::size_t k) {
    const ModelSpec& spec = fit.spec;
    if (k < 1 || k > spec.d) throw std::out_of_range("covariate index out of range");
    const double gamma = fit.theta_hat.gamma(k - 1);
    if (gamma == 0.0) return 0.0;
    const auto j = static_cast<Eigen::Index>(spec.gamma_offset() + k - 1);
    const double var = fit.Sigma_hat(j, j);
    if (!(var > 0.0)) {
        std::ostringstream msg;
        msg << "nonpositive sandwich variance " << var << " for gamma" << k;
        throw NumericalError(msg.str());
    }
    return std::sqrt(static_cast<double>(fit.n)) * gamma / std::sqrt(var);
}

double p_value(double t) { return 0.5 * std::erfc(std::abs(t) / std::numbers::sqrt2); }

double harmonic(std::size_t d) {
    double h = 0.0;
    for (std::size_t l = d; l >= 1; --l) h += 1.0 / static_cast<double>(l);
    return h;
}

SelectionResult by_fdr_select(std::span<const double> pvalues, double alpha, SelectionMethod method) {
    if (pvalues.empty()) throw std::invalid_argument("no p-values to test");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    for (double p : pvalues) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p-values must lie in [0, 1]");
    }
    const std::size_t d = pvalues.size();
    const double hd = harmonic(d);
    const double dd = static_cast<double>(d);

    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pvalues[a] < pvalues[b]; });

    SelectionResult res;
    res.method = method;
    res.alpha = alpha;
    res.reports.resize(d);
    for (std::size_t k = 0; k < d; ++k) res.reports[k] = TestReport{k + 1, 0.0, pvalues[k], 0.0};

    if (method == SelectionMethod::by_fdr) {
        for (std::size_t r = d; r >= 1; --r) {
            if (pvalues[order[r - 1]] <= static_cast<double>(r) / dd * alpha / hd) {
                res.cutoff_index = r;
                break;
            }
        }
        for (std::size_t r = 0; r < res.cutoff_index; ++r) res.selected.push_back(order[r] + 1);
    } else {
        for (std::size_t k = 0; k < d; ++k) {
            if (pvalues[k] <= alpha / dd) res.selected.push_back(k + 1);
        }
        res.cutoff_index = res.selected.size();
    }
    std::sort(res.selected.begin(), res.selected.end());

    res.adjusted_p.assign(d, 1.0);
    double running = 1.0;
    for (std::size_t r = d; r >= 1; --r) {
        const std::size_t idx = order[r - 1];
        running = std::min(running, dd * hd / static_cast<double>(r) * pvalues[idx]);
        res.adjusted_p[idx] = std::min(1.0, running);
    }
    return res;
}

SelectionMetrics selection_metrics(std::span<const std::size_t> selected, std::span<const std::size_t> relevant,
                                   std::size_t d) {
    std::vector<char> in_sel(d + 1, 0), in_rel(d + 1, 0);
    for (std::size_t k : selected) {
        if (k < 1 || k > d) throw std::out_of_range("selected index out of range");
        in_sel[k] = 1;
    }
    for (std::size_t k : relevant) {
        if (k < 1 || k > d) throw std::out_of_range("relevant index out of range");
        in_rel[k] = 1;
    }
    SelectionMetrics m;
    for (std::size_t k = 1; k <= d; ++k) {
        if (in_sel[k] && in_rel[k]) ++m.corr_selected;
        if (in_sel[k] && !in_rel[k]) ++m.incorr_selected;
        if (!in_sel[k] && !in_rel[k]) ++m.corr_excluded;
        if (!in_sel[k] && in_rel[k]) ++m.incorr_excluded;
    }
    return m;
}

InfoCriteria info_criteria(double loglik, std::size_t k_params, std::size_t n) {
    if (n < 1) throw std::invalid_argument("information criteria need n >= 1");
    InfoCriteria ic;
    ic.loglik = loglik;
    ic.k_params = k_params;
    ic.n = n;
    const double k = static_cast<double>(k_params);
    ic.aic = -2.0 * loglik + 2.0 * k;
    ic.bic = -2.0 * loglik + k * std::log(static_cast<double>(n));
    return ic;
}

Dataset subset_covariates(const Dataset& data, std::span<const std::size_t> columns) {
    Dataset out;
    out.eps = data.eps;
    out.presample_eps2 = data.presample_eps2;
    out.presample_sigma2 = data.presample_sigma2;
    out.X.resize(static_cast<Eigen::Index>(data.n()), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c) {
        const std::size_t k = columns[c];
        if (k < 1 || k > data.d()) throw std::out_of_range("covariate column out of range");
        if (data.X.rows() > 0) out.X.col(static_cast<Eigen::Index>(c)) = data.X.col(static_cast<Eigen::Index>(k - 1));
        if (!data.presample_X.empty()) out.presample_X.push_back(data.presample_X[k - 1]);
    }
    return out;
}

SelectionResult test_covariates(const FitResult& full, double alpha, SelectionMethod method) {
    const std::size_t d = full.spec.d;
    std::vector<double> t(d), p(d);
    for (std::size_t k = 1; k <= d; ++k) {
        t[k - 1] = wald_stat(full, k);
        p[k - 1] = p_value(t[k - 1]);
    }
    SelectionResult res = by_fdr_select(p, alpha, method);
    for (std::size_t k = 0; k < d; ++k) {
        const auto j = static_cast<Eigen::Index>(full.spec.gamma_offset() + k);
        res.reports[k].t_stat = t[k];
        res.reports[k].sigma_kk = full.Sigma_hat(j, j);
    }
    return res;
}

VariableSelection select_variables(const ModelSpec& spec, const Dataset& data, double alpha, SelectionMethod method,
                                   const FitOptions& opts) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    VariableSelection out;
    out.full = fit_qmle(spec, data, opts);
    const std::size_t n = data.n();
    out.ic_full = info_criteria(out.full.loglik, spec.dim(), n);

    if (spec.d == 0) {
        out.selection.method = method;
        out.selection.alpha = alpha;
        out.null_fit = out.full;
        out.ic_null = out.ic_selected = out.ic_full;
        return out;
    }

    out.selection = test_covariates(out.full, alpha, method);

    const ModelSpec null_spec{spec.p, spec.q, 0};
    out.null_fit = fit_qmle(null_spec, subset_covariates(data, {}), opts);
    out.ic_null = info_criteria(out.null_fit.loglik, null_spec.dim(), n);

    const auto& sel = out.selection.selected;
    if (sel.empty()) {
        out.ic_selected = out.ic_null;
    } else if (sel.size() == spec.d) {
        out.selected_fit = out.full;
        out.ic_selected = out.ic_full;
    } else {
        const ModelSpec sel_spec{spec.p, spec.q, sel.size()};
        out.selected_fit = fit_qmle(sel_spec, subset_covariates(data, sel), opts);
        out.ic_selected = info_criteria(out.selected_fit->loglik, sel_spec.dim(), n);
    }
    return out;
}

}  // namespace garchx
