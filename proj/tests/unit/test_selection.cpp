#include "garchx/selection.hpp"
#include "garchx/simulate.hpp"

#include "../support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

using namespace garchx;

namespace {

FitResult fake_fit(std::size_t n, const ModelSpec& spec, const Eigen::VectorXd& theta, const Eigen::MatrixXd& Sigma) {
    FitResult f;
    f.spec = spec;
    f.n = n;
    f.theta_hat = ParamVector(spec, theta);
    f.Sigma_hat = Sigma;
    return f;
}

bool subset(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

/// Upper normal tail by composite Simpson integration of the density.
double simpson_tail(double t) {
    const double a = std::abs(t), b = a + 40.0;
    const int m = 200000;
    const double h = (b - a) / m;
    auto phi = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); };
    double s = phi(a) + phi(b);
    for (int i = 1; i < m; ++i) s += (i % 2 ? 4.0 : 2.0) * phi(a + i * h);
    return s * h / 3.0;
}

}  // namespace

TEST_CASE("wald statistic") {
    const ModelSpec spec{1, 1, 2};
    Eigen::VectorXd theta(5);
    theta << 0.1, 0.2, 0.4, 0.3, 0.0;
    Eigen::MatrixXd Sigma = Eigen::MatrixXd::Identity(5, 5);
    Sigma(3, 3) = 9.0;
    Sigma(4, 4) = 4.0;
    const auto fit = fake_fit(100, spec, theta, Sigma);
    CHECK(wald_stat(fit, 1) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(wald_stat(fit, 2) == 0.0);
    CHECK_THROWS_AS((void)wald_stat(fit, 0), std::out_of_range);
    CHECK_THROWS_AS((void)wald_stat(fit, 3), std::out_of_range);

    auto bad = fit;
    bad.Sigma_hat(3, 3) = 0.0;
    CHECK_THROWS_AS((void)wald_stat(bad, 1), NumericalError);
    bad.theta_hat[4] = 0.0;
    CHECK(wald_stat(bad, 2) == 0.0);  // zero estimate never reads the variance
}

TEST_CASE("wald statistic squared is the one-restriction quadratic form") {
    Rng rng(17);
    for (int rep = 0; rep < 50; ++rep) {
        const ModelSpec spec{1 + rng() % 2, 1, 1 + rng() % 6};
        const auto dim = static_cast<Eigen::Index>(spec.dim());
        Eigen::VectorXd theta(dim);
        for (Eigen::Index i = 0; i < dim; ++i) theta[i] = 0.01 + rng.uniform();
        Eigen::MatrixXd B(dim, dim);
        for (Eigen::Index i = 0; i < dim * dim; ++i) B.data()[i] = rng.normal();
        const Eigen::MatrixXd Sigma = B * B.transpose() + 0.1 * Eigen::MatrixXd::Identity(dim, dim);
        const std::size_t n = 100 + rng() % 5000;
        const auto fit = fake_fit(n, spec, theta, Sigma);
        for (std::size_t k = 1; k <= spec.d; ++k) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
            e[static_cast<Eigen::Index>(spec.gamma_offset() + k - 1)] = 1.0;
            const double r = e.dot(theta);
            const double q = static_cast<double>(n) * r * r / e.dot(Sigma * e);
            const double t = wald_stat(fit, k);
            CHECK(t * t == doctest::Approx(q).epsilon(1e-12));
        }
    }
}

TEST_CASE("p-values") {
    CHECK(p_value(0.0) == 0.5);
    CHECK(std::abs(p_value(1.6449) - 0.05) <= 1e-4);
    CHECK(p_value(-1.6449) == p_value(1.6449));
    for (double t : {0.1, 0.7, 1.2, 1.96, 2.5, 3.3}) {
        CHECK(std::abs(p_value(t) - simpson_tail(t)) <= 1e-12);
        // Half the chi-square(1) survival at t^2 via the regularized gamma series.
        const double x = 0.5 * t * t;
        double term = 1.0, sum = 1.0;
        for (int k = 1; k < 400; ++k) {
            term *= x / (0.5 + k);
            sum += term;
        }
        const double lower = sum * std::exp(-x + 0.5 * std::log(x)) / std::tgamma(1.5);
        CHECK(std::abs(p_value(t) - 0.5 * (1.0 - lower)) <= 1e-12);
    }
    for (double t : {-50.0, -3.0, 0.0, 2.0, 40.0}) CHECK(p_value(t) <= 0.5);
}

TEST_CASE("step-up examples") {
    SUBCASE("d = 3 hand enumeration") {
        const std::vector<double> p{0.001, 0.2, 0.3};
        const auto r = by_fdr_select(p, 0.05);
        CHECK(harmonic(3) == doctest::Approx(11.0 / 6.0).epsilon(1e-15));
        CHECK(r.cutoff_index == 1);
        CHECK(r.selected == std::vector<std::size_t>{1});
        // d H_d = 5.5; suffix minima of 5.5 p_(j) / j.
        CHECK(r.adjusted_p[0] == doctest::Approx(0.0055).epsilon(1e-12));
        CHECK(r.adjusted_p[1] == doctest::Approx(0.55).epsilon(1e-12));
        CHECK(r.adjusted_p[2] == doctest::Approx(0.55).epsilon(1e-12));
    }
    SUBCASE("nothing rejected") {
        const std::vector<double> p(6, 1.0);
        const auto r = by_fdr_select(p, 0.05);
        CHECK(r.cutoff_index == 0);
        CHECK(r.selected.empty());
        for (double a : r.adjusted_p) CHECK(a == 1.0);
    }
    SUBCASE("single test is a level-alpha test") {
        const std::vector<double> p{0.04};
        CHECK(by_fdr_select(p, 0.05).selected == std::vector<std::size_t>{1});
        const std::vector<double> q{0.06};
        CHECK(by_fdr_select(q, 0.05).selected.empty());
    }
    SUBCASE("selection in input order, adjusted p-values in input order") {
        const std::vector<double> p{0.3, 0.0001, 0.2, 0.0002, 0.9};
        const auto r = by_fdr_select(p, 0.05);
        CHECK(r.selected == std::vector<std::size_t>{2, 4});
        CHECK(r.adjusted_p[1] <= r.adjusted_p[3]);
        CHECK(r.adjusted_p[4] == 1.0);
        for (std::size_t k = 0; k < p.size(); ++k) {
            const bool sel = std::find(r.selected.begin(), r.selected.end(), k + 1) != r.selected.end();
            CHECK(sel == (r.adjusted_p[k] <= 0.05));
        }
    }
    SUBCASE("ties at the cutoff are kept together") {
        const std::vector<double> p{0.004, 0.004, 0.5};
        CHECK(by_fdr_select(p, 0.05).selected == std::vector<std::size_t>{1, 2});
    }
    SUBCASE("invalid input") {
        CHECK_THROWS_AS((void)by_fdr_select(std::vector<double>{}, 0.05), std::invalid_argument);
        CHECK_THROWS_AS((void)by_fdr_select(std::vector<double>{0.1}, 0.0), std::invalid_argument);
        CHECK_THROWS_AS((void)by_fdr_select(std::vector<double>{0.1}, 1.0), std::invalid_argument);
        CHECK_THROWS_AS((void)by_fdr_select(std::vector<double>{1.2}, 0.05), std::invalid_argument);
    }
    SUBCASE("Bonferroni") {
        const std::vector<double> p{0.009, 0.011, 0.5, 0.001, 0.0};
        const auto r = by_fdr_select(p, 0.05, SelectionMethod::bonferroni);
        CHECK(r.selected == std::vector<std::size_t>{1, 4, 5});
        CHECK(r.cutoff_index == 3);
    }
}

TEST_CASE("step-up rule agrees with a brute-force scan") {
    Rng rng(2718);
    for (int rep = 0; rep < 3000; ++rep) {
        const std::size_t d = 1 + rng() % 10;
        const auto p = oracle::random_pvalues(rng, d);
        const double alpha = rep % 2 ? 0.05 : 0.01 + 0.2 * rng.uniform();
        CHECK(by_fdr_select(p, alpha).selected == oracle::brute_force_by(p, alpha));
        CHECK(by_fdr_select(p, alpha, SelectionMethod::bonferroni).selected == oracle::brute_force_bonferroni(p, alpha));
    }
}

TEST_CASE("property: lowering a p-value never shrinks the selection") {
    Rng rng(99);
    for (int rep = 0; rep < 2000; ++rep) {
        const std::size_t d = 1 + rng() % 10;
        auto p = oracle::random_pvalues(rng, d);
        const auto before = by_fdr_select(p, 0.05).selected;
        p[rng() % d] *= rng.uniform();
        CHECK(subset(before, by_fdr_select(p, 0.05).selected));
    }
}

TEST_CASE("property: p-values below alpha / (d H_d) are selected by both rules") {
    Rng rng(123);
    for (int rep = 0; rep < 2000; ++rep) {
        const std::size_t d = 1 + rng() % 10;
        const auto p = oracle::random_pvalues(rng, d);
        const auto by = by_fdr_select(p, 0.05).selected;
        const auto bf = by_fdr_select(p, 0.05, SelectionMethod::bonferroni).selected;
        for (std::size_t k = 0; k < d; ++k) {
            if (p[k] <= 0.05 / (static_cast<double>(d) * harmonic(d))) {
                CHECK(std::find(by.begin(), by.end(), k + 1) != by.end());
                CHECK(std::find(bf.begin(), bf.end(), k + 1) != bf.end());
            }
        }
    }
}

TEST_CASE("property: permuting p-values permutes the selection") {
    Rng rng(5);
    for (int rep = 0; rep < 1000; ++rep) {
        const std::size_t d = 2 + rng() % 9;
        const auto p = oracle::random_pvalues(rng, d);
        std::vector<std::size_t> perm(d);
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = d - 1; i > 0; --i) std::swap(perm[i], perm[rng() % (i + 1)]);
        std::vector<double> q(d);
        for (std::size_t i = 0; i < d; ++i) q[i] = p[perm[i]];
        std::vector<std::size_t> mapped;
        for (std::size_t k : by_fdr_select(q, 0.05).selected) mapped.push_back(perm[k - 1] + 1);
        std::sort(mapped.begin(), mapped.end());
        CHECK(mapped == by_fdr_select(p, 0.05).selected);
    }
}

TEST_CASE("selection metrics") {
    const std::vector<std::size_t> rel{1, 3, 4};
    CHECK(selection_metrics(rel, rel, 5) == SelectionMetrics{3, 0, 2, 0});
    CHECK(selection_metrics(std::vector<std::size_t>{}, rel, 5) == SelectionMetrics{0, 0, 2, 3});
    CHECK(selection_metrics(std::vector<std::size_t>{1, 2}, rel, 5) == SelectionMetrics{1, 1, 1, 2});
    CHECK_THROWS_AS((void)selection_metrics(std::vector<std::size_t>{6}, rel, 5), std::out_of_range);
    CHECK_THROWS_AS((void)selection_metrics(std::vector<std::size_t>{0}, rel, 5), std::out_of_range);

    Rng rng(8);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t d = 1 + rng() % 10;
        std::vector<std::size_t> a, b;
        for (std::size_t k = 1; k <= d; ++k) {
            if (rng() % 2) a.push_back(k);
            if (rng() % 2) b.push_back(k);
        }
        const auto m = selection_metrics(a, b, d);
        CHECK(m.corr_selected + m.incorr_excluded == b.size());
        CHECK(m.incorr_selected + m.corr_excluded == d - b.size());
    }
}

TEST_CASE("information criteria") {
    const auto ic = info_criteria(-100.0, 3, 100);
    CHECK(ic.aic == doctest::Approx(206.0));
    CHECK(ic.bic == doctest::Approx(213.8155).epsilon(1e-6));
    const auto none = info_criteria(-50.0, 0, 10);
    CHECK(none.aic == 100.0);
    CHECK(none.bic == 100.0);
    CHECK_THROWS_AS((void)info_criteria(0.0, 1, 0), std::invalid_argument);
}

TEST_CASE("covariate subsets keep the presample") {
    const auto data = simulate_garchx(ScenarioConfig::builtin(1, 5, ShockDist::normal(), 300, 1));
    const std::vector<std::size_t> cols{4, 2};
    const auto sub = subset_covariates(data, cols);
    CHECK(sub.d() == 2);
    CHECK(sub.X.col(0) == data.X.col(3));
    CHECK(sub.X.col(1) == data.X.col(1));
    CHECK(sub.presample_X == std::vector<double>{data.presample_X[3], data.presample_X[1]});
    CHECK(sub.eps == data.eps);
    CHECK_THROWS_AS((void)subset_covariates(data, std::vector<std::size_t>{6}), std::out_of_range);
}

TEST_CASE("end-to-end selection on simulated data") {
    const auto cfg = ScenarioConfig::builtin(1, 5, ShockDist::normal(), 5000, 31);
    const auto data = simulate_garchx(cfg);
    const auto vs = select_variables(cfg.spec, data);
    CHECK(vs.selection.selected == std::vector<std::size_t>{1, 3, 4});
    REQUIRE(vs.selected_fit);
    CHECK(vs.selected_fit->spec == ModelSpec{1, 1, 3});
    CHECK(vs.null_fit.spec == ModelSpec{1, 1, 0});
    CHECK(vs.ic_full.k_params == 8);
    CHECK(vs.ic_selected.k_params == 6);
    CHECK(vs.ic_null.k_params == 3);
    CHECK(vs.ic_selected.bic < vs.ic_null.bic);
    for (const auto& r : vs.selection.reports) {
        CHECK(r.p_value <= 0.5);
        CHECK(r.p_value == p_value(r.t_stat));
    }

    SUBCASE("permuting covariate columns permutes the selection") {
        const std::vector<std::size_t> perm{5, 3, 1, 4, 2};  // new column j holds old column perm[j]
        const auto shuffled = subset_covariates(data, perm);
        const auto vs2 = select_variables(cfg.spec, shuffled);
        std::vector<std::size_t> mapped;
        for (std::size_t k : vs2.selection.selected) mapped.push_back(perm[k - 1]);
        std::sort(mapped.begin(), mapped.end());
        CHECK(mapped == vs.selection.selected);
    }
    SUBCASE("deterministic") {
        const auto again = select_variables(cfg.spec, data);
        CHECK(again.selection.selected == vs.selection.selected);
        CHECK(again.selection.adjusted_p == vs.selection.adjusted_p);
        CHECK(again.ic_selected.bic == vs.ic_selected.bic);
    }
}

TEST_CASE("selection without covariates fits the null model only") {
    auto cfg = ScenarioConfig::builtin(1, 5, ShockDist::normal(), 1000, 3);
    const auto data = subset_covariates(simulate_garchx(cfg), {});
    const auto vs = select_variables(ModelSpec{1, 1, 0}, data);
    CHECK(vs.selection.selected.empty());
    CHECK(vs.selection.reports.empty());
    CHECK_FALSE(vs.selected_fit);
    CHECK(vs.ic_null.bic == vs.ic_full.bic);
    CHECK(vs.ic_selected.bic == vs.ic_null.bic);
}
