#include "garchx/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace garchx {

void ShockDist::validate() const {
    if (kind == ShockKind::student_t && !(df > 4.0)) {
        throw std::invalid_argument("Student t shocks need more than 4 degrees of freedom");
    }
}

std::string ShockDist::label() const {
    if (kind == ShockKind::normal) return "Normal";
    std::ostringstream out;
    out << "t" << df;
    if (!standardized) out << "raw";
    return out.str();
}

ShockDist ShockDist::parse(const std::string& label) {
    std::string s = label;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "normal") return normal();
    if (s.size() >= 2 && s[0] == 't') {
        bool standardized = true;
        std::string body = s.substr(1);
        if (body.size() > 3 && body.ends_with("raw")) {
            standardized = false;
            body.resize(body.size() - 3);
        }
        std::size_t used = 0;
        double df = 0.0;
        try {
            df = std::stod(body, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == body.size() && used > 0) {
            ShockDist dist = student_t(df, standardized);
            dist.validate();
            return dist;
        }
    }
    throw std::invalid_argument("unknown shock distribution '" + label + "'");
}

std::vector<double> builtin_gamma(std::size_t d) {
    if (d == 5) return {0.25, 0.0, 0.3, 0.4, 0.0};
    if (d == 8) return {0.2, 0.0, 0.3, 0.3, 0.0, 0.0, 0.0, 0.8};
    throw std::invalid_argument("built-in scenarios are defined for d = 5 or d = 8");
}

ScenarioConfig ScenarioConfig::builtin(int scenario_id, std::size_t d, ShockDist shock, std::size_t n,
                                       std::uint64_t seed) {
    if (scenario_id < 1 || scenario_id > 4) throw std::invalid_argument("scenario id must be 1..4");
    ScenarioConfig cfg;
    cfg.scenario_id = scenario_id;
    const bool two_arch_lags = scenario_id >= 3;
    const std::vector<double> alpha = two_arch_lags ? std::vector<double>{0.2, 0.15} : std::vector<double>{0.2};
    cfg.theta_true = ParamVector::from_parts(0.1, alpha, {0.4}, builtin_gamma(d));
    cfg.spec = cfg.theta_true.spec();
    cfg.shock = shock;
    cfg.covgen.kind = (scenario_id % 2 == 1) ? CovariateKind::lognormal_ar1 : CovariateKind::abs_gaussian_expdecay;
    cfg.covgen.d = d;
    cfg.n = n;
    cfg.seed = seed;
    return cfg;
}

std::vector<std::size_t> ScenarioConfig::relevant_covariates() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < spec.d; ++k) {
        if (theta_true.gamma(k) != 0.0) out.push_back(k + 1);
    }
    return out;
}

void ScenarioConfig::validate() const {
    if (!(theta_true.spec() == spec)) throw std::invalid_argument("scenario parameters do not match its model");
    theta_true.validate();
    shock.validate();
    if (covgen.d != spec.d) throw std::invalid_argument("covariate generator dimension does not match the model");
    if (n == 0) throw std::invalid_argument("sample size must be positive");
}

std::vector<double> gen_shocks(const ShockDist& dist, std::size_t n, Rng& rng) {
    dist.validate();
    std::vector<double> out(n);
    if (dist.kind == ShockKind::normal) {
        for (auto& w : out) w = rng.normal();
        return out;
    }
    const double scale = dist.standardized ? std::sqrt((dist.df - 2.0) / dist.df) : 1.0;
    for (auto& w : out) w = rng.student_t(dist.df) * scale;
    return out;
}

std::vector<double> exp_ar1_path(double phi, double y0, std::span<const double> innovations) {
    std::vector<double> out(innovations.size());
    double y = y0;
    for (std::size_t t = 0; t < innovations.size(); ++t) {
        y = phi * y + innovations[t];
        out[t] = std::exp(y);
    }
    return out;
}

RowMatrix gen_covariates_scenario1(std::size_t d, std::size_t n, std::uint64_t seed, double ar_base,
                                   double ar_step) {
    if (d == 0) throw std::invalid_argument("need at least one covariate");
    RowMatrix X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    std::vector<double> innov(n);
    for (std::size_t i = 1; i <= d; ++i) {
        const double phi = ar_base + ar_step * static_cast<double>(i);
        if (!(std::abs(phi) < 1.0)) throw std::invalid_argument("AR coefficient must lie inside (-1, 1)");
        Rng rng(derive_seed(seed, {kCovariateStream, i}));
        const double y0 = rng.normal() / std::sqrt(1.0 - phi * phi);
        for (auto& e : innov) e = rng.normal();
        // y0 plays the role of y at time -1, so the first kept value already
        // has the stationary law.
        const auto col = exp_ar1_path(phi, y0, innov);
        for (std::size_t t = 0; t < n; ++t) {
            X(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i - 1)) = col[t];
        }
    }
    return X;
}

Eigen::MatrixXd expdecay_covariance(std::size_t d, double decay) {
    Eigen::MatrixXd sigma(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < sigma.rows(); ++i) {
        for (Eigen::Index j = 0; j < sigma.cols(); ++j) {
            sigma(i, j) = std::exp(-decay * static_cast<double>(std::abs(i - j)));
        }
    }
    return sigma;
}

RowMatrix gen_covariates_scenario2(std::size_t d, std::size_t n, std::uint64_t seed, double decay) {
    if (d == 0) throw std::invalid_argument("need at least one covariate");
    const Eigen::LLT<Eigen::MatrixXd> llt(expdecay_covariance(d, decay));
    if (llt.info() != Eigen::Success) throw NumericalError("covariate covariance is not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();

    Rng rng(derive_seed(seed, {kCovariateStream, 0}));
    RowMatrix X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    Eigen::VectorXd z(static_cast<Eigen::Index>(d));
    for (Eigen::Index t = 0; t < X.rows(); ++t) {
        for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = rng.normal();
        X.row(t) = (L * z).cwiseAbs().transpose();
    }
    return X;
}

SimulatedSeries simulate_garchx_detailed(const ScenarioConfig& cfg) {
    cfg.validate();
    const ModelSpec& spec = cfg.spec;
    const ParamVector& theta = cfg.theta_true;
    const std::size_t total = cfg.burnin + cfg.n;
    const std::size_t d = spec.d;

    // Row 0 is the covariate vector at time 0, row t the one at time t.
    RowMatrix X_all;
    if (d > 0) {
        X_all = cfg.covgen.kind == CovariateKind::lognormal_ar1
                    ? gen_covariates_scenario1(d, total + 1, cfg.seed, cfg.covgen.ar_base, cfg.covgen.ar_step)
                    : gen_covariates_scenario2(d, total + 1, cfg.seed, cfg.covgen.decay);
    } else {
        X_all.resize(static_cast<Eigen::Index>(total + 1), 0);
    }

    Rng shock_rng(derive_seed(cfg.seed, {kShockStream}));
    const std::vector<double> w = gen_shocks(cfg.shock, total, shock_rng);

    const Eigen::VectorXd gamma = theta.gammas();
    double level = theta.omega();
    if (d > 0) level += gamma.dot(X_all.colwise().mean().transpose());
    const double persistence = theta.persistence();
    const double v0 = persistence < 1.0 ? level / (1.0 - persistence) : level;

    const std::size_t lag = spec.max_lag();
    // Histories are offset by `lag` so index lag + t - 1 is time t.
    std::vector<double> eps2(lag + total, v0);
    std::vector<double> sig2(lag + total, v0);
    std::vector<double> eps(total);

    for (std::size_t t = 1; t <= total; ++t) {
        const std::size_t at = lag + t - 1;
        double s2 = theta.omega();
        for (std::size_t i = 1; i <= spec.p; ++i) s2 += theta.alpha(i - 1) * eps2[at - i];
        for (std::size_t j = 1; j <= spec.q; ++j) s2 += theta.beta(j - 1) * sig2[at - j];
        if (d > 0) s2 += gamma.dot(X_all.row(static_cast<Eigen::Index>(t - 1)).transpose());
        if (!std::isfinite(s2)) {
            std::ostringstream msg;
            msg << "simulated conditional variance overflowed at t=" << t;
            throw NumericalError(msg.str());
        }
        sig2[at] = s2;
        eps[t - 1] = std::sqrt(s2) * w[t - 1];
        eps2[at] = eps[t - 1] * eps[t - 1];
    }

    SimulatedSeries out;
    const auto start = static_cast<std::ptrdiff_t>(cfg.burnin);
    out.data.eps.assign(eps.begin() + start, eps.end());
    out.data.X = X_all.bottomRows(static_cast<Eigen::Index>(cfg.n));
    if (d > 0) {
        const auto row = X_all.row(start);
        out.data.presample_X.assign(row.data(), row.data() + d);
    }
    // Squared returns at times burnin-lag+1 .. burnin.
    out.data.presample_eps2.assign(eps2.begin() + start, eps2.begin() + start + static_cast<std::ptrdiff_t>(lag));
    out.sigma2.assign(sig2.begin() + start + static_cast<std::ptrdiff_t>(lag), sig2.end());
    out.shocks.assign(w.begin() + start, w.end());
    return out;
}

Dataset simulate_garchx(const ScenarioConfig& cfg) { return simulate_garchx_detailed(cfg).data; }

}  // namespace garchx
