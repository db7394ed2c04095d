#pragma once

#include "garchx/model.hpp"
#include "garchx/rng.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace garchx {

enum class ShockKind { normal, student_t };

/// Innovation distribution. Student t draws are rescaled to unit variance
/// unless `standardized` is false.
struct ShockDist {
    ShockKind kind = ShockKind::normal;
    double df = 0.0;
    bool standardized = true;

    static ShockDist normal() { return {}; }
    static ShockDist student_t(double df, bool standardized = true) {
        return {ShockKind::student_t, df, standardized};
    }

    /// Throws std::invalid_argument for df <= 4.
    void validate() const;
    /// "Normal", "t5", "t7", or "t5raw" for unstandardized draws.
    [[nodiscard]] std::string label() const;
    /// Inverse of label().
    static ShockDist parse(const std::string& label);

    friend bool operator==(const ShockDist&, const ShockDist&) = default;
};

enum class CovariateKind { lognormal_ar1, abs_gaussian_expdecay };

struct CovariateGen {
    CovariateKind kind = CovariateKind::lognormal_ar1;
    std::size_t d = 5;
    double ar_base = 0.2;
    double ar_step = 0.01;
    double decay = 0.5;

    friend bool operator==(const CovariateGen&, const CovariateGen&) = default;
};

struct ScenarioConfig {
    int scenario_id = 1;
    ModelSpec spec{};
    ParamVector theta_true;
    ShockDist shock{};
    CovariateGen covgen{};
    std::size_t n = 1000;
    std::size_t burnin = 500;
    std::uint64_t seed = 0;

    /// Built-in scenarios 1-4: GARCH(1,1)-X (1, 2) or GARCH(2,1)-X (3, 4);
    /// lognormal AR(1) covariates (1, 3) or |N(0, Sigma)| with exponential
    /// decay covariance (2, 4). d must be 5 or 8.
    static ScenarioConfig builtin(int scenario_id, std::size_t d, ShockDist shock, std::size_t n,
                                  std::uint64_t seed);

    /// 1-based indices of covariates with nonzero true coefficient.
    [[nodiscard]] std::vector<std::size_t> relevant_covariates() const;

    void validate() const;
};

/// Default coefficient vector for d = 5 or d = 8.
[[nodiscard]] std::vector<double> builtin_gamma(std::size_t d);

/// Sub-stream tags; shocks and covariate columns never share a stream.
inline constexpr std::uint64_t kShockStream = 1;
inline constexpr std::uint64_t kCovariateStream = 2;

[[nodiscard]] std::vector<double> gen_shocks(const ShockDist& dist, std::size_t n, Rng& rng);

/// exp(y_t) with y_t = phi * y_{t-1} + e_t, starting from y0.
[[nodiscard]] std::vector<double> exp_ar1_path(double phi, double y0, std::span<const double> innovations);

/// n x d matrix; column i (1-based) is exp of an AR(1) with coefficient
/// ar_base + ar_step * i, started from its stationary law. Column i draws
/// from derive_seed(seed, {kCovariateStream, i}).
[[nodiscard]] RowMatrix gen_covariates_scenario1(std::size_t d, std::size_t n, std::uint64_t seed,
                                                 double ar_base = 0.2, double ar_step = 0.01);

/// Sigma_ij = exp(-decay * |i - j|).
[[nodiscard]] Eigen::MatrixXd expdecay_covariance(std::size_t d, double decay = 0.5);

/// n x d matrix of i.i.d. rows |Z|, Z ~ N(0, Sigma).
[[nodiscard]] RowMatrix gen_covariates_scenario2(std::size_t d, std::size_t n, std::uint64_t seed,
                                                 double decay = 0.5);

struct SimulatedSeries {
    Dataset data;
    std::vector<double> sigma2;  ///< true conditional variances of data.eps
    std::vector<double> shocks;
};

/// Simulates burnin + n observations and keeps the last n. The returned
/// dataset carries the observable presample (squared returns and the
/// covariate row just before the sample); presample variances are left
/// empty since they are latent.
[[nodiscard]] SimulatedSeries simulate_garchx_detailed(const ScenarioConfig& cfg);
[[nodiscard]] Dataset simulate_garchx(const ScenarioConfig& cfg);

}  // namespace garchx
