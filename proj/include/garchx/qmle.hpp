#pragma once

#include "garchx/model.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace garchx {

/// Lower bound on omega during estimation.
inline constexpr double kOmegaFloor = 1e-10;

/// Weight applied to the score outer products in I_hat.
enum class FourthMomentWeight {
    fourth_minus_one,   ///< w^4 - 1 (default)
    squared_deviation,  ///< (w^2 - 1)^2
};

struct FitOptions {
    double tol = 1e-8;
    int max_iter = 500;
    int multistart = 3;
    double ridge = 1e-8;  ///< relative to the largest eigenvalue of J_hat
    std::uint64_t seed = 0x9A7C4E15ULL;  ///< seeds the random restarts
    FourthMomentWeight weight = FourthMomentWeight::fourth_minus_one;
    std::optional<ParamVector> start;  ///< replaces the default first start

    void validate() const;
};

struct SandwichCovariance {
    Eigen::MatrixXd J;
    Eigen::MatrixXd I;
    Eigen::MatrixXd J_inv;
    Eigen::MatrixXd Sigma;  ///< J^-1 I J^-1
    double condition = 0.0;  ///< condition number of J before any ridge
    bool ridge_applied = false;
};

struct FitResult {
    ModelSpec spec{};
    std::size_t n = 0;
    ParamVector theta_hat;
    VolatilityPath sigma2_path;
    double objective = 0.0;  ///< mean of log sigma2 + eps^2 / sigma2
    double loglik = 0.0;     ///< -(n/2) (objective + log 2 pi)
    Eigen::MatrixXd J_hat;
    Eigen::MatrixXd I_hat;
    Eigen::MatrixXd Sigma_hat;
    double J_condition = 0.0;
    bool ridge_applied = false;
    bool converged = false;
    int iterations = 0;
    int starts_converged = 0;
    std::vector<bool> boundary_mask;
    std::vector<double> objective_trace;  ///< accepted iterates of the winning start
    std::string message;
};

/// Gaussian quasi-likelihood criterion (to be minimized, constants dropped).
[[nodiscard]] double qml_objective(const ModelSpec& spec, const ParamVector& theta, const Dataset& data);

/// Analytic gradient of qml_objective.
[[nodiscard]] Eigen::VectorXd qml_gradient(const ModelSpec& spec, const ParamVector& theta, const Dataset& data);

/// Starting points for fit_qmle: a fixed heuristic start followed by
/// multistart - 1 random ones drawn from opts.seed.
[[nodiscard]] std::vector<ParamVector> starting_points(const ModelSpec& spec, const Dataset& data,
                                                       const FitOptions& opts);

/// Bound-constrained QMLE; keeps the best of the starting points and fills
/// the sandwich covariance at the estimate. Non-convergence is reported via
/// FitResult::converged, not thrown.
[[nodiscard]] FitResult fit_qmle(const ModelSpec& spec, const Dataset& data, const FitOptions& opts = {});

[[nodiscard]] SandwichCovariance sandwich_covariance(const ModelSpec& spec, const Dataset& data,
                                                     const ParamVector& theta, const FitOptions& opts = {});
[[nodiscard]] SandwichCovariance sandwich_covariance(const ModelSpec& spec, const Dataset& data,
                                                     const FitResult& fit, const FitOptions& opts = {});

}  // namespace garchx
