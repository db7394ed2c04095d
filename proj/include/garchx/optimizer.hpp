#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace garchx {

/// Objective callback: returns f(x) and writes the gradient into *grad when
/// it is non-null. Returning a non-finite value marks x as unusable.
using ObjectiveFn = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

/// Returns an inverse-Hessian approximation at x (used for the first step and
/// for restarts after a failed line search).
using InverseHessianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd& x)>;

struct BoxMinimizerOptions {
    double tol = 1e-8;
    int max_iter = 500;
};

struct BoxMinimizerResult {
    Eigen::VectorXd x;
    double value = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::string message;
    std::vector<double> trace;  ///< objective at every accepted iterate, starting with x0
};

/// Minimizes f over {x >= lower} with projected BFGS.
///
/// The free set excludes coordinates within epsilon of their bound whose
/// gradient pushes outward (Bertsekas' projected Newton rule); the BFGS
/// inverse Hessian is restricted to the free set, and an Armijo backtracking
/// search runs along the projected path. Converges when the relative
/// objective change is below tol and the relative step below sqrt(tol), or
/// when the projected gradient vanishes.
[[nodiscard]] BoxMinimizerResult minimize_box(const ObjectiveFn& f, Eigen::VectorXd x0,
                                              const Eigen::VectorXd& lower, const InverseHessianFn& inv_hessian,
                                              const BoxMinimizerOptions& opts = {});

}  // namespace garchx
