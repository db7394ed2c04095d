#include "garchx/qmle.hpp"

#include "garchx/detail/filter.hpp"
#include "garchx/optimizer.hpp"
#include "garchx/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace garchx {

namespace {

constexpr double kConditionLimit = 1e12;

/// Mean QML criterion at theta; optionally its gradient and the outer-product
/// matrix J. Returns +inf if the variance path breaks down.
double evaluate(const ModelSpec& spec, const double* theta, const Dataset& data, const Presample& pre,
                Eigen::VectorXd* grad, Eigen::MatrixXd* J) {
    const std::size_t n = data.n();
    const std::size_t dim = spec.dim();
    const double* eps = data.eps.data();
    double sum = 0.0;
    std::ptrdiff_t bad = -1;

    if (grad == nullptr && J == nullptr) {
        bad = detail::run_filter<false>(spec, theta, data, pre, [&](std::size_t t, double s2, const double*) {
            sum += std::log(s2) + eps[t] * eps[t] / s2;
        });
    } else {
        std::vector<double> acc(grad ? dim : 0, 0.0);
        std::vector<double> outer(J ? dim * dim : 0, 0.0);
        bad = detail::run_filter<true>(spec, theta, data, pre, [&](std::size_t t, double s2, const double* g) {
            const double ratio = eps[t] * eps[t] / s2;
            sum += std::log(s2) + ratio;
            if (grad) {
                const double c = (1.0 - ratio) / s2;
                for (std::size_t m = 0; m < dim; ++m) acc[m] += c * g[m];
            }
            if (J) {
                const double c = 1.0 / (s2 * s2);
                for (std::size_t a = 0; a < dim; ++a) {
                    const double ga = c * g[a];
                    for (std::size_t b = 0; b <= a; ++b) outer[a * dim + b] += ga * g[b];
                }
            }
        });
        const double inv_n = 1.0 / static_cast<double>(n);
        if (grad) {
            grad->resize(static_cast<Eigen::Index>(dim));
            for (std::size_t m = 0; m < dim; ++m) (*grad)[static_cast<Eigen::Index>(m)] = acc[m] * inv_n;
        }
        if (J) {
            J->resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
            for (std::size_t a = 0; a < dim; ++a) {
                for (std::size_t b = 0; b <= a; ++b) {
                    const double v = outer[a * dim + b] * inv_n;
                    (*J)(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
                    (*J)(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = v;
                }
            }
        }
    }
    if (bad >= 0) return std::numeric_limits<double>::infinity();
    return sum / static_cast<double>(n);
}

void check_theta(const ModelSpec& spec, const ParamVector& theta) {
    if (!(theta.spec() == spec)) throw std::invalid_argument("parameter vector was built for a different model");
    theta.validate();
}

/// Symmetric inverse through the eigen-decomposition, with the ridge rule.
struct SymmetricInverse {
    Eigen::MatrixXd inverse;
    double condition = 0.0;
    bool ridge_applied = false;
};

SymmetricInverse invert_symmetric(const Eigen::MatrixXd& A, double ridge) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
    if (eig.info() != Eigen::Success) throw NumericalError("eigen-decomposition of J_hat failed");
    const double lmax = eig.eigenvalues().maxCoeff();
    const double lmin = eig.eigenvalues().minCoeff();
    SymmetricInverse out;
    out.condition = (lmin > 0.0) ? lmax / lmin : std::numeric_limits<double>::infinity();

    Eigen::VectorXd lambda = eig.eigenvalues();
    if (!(out.condition <= kConditionLimit)) {
        out.ridge_applied = true;
        lambda.array() += ridge * std::max(lmax, 0.0);
        const double rmin = lambda.minCoeff();
        const double rcond = rmin > 0.0 ? lambda.maxCoeff() / rmin : std::numeric_limits<double>::infinity();
        if (!(rmin > 0.0) || !(rcond <= kConditionLimit)) {
            std::ostringstream msg;
            msg << "J_hat is singular (condition estimate " << out.condition << ", " << rcond
                << " after ridge " << ridge << ")";
            throw NumericalError(msg.str());
        }
    }
    out.inverse = eig.eigenvectors() * lambda.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
    out.inverse = 0.5 * (out.inverse + out.inverse.transpose());
    return out;
}

}  // namespace

void FitOptions::validate() const {
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
    if (max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
    if (multistart < 1) throw std::invalid_argument("multistart must be at least 1");
    if (!(ridge >= 0.0)) throw std::invalid_argument("ridge must be nonnegative");
}

double qml_objective(const ModelSpec& spec, const ParamVector& theta, const Dataset& data) {
    check_theta(spec, theta);
    validate_dataset(spec, data);
    const double value = evaluate(spec, theta.flat().data(), data, resolve_presample(spec, data), nullptr, nullptr);
    if (!std::isfinite(value)) throw NumericalError("conditional variance path is not finite");
    return value;
}

Eigen::VectorXd qml_gradient(const ModelSpec& spec, const ParamVector& theta, const Dataset& data) {
    check_theta(spec, theta);
    validate_dataset(spec, data);
    Eigen::VectorXd grad;
    const double value = evaluate(spec, theta.flat().data(), data, resolve_presample(spec, data), &grad, nullptr);
    if (!std::isfinite(value)) throw NumericalError("conditional variance path is not finite");
    return grad;
}

std::vector<ParamVector> starting_points(const ModelSpec& spec, const Dataset& data, const FitOptions& opts) {
    double var = sample_variance(data.eps);
    if (!(var > 0.0)) var = 1.0;

    std::vector<ParamVector> starts;
    if (opts.start) {
        check_theta(spec, *opts.start);
        starts.push_back(*opts.start);
    } else {
        ParamVector theta(spec);
        theta[0] = 0.1 * var;
        for (std::size_t i = 0; i < spec.p; ++i) theta[spec.alpha_offset() + i] = 0.05 / static_cast<double>(spec.p);
        for (std::size_t j = 0; j < spec.q; ++j) theta[spec.beta_offset() + j] = 0.80 / static_cast<double>(spec.q);
        starts.push_back(theta);
    }

    Eigen::VectorXd x_means = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.d));
    if (spec.d > 0 && data.X.rows() > 0) x_means = data.X.colwise().mean().transpose();

    for (int s = 1; s < opts.multistart; ++s) {
        Rng rng(derive_seed(opts.seed, {static_cast<std::uint64_t>(s)}));
        ParamVector theta(spec);
        const double alpha_total = spec.p > 0 ? 0.02 + 0.28 * rng.uniform() : 0.0;
        const double beta_total = spec.q > 0 ? (0.1 + (0.85 - alpha_total - 0.1) * rng.uniform()) : 0.0;
        const double slack = 1.0 - alpha_total - beta_total;
        const double omega_share = 0.2 + 0.8 * rng.uniform();
        theta[0] = std::max(kOmegaFloor, var * slack * omega_share);
        for (std::size_t i = 0; i < spec.p; ++i) {
            theta[spec.alpha_offset() + i] = alpha_total / static_cast<double>(spec.p);
        }
        for (std::size_t j = 0; j < spec.q; ++j) {
            theta[spec.beta_offset() + j] = beta_total / static_cast<double>(spec.q);
        }
        for (std::size_t k = 0; k < spec.d; ++k) {
            const double m = x_means[static_cast<Eigen::Index>(k)];
            const double u = rng.uniform();
            theta[spec.gamma_offset() + k] =
                m > 0.0 ? u * var * slack * (1.0 - omega_share) / (static_cast<double>(spec.d) * m) : 0.0;
        }
        starts.push_back(theta);
    }
    return starts;
}

SandwichCovariance sandwich_covariance(const ModelSpec& spec, const Dataset& data, const ParamVector& theta,
                                       const FitOptions& opts) {
    check_theta(spec, theta);
    validate_dataset(spec, data);
    const Presample pre = resolve_presample(spec, data);
    const std::size_t dim = spec.dim();
    const double* eps = data.eps.data();
    std::vector<double> jsum(dim * dim, 0.0);
    std::vector<double> isum(dim * dim, 0.0);
    const bool centered = opts.weight == FourthMomentWeight::squared_deviation;

    const auto bad = detail::run_filter<true>(spec, theta.flat().data(), data, pre,
                                              [&](std::size_t t, double s2, const double* g) {
                                                  const double w2 = eps[t] * eps[t] / s2;
                                                  const double kappa = centered ? (w2 - 1.0) * (w2 - 1.0)
                                                                                : w2 * w2 - 1.0;
                                                  const double c = 1.0 / (s2 * s2);
                                                  for (std::size_t a = 0; a < dim; ++a) {
                                                      const double ga = c * g[a];
                                                      for (std::size_t b = 0; b <= a; ++b) {
                                                          const double v = ga * g[b];
                                                          jsum[a * dim + b] += v;
                                                          isum[a * dim + b] += kappa * v;
                                                      }
                                                  }
                                              });
    if (bad >= 0) throw NumericalError("conditional variance path is not finite at the estimate");

    SandwichCovariance out;
    const auto m = static_cast<Eigen::Index>(dim);
    out.J.resize(m, m);
    out.I.resize(m, m);
    const double inv_n = 1.0 / static_cast<double>(data.n());
    for (std::size_t a = 0; a < dim; ++a) {
        for (std::size_t b = 0; b <= a; ++b) {
            const auto ia = static_cast<Eigen::Index>(a);
            const auto ib = static_cast<Eigen::Index>(b);
            out.J(ia, ib) = out.J(ib, ia) = jsum[a * dim + b] * inv_n;
            out.I(ia, ib) = out.I(ib, ia) = isum[a * dim + b] * inv_n;
        }
    }
    const SymmetricInverse inv = invert_symmetric(out.J, opts.ridge);
    out.J_inv = inv.inverse;
    out.condition = inv.condition;
    out.ridge_applied = inv.ridge_applied;
    out.Sigma = out.J_inv * out.I * out.J_inv;
    out.Sigma = 0.5 * (out.Sigma + out.Sigma.transpose());
    return out;
}

SandwichCovariance sandwich_covariance(const ModelSpec& spec, const Dataset& data, const FitResult& fit,
                                       const FitOptions& opts) {
    return sandwich_covariance(spec, data, fit.theta_hat, opts);
}

FitResult fit_qmle(const ModelSpec& spec, const Dataset& data, const FitOptions& opts) {
    opts.validate();
    validate_dataset(spec, data);
    bool all_zero = true;
    for (double e : data.eps) all_zero = all_zero && e == 0.0;
    if (all_zero) throw NumericalError("degenerate data: the return series is identically zero");

    const Presample pre = resolve_presample(spec, data);
    const auto dim = static_cast<Eigen::Index>(spec.dim());
    Eigen::VectorXd lower = Eigen::VectorXd::Zero(dim);
    lower[0] = kOmegaFloor;

    const ObjectiveFn objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
        return evaluate(spec, x.data(), data, pre, grad, nullptr);
    };
    const InverseHessianFn inv_hessian = [&](const Eigen::VectorXd& x) -> Eigen::MatrixXd {
        Eigen::MatrixXd J;
        if (!std::isfinite(evaluate(spec, x.data(), data, pre, nullptr, &J))) return {};
        const double scale = std::max(J.diagonal().maxCoeff(), std::numeric_limits<double>::min());
        J.diagonal().array() += 1e-8 * scale;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(J);
        if (ldlt.info() != Eigen::Success) return {};
        return ldlt.solve(Eigen::MatrixXd::Identity(J.rows(), J.cols()));
    };

    BoxMinimizerOptions mopts;
    mopts.tol = opts.tol;
    mopts.max_iter = opts.max_iter;

    FitResult fit;
    fit.spec = spec;
    fit.n = data.n();

    std::optional<BoxMinimizerResult> best;
    int iterations = 0;
    for (const ParamVector& start : starting_points(spec, data, opts)) {
        BoxMinimizerResult r = minimize_box(objective, start.flat(), lower, inv_hessian, mopts);
        iterations += r.iterations;
        if (r.converged) ++fit.starts_converged;
        if (!std::isfinite(r.value)) continue;
        const bool better = !best || (r.converged && !best->converged) ||
                            (r.converged == best->converged && r.value < best->value);
        if (better) best = std::move(r);
    }
    if (!best) throw NumericalError("no starting point produced a finite quasi-likelihood");

    Eigen::VectorXd x = best->x;
    fit.boundary_mask.assign(static_cast<std::size_t>(dim), false);
    if (x[0] - kOmegaFloor <= opts.tol) {
        x[0] = kOmegaFloor;
        fit.boundary_mask[0] = true;
    }
    for (Eigen::Index i = 1; i < dim; ++i) {
        if (x[i] <= opts.tol) {
            x[i] = 0.0;
            fit.boundary_mask[static_cast<std::size_t>(i)] = true;
        }
    }

    fit.theta_hat = ParamVector(spec, x);
    fit.objective = evaluate(spec, x.data(), data, pre, nullptr, nullptr);
    fit.loglik = -0.5 * static_cast<double>(data.n()) * (fit.objective + std::log(2.0 * std::numbers::pi));
    fit.converged = best->converged;
    fit.iterations = iterations;
    fit.objective_trace = std::move(best->trace);
    fit.message = best->message;
    fit.sigma2_path = volatility_recursion(spec, fit.theta_hat, data);

    const SandwichCovariance cov = sandwich_covariance(spec, data, fit.theta_hat, opts);
    fit.J_hat = cov.J;
    fit.I_hat = cov.I;
    fit.Sigma_hat = cov.Sigma;
    fit.J_condition = cov.condition;
    fit.ridge_applied = cov.ridge_applied;
    return fit;
}

}  // namespace garchx
