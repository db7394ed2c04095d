#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace garchx {

/// Raised when a computation fails for numerical reasons (overflow,
/// singular matrices, degenerate data) rather than bad arguments.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Orders of a GARCH(p,q)-X model with d exogenous covariates.
struct ModelSpec {
    std::size_t p = 1;  ///< ARCH order (lagged squared returns)
    std::size_t q = 1;  ///< GARCH order (lagged variances)
    std::size_t d = 0;  ///< number of exogenous covariates

    [[nodiscard]] std::size_t dim() const noexcept { return 1 + p + q + d; }
    [[nodiscard]] std::size_t max_lag() const noexcept { return std::max(p, q); }
    [[nodiscard]] std::size_t alpha_offset() const noexcept { return 1; }
    [[nodiscard]] std::size_t beta_offset() const noexcept { return 1 + p; }
    [[nodiscard]] std::size_t gamma_offset() const noexcept { return 1 + p + q; }
    /// Only the constant term is free; allowed, but nothing is dynamic.
    [[nodiscard]] bool degenerate() const noexcept { return p + q == 0 && d == 0; }

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Flattened parameter vector [omega, alpha_1..alpha_p, beta_1..beta_q, gamma_1..gamma_d].
///
/// Construction checks only the length; admissibility (omega > 0, all other
/// entries >= 0) is checked by validate() so that optimizers can build
/// trial points freely.
class ParamVector {
  public:
    ParamVector() = default;
    explicit ParamVector(ModelSpec spec);
    ParamVector(ModelSpec spec, Eigen::VectorXd flat);

    static ParamVector from_parts(double omega, const std::vector<double>& alpha,
                                  const std::vector<double>& beta,
                                  const std::vector<double>& gamma);

    [[nodiscard]] const ModelSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] const Eigen::VectorXd& flat() const noexcept { return values_; }
    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }

    [[nodiscard]] double omega() const { return values_[0]; }
    // Zero-based coefficient accessors.
    [[nodiscard]] double alpha(std::size_t i) const { return values_[index(spec_.alpha_offset(), i, spec_.p)]; }
    [[nodiscard]] double beta(std::size_t j) const { return values_[index(spec_.beta_offset(), j, spec_.q)]; }
    [[nodiscard]] double gamma(std::size_t k) const { return values_[index(spec_.gamma_offset(), k, spec_.d)]; }

    [[nodiscard]] Eigen::VectorXd alphas() const;
    [[nodiscard]] Eigen::VectorXd betas() const;
    [[nodiscard]] Eigen::VectorXd gammas() const;

    double& operator[](std::size_t i) { return values_[static_cast<Eigen::Index>(i)]; }
    double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }

    /// Sum of alpha and beta coefficients; < 1 is needed for a finite
    /// unconditional variance.
    [[nodiscard]] double persistence() const;
    [[nodiscard]] bool stable() const { return persistence() < 1.0; }

    [[nodiscard]] bool admissible() const noexcept;
    /// Throws std::invalid_argument naming the first violated constraint.
    void validate() const;

    /// Parameter names in flattened order: omega, alpha1.., beta1.., gamma1..
    [[nodiscard]] static std::vector<std::string> names(const ModelSpec& spec);

    friend bool operator==(const ParamVector& a, const ParamVector& b) {
        return a.spec_ == b.spec_ && a.values_ == b.values_;
    }

  private:
    [[nodiscard]] static Eigen::Index index(std::size_t offset, std::size_t i, std::size_t count);

    ModelSpec spec_{};
    Eigen::VectorXd values_;
};

/// Observed series used by the recursion.
///
/// Row t of X (zero-based) holds the covariates observed with eps[t]; the
/// variance of eps[t] uses the previous row, so row 0 relies on presample_X.
/// Presample vectors are chronological with the last entry at time 0.
/// Empty presample vectors are filled with defaults, see resolve_presample().
struct Dataset {
    std::vector<double> eps;
    RowMatrix X;
    std::vector<double> presample_eps2;
    std::vector<double> presample_sigma2;
    std::vector<double> presample_X;

    [[nodiscard]] std::size_t n() const noexcept { return eps.size(); }
    [[nodiscard]] std::size_t d() const noexcept { return static_cast<std::size_t>(X.cols()); }
};

struct VolatilityPath {
    std::vector<double> sigma2;
};

/// Presample state with defaults applied and lengths trimmed to exactly
/// p squared returns, q variances and d covariates.
struct Presample {
    std::vector<double> eps2;
    std::vector<double> sigma2;
    std::vector<double> x;
};

/// Checks shapes, non-negativity of covariates and n > dim.
void validate_dataset(const ModelSpec& spec, const Dataset& data);

/// Defaults: squared returns and variances at the sample variance of eps,
/// covariates at the column means of X.
[[nodiscard]] Presample resolve_presample(const ModelSpec& spec, const Dataset& data);

/// sigma2_t = omega + sum alpha_i eps_{t-i}^2 + sum beta_j sigma2_{t-j} + gamma' X_{t-1}.
/// Throws NumericalError naming t when the path overflows.
[[nodiscard]] VolatilityPath volatility_recursion(const ModelSpec& spec, const ParamVector& theta,
                                                  const Dataset& data);

struct VolatilityGradient {
    VolatilityPath path;
    RowMatrix dsigma2;  ///< n x dim, row t is d sigma2_t / d theta
};

/// Recursion and its parameter derivative in one forward pass; presample
/// derivatives are zero.
[[nodiscard]] VolatilityGradient volatility_gradient(const ModelSpec& spec, const ParamVector& theta,
                                                     const Dataset& data);

[[nodiscard]] double sample_variance(const std::vector<double>& x);

}  // namespace garchx
