#include "garchx/model.hpp"

#include "garchx/detail/filter.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace garchx {

ParamVector::ParamVector(ModelSpec spec)
    : spec_(spec), values_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.dim()))) {}

ParamVector::ParamVector(ModelSpec spec, Eigen::VectorXd flat) : spec_(spec), values_(std::move(flat)) {
    if (static_cast<std::size_t>(values_.size()) != spec_.dim()) {
        std::ostringstream msg;
        msg << "parameter vector has " << values_.size() << " entries, model needs " << spec_.dim();
        throw std::invalid_argument(msg.str());
    }
}

ParamVector ParamVector::from_parts(double omega, const std::vector<double>& alpha,
                                    const std::vector<double>& beta, const std::vector<double>& gamma) {
    ModelSpec spec{alpha.size(), beta.size(), gamma.size()};
    ParamVector theta(spec);
    theta.values_[0] = omega;
    auto fill = [&](std::size_t offset, const std::vector<double>& v) {
        for (std::size_t i = 0; i < v.size(); ++i) theta.values_[static_cast<Eigen::Index>(offset + i)] = v[i];
    };
    fill(spec.alpha_offset(), alpha);
    fill(spec.beta_offset(), beta);
    fill(spec.gamma_offset(), gamma);
    return theta;
}

Eigen::Index ParamVector::index(std::size_t offset, std::size_t i, std::size_t count) {
    if (i >= count) throw std::out_of_range("coefficient index out of range");
    return static_cast<Eigen::Index>(offset + i);
}

Eigen::VectorXd ParamVector::alphas() const {
    return values_.segment(static_cast<Eigen::Index>(spec_.alpha_offset()), static_cast<Eigen::Index>(spec_.p));
}
Eigen::VectorXd ParamVector::betas() const {
    return values_.segment(static_cast<Eigen::Index>(spec_.beta_offset()), static_cast<Eigen::Index>(spec_.q));
}
Eigen::VectorXd ParamVector::gammas() const {
    return values_.segment(static_cast<Eigen::Index>(spec_.gamma_offset()), static_cast<Eigen::Index>(spec_.d));
}

double ParamVector::persistence() const {
    return values_.segment(1, static_cast<Eigen::Index>(spec_.p + spec_.q)).sum();
}

bool ParamVector::admissible() const noexcept {
    if (static_cast<std::size_t>(values_.size()) != spec_.dim()) return false;
    if (!(values_[0] > 0.0) || !std::isfinite(values_[0])) return false;
    for (Eigen::Index i = 1; i < values_.size(); ++i) {
        if (!(values_[i] >= 0.0) || !std::isfinite(values_[i])) return false;
    }
    return true;
}

void ParamVector::validate() const {
    if (static_cast<std::size_t>(values_.size()) != spec_.dim()) {
        throw std::invalid_argument("parameter vector does not match model dimension");
    }
    if (!(values_[0] > 0.0) || !std::isfinite(values_[0])) {
        throw std::invalid_argument("omega must be positive");
    }
    const auto labels = names(spec_);
    for (Eigen::Index i = 1; i < values_.size(); ++i) {
        if (!(values_[i] >= 0.0) || !std::isfinite(values_[i])) {
            throw std::invalid_argument(labels[static_cast<std::size_t>(i)] + " must be nonnegative");
        }
    }
}

std::vector<std::string> ParamVector::names(const ModelSpec& spec) {
    std::vector<std::string> out{"omega"};
    for (std::size_t i = 1; i <= spec.p; ++i) out.push_back("alpha" + std::to_string(i));
    for (std::size_t j = 1; j <= spec.q; ++j) out.push_back("beta" + std::to_string(j));
    for (std::size_t k = 1; k <= spec.d; ++k) out.push_back("gamma" + std::to_string(k));
    return out;
}

double sample_variance(const std::vector<double>& x) {
    if (x.empty()) return 0.0;
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return ss / static_cast<double>(x.size());
}

void validate_dataset(const ModelSpec& spec, const Dataset& data) {
    if (data.d() != spec.d) {
        std::ostringstream msg;
        msg << "dataset has " << data.d() << " covariates, model expects " << spec.d;
        throw std::invalid_argument(msg.str());
    }
    if (static_cast<std::size_t>(data.X.rows()) != data.n() && spec.d > 0) {
        throw std::invalid_argument("covariate matrix rows do not match the return series length");
    }
    if (data.n() <= spec.dim()) {
        throw std::invalid_argument("sample size must exceed the number of parameters");
    }
    if (!data.presample_eps2.empty() && data.presample_eps2.size() < spec.p) {
        throw std::invalid_argument("presample squared returns shorter than the ARCH order");
    }
    if (!data.presample_sigma2.empty() && data.presample_sigma2.size() < spec.q) {
        throw std::invalid_argument("presample variances shorter than the GARCH order");
    }
    if (!data.presample_X.empty() && data.presample_X.size() != spec.d) {
        throw std::invalid_argument("presample covariate row has the wrong length");
    }
    for (double v : data.eps) {
        if (!std::isfinite(v)) throw std::invalid_argument("return series contains a non-finite value");
    }
    for (Eigen::Index r = 0; r < data.X.rows(); ++r) {
        for (Eigen::Index c = 0; c < data.X.cols(); ++c) {
            const double v = data.X(r, c);
            if (!(v >= 0.0) || !std::isfinite(v)) {
                std::ostringstream msg;
                msg << "negative or non-finite covariate entry at row " << r << ", column " << c;
                throw std::invalid_argument(msg.str());
            }
        }
    }
    for (double v : data.presample_X) {
        if (!(v >= 0.0)) throw std::invalid_argument("negative presample covariate entry");
    }
    for (double v : data.presample_sigma2) {
        if (!(v > 0.0)) throw std::invalid_argument("presample variance must be positive");
    }
}

Presample resolve_presample(const ModelSpec& spec, const Dataset& data) {
    Presample pre;
    const bool need_var = data.presample_eps2.empty() || data.presample_sigma2.empty();
    const double var = need_var ? sample_variance(data.eps) : 0.0;

    auto tail = [](const std::vector<double>& v, std::size_t k) {
        return std::vector<double>(v.end() - static_cast<std::ptrdiff_t>(k), v.end());
    };
    pre.eps2 = data.presample_eps2.empty() ? std::vector<double>(spec.p, var) : tail(data.presample_eps2, spec.p);
    pre.sigma2 = data.presample_sigma2.empty() ? std::vector<double>(spec.q, var)
                                               : tail(data.presample_sigma2, spec.q);
    if (!data.presample_X.empty()) {
        pre.x = data.presample_X;
    } else {
        pre.x.assign(spec.d, 0.0);
        if (data.X.rows() > 0) {
            const Eigen::VectorXd means = data.X.colwise().mean();
            for (std::size_t k = 0; k < spec.d; ++k) pre.x[k] = means[static_cast<Eigen::Index>(k)];
        }
    }
    return pre;
}

namespace {

void check_inputs(const ModelSpec& spec, const ParamVector& theta, const Dataset& data) {
    if (!(theta.spec() == spec)) throw std::invalid_argument("parameter vector was built for a different model");
    theta.validate();
    validate_dataset(spec, data);
}

[[noreturn]] void overflow(std::ptrdiff_t t) {
    std::ostringstream msg;
    msg << "conditional variance is not finite at t=" << t + 1;
    throw NumericalError(msg.str());
}

}  // namespace

VolatilityPath volatility_recursion(const ModelSpec& spec, const ParamVector& theta, const Dataset& data) {
    check_inputs(spec, theta, data);
    const Presample pre = resolve_presample(spec, data);
    VolatilityPath path;
    path.sigma2.resize(data.n());
    const auto bad = detail::run_filter<false>(spec, theta.flat().data(), data, pre,
                                               [&](std::size_t t, double s2, const double*) { path.sigma2[t] = s2; });
    if (bad >= 0) overflow(bad);
    return path;
}

VolatilityGradient volatility_gradient(const ModelSpec& spec, const ParamVector& theta, const Dataset& data) {
    check_inputs(spec, theta, data);
    const Presample pre = resolve_presample(spec, data);
    const auto dim = static_cast<Eigen::Index>(spec.dim());
    VolatilityGradient out;
    out.path.sigma2.resize(data.n());
    out.dsigma2.resize(static_cast<Eigen::Index>(data.n()), dim);
    const auto bad = detail::run_filter<true>(spec, theta.flat().data(), data, pre,
                                              [&](std::size_t t, double s2, const double* g) {
                                                  out.path.sigma2[t] = s2;
                                                  out.dsigma2.row(static_cast<Eigen::Index>(t)) =
                                                      Eigen::Map<const Eigen::RowVectorXd>(g, dim);
                                              });
    if (bad >= 0) overflow(bad);
    return out;
}

}  // namespace garchx
