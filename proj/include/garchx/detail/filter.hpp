#pragma once

// Forward pass shared by the recursion, its gradient and the QML
// objective. Keeps only a ring buffer of the last q variances (and their
// derivatives); callers decide what to materialize.

#include "garchx/model.hpp"

#include <cmath>
#include <cstddef>
#include <vector>

namespace garchx::detail {

/// Runs the variance recursion, calling visit(t, sigma2_t, grad_t) for each
/// zero-based t. grad_t points at dim() doubles and is only filled when
/// WithGrad is set. Returns the first t with a non-finite or nonpositive
/// variance, or -1 when the pass completes.
template <bool WithGrad, class Visitor>
std::ptrdiff_t run_filter(const ModelSpec& spec, const double* theta, const Dataset& data,
                          const Presample& pre, Visitor&& visit) {
    const std::size_t p = spec.p;
    const std::size_t q = spec.q;
    const std::size_t d = spec.d;
    const std::size_t dim = spec.dim();
    const std::size_t n = data.n();

    const double omega = theta[0];
    const double* alpha = theta + 1;
    const double* beta = alpha + p;
    const double* gamma = beta + q;

    std::vector<double> s2ring(pre.sigma2);
    std::vector<double> gring(WithGrad ? q * dim : 0, 0.0);
    std::vector<double> grad(WithGrad ? dim : 0, 0.0);
    std::size_t pos = q == 0 ? 0 : q - 1;

    const double* eps = data.eps.data();
    const double* xdata = data.X.data();

    for (std::size_t t = 0; t < n; ++t) {
        const double* xprev = t == 0 ? pre.x.data() : xdata + (t - 1) * d;

        double s2 = omega;
        if constexpr (WithGrad) grad[0] = 1.0;
        for (std::size_t i = 1; i <= p; ++i) {
            const double e2 = t >= i ? eps[t - i] * eps[t - i] : pre.eps2[p + t - i];
            s2 += alpha[i - 1] * e2;
            if constexpr (WithGrad) grad[i] = e2;
        }
        for (std::size_t j = 1; j <= q; ++j) {
            const std::size_t slot = (pos + q + 1 - j) % q;
            s2 += beta[j - 1] * s2ring[slot];
            if constexpr (WithGrad) grad[p + j] = s2ring[slot];
        }
        for (std::size_t k = 0; k < d; ++k) {
            s2 += gamma[k] * xprev[k];
            if constexpr (WithGrad) grad[1 + p + q + k] = xprev[k];
        }
        if constexpr (WithGrad) {
            for (std::size_t j = 1; j <= q; ++j) {
                const double b = beta[j - 1];
                if (b == 0.0) continue;
                const double* g = gring.data() + ((pos + q + 1 - j) % q) * dim;
                for (std::size_t m = 0; m < dim; ++m) grad[m] += b * g[m];
            }
        }
        if (!(s2 > 0.0) || !std::isfinite(s2)) return static_cast<std::ptrdiff_t>(t);

        visit(t, s2, grad.data());

        if (q > 0) {
            pos = (pos + 1) % q;
            s2ring[pos] = s2;
            if constexpr (WithGrad) {
                std::copy(grad.begin(), grad.end(), gring.begin() + static_cast<std::ptrdiff_t>(pos * dim));
            }
        }
    }
    return -1;
}

}  // namespace garchx::detail
