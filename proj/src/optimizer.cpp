#include "garchx/optimizer.hpp"

#include <cmath>

namespace garchx {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kActiveEps = 1e-6;
constexpr int kMaxBacktracks = 60;

Eigen::MatrixXd safe_inverse_hessian(const InverseHessianFn& inv_hessian, const Eigen::VectorXd& x) {
    const auto n = x.size();
    if (inv_hessian) {
        Eigen::MatrixXd H = inv_hessian(x);
        if (H.rows() == n && H.cols() == n && H.allFinite()) return H;
    }
    return Eigen::MatrixXd::Identity(n, n);
}

}  // namespace

BoxMinimizerResult minimize_box(const ObjectiveFn& f, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                                const InverseHessianFn& inv_hessian, const BoxMinimizerOptions& opts) {
    const Eigen::Index n = x0.size();
    BoxMinimizerResult res;

    Eigen::VectorXd x = x0.cwiseMax(lower);
    Eigen::VectorXd g(n);
    double fx = f(x, &g);
    res.evaluations = 1;
    if (!std::isfinite(fx) || !g.allFinite()) {
        res.x = x;
        res.value = fx;
        res.message = "objective is not finite at the starting point";
        return res;
    }
    res.trace.push_back(fx);

    Eigen::MatrixXd H = safe_inverse_hessian(inv_hessian, x);
    bool fresh = true;
    const double step_tol = std::sqrt(opts.tol);
    res.message = "iteration limit reached";

    std::vector<Eigen::Index> free_idx;
    free_idx.reserve(static_cast<std::size_t>(n));
    Eigen::VectorXd dir(n), xt(n), gt(n);

    for (int it = 0; it < opts.max_iter; ++it) {
        res.iterations = it + 1;
        const Eigen::VectorXd pg = x - (x - g).cwiseMax(lower);
        const double pg_norm = pg.lpNorm<Eigen::Infinity>();
        if (pg_norm <= opts.tol) {
            res.converged = true;
            res.message = "projected gradient vanished";
            break;
        }

        const double eps_active = std::min(kActiveEps, pg_norm);
        free_idx.clear();
        dir.setZero();
        for (Eigen::Index i = 0; i < n; ++i) {
            if (x[i] - lower[i] <= eps_active && g[i] > 0.0) {
                // Near-active coordinate: push straight to its bound.
                dir[i] = -(H(i, i) > 0.0 ? H(i, i) : 1.0) * g[i];
            } else {
                free_idx.push_back(i);
            }
        }
        for (Eigen::Index a : free_idx) {
            double v = 0.0;
            for (Eigen::Index b : free_idx) v -= H(a, b) * g[b];
            dir[a] = v;
        }

        double slope = g.dot(dir);
        if (!(slope < 0.0)) {
            if (!fresh) {
                H = safe_inverse_hessian(inv_hessian, x);
                fresh = true;
                continue;
            }
            dir = -g;
            slope = -g.squaredNorm();
        }

        double step = 1.0;
        double ft = 0.0;
        bool accepted = false;
        for (int ls = 0; ls < kMaxBacktracks; ++ls) {
            xt = (x + step * dir).cwiseMax(lower);
            const double predicted = g.dot(xt - x);
            ft = f(xt, &gt);
            ++res.evaluations;
            if (std::isfinite(ft) && gt.allFinite() && ft <= fx + kArmijo * predicted) {
                accepted = true;
                break;
            }
            if ((xt - x).lpNorm<Eigen::Infinity>() <= 1e-16 * (1.0 + x.lpNorm<Eigen::Infinity>())) break;
            step *= std::isfinite(ft) ? 0.5 : 0.1;
        }
        if (!accepted) {
            if (!fresh) {
                H = safe_inverse_hessian(inv_hessian, x);
                fresh = true;
                continue;
            }
            // No descent left at machine precision: accept as converged if the
            // predicted decrease is already negligible.
            res.converged = std::abs(slope) <= opts.tol * (1.0 + std::abs(fx));
            res.message = "line search made no progress";
            break;
        }

        const Eigen::VectorXd s = xt - x;
        const Eigen::VectorXd y = gt - g;
        const double f_prev = fx;
        x = xt;
        fx = ft;
        g = gt;
        res.trace.push_back(fx);
        fresh = false;

        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::VectorXd Hy = H * y;
            const double yHy = y.dot(Hy);
            H -= rho * (Hy * s.transpose() + s * Hy.transpose());
            H += (rho * rho * yHy + rho) * (s * s.transpose());
        }

        double rel_step = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) rel_step = std::max(rel_step, std::abs(s[i]) / (1.0 + std::abs(x[i])));
        const bool small_change = std::abs(f_prev - fx) <= opts.tol * (1.0 + std::abs(fx));
        const double pg_new = (x - (x - g).cwiseMax(lower)).lpNorm<Eigen::Infinity>();
        if (small_change && rel_step <= step_tol && pg_new <= step_tol) {
            res.converged = true;
            res.message = "objective and parameter changes below tolerance";
            break;
        }
    }

    res.x = x;
    res.value = fx;
    return res;
}

}  // namespace garchx
