#pragma once

// Independent reference computations for the tests. Nothing here calls into
// the library's likelihood, solver or density code.

#include <cmath>
#include <functional>
#include <span>

#include <Eigen/Core>

#include "cde/dataset.hpp"
#include "cde/feature_map.hpp"

namespace oracle {

/// Unstabilized double loop over observations and background points.
inline double naive_target_loglik(const Eigen::VectorXd& theta, const cde::Dataset& data,
                                  const cde::BackgroundGrid& grid, const cde::FeatureMap& fm) {
    double total = 0.0;
    for (std::size_t i = 0; i < data.n(); ++i) {
        const Eigen::VectorXd x = data.xs.row(static_cast<Eigen::Index>(i)).transpose();
        double inner = 0.0;
        for (double yj : grid.points) inner += std::exp(theta.dot(fm.evaluate(x, yj)));
        total += theta.dot(fm.evaluate(x, data.ys[static_cast<Eigen::Index>(i)])) - std::log(inner);
    }
    return total;
}

/// Central differences with step h_k = rel_step * max(1, |theta_k|).
inline Eigen::VectorXd central_diff(const std::function<double(const Eigen::VectorXd&)>& f,
                                    const Eigen::VectorXd& theta, double rel_step = 1e-5) {
    Eigen::VectorXd g(theta.size());
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
        const double h = rel_step * std::max(1.0, std::abs(theta[k]));
        Eigen::VectorXd a = theta, b = theta;
        a[k] += h;
        b[k] -= h;
        g[k] = (f(a) - f(b)) / (2 * h);
    }
    return g;
}

/// Solves sum_j exp(a + s_j) = 1 for a by bisection.
inline double bisect_alpha(std::span<const double> scores) {
    auto excess = [&](double a) {
        double s = 0.0;
        for (double v : scores) s += std::exp(a + v);
        return s - 1.0;
    };
    double lo = -1e3, hi = 1e3;
    for (int it = 0; it < 400 && hi - lo > 1e-14; ++it) {
        const double mid = 0.5 * (lo + hi);
        (excess(mid) > 0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Maximizer of a unimodal 1-d function on [lo, hi]: exhaustive grid at
/// `step`, then successively finer grids (x100) around the best point down to `final_step`.
inline double grid_search_max(const std::function<double(double)>& f, double lo, double hi,
                              double step, double final_step) {
    double best = lo, best_val = f(lo);
    for (double t = lo; t <= hi + 1e-12; t += step) {
        const double v = f(t);
        if (v > best_val) best_val = v, best = t;
    }
    while (step > final_step) {
        const double a = std::max(lo, best - 2 * step), b = std::min(hi, best + 2 * step);
        step = std::max(step / 100.0, final_step);
        for (double t = a; t <= b + 1e-15; t += step) {
            const double v = f(t);
            if (v > best_val) best_val = v, best = t;
        }
    }
    return best;
}

/// Composite Simpson rule on 2k intervals.
template <class F>
double simpson(F f, double a, double b, int k = 5000) {
    const int n = 2 * k;
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

/// Density of an exponential with rate `rate` truncated to [0, L].
inline double truncated_exp_pdf(double rate, double L, double y) {
    return rate * std::exp(-rate * y) / (1.0 - std::exp(-rate * L));
}

inline double truncated_exp_mean(double rate, double L) {
    return 1.0 / rate - L / std::expm1(rate * L);
}

}  // namespace oracle
