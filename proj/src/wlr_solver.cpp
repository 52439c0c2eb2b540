#include "cde/wlr_solver.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "cde/errors.hpp"
#include "cde/numeric.hpp"

namespace cde {

void SolverConfig::validate() const {
    if (max_newton_iters <= 0 || grad_tol <= 0 || ridge <= 0 || max_ridge < ridge ||
        step_halving_max <= 0 || divergence_norm <= 0)
        throw InputError("solver configuration values must be positive");
}

WLRProblem::WLRProblem(const Dataset& data, const BackgroundGrid& grid, const FeatureMap& fm,
                       Eigen::VectorXd eta, double W)
    : data_(&data), grid_(&grid), fm_(&fm), eta_(std::move(eta)), W_(W) {
    if (data.x_dim() != fm.x_dim()) throw InputError("dataset and feature map x dimensions differ");
    if (static_cast<std::size_t>(eta_.size()) != data.n())
        throw InputError("offset vector length must equal the number of observations");
    if (!eta_.allFinite()) throw NumericError("non-finite offsets");
    if (!(W > 0) || !std::isfinite(W)) throw InputError("control weight W must be positive");
    if (grid.m() < 1) throw InputError("empty background grid");
}

WLRProblem::Row WLRProblem::row(std::size_t r) const {
    const std::size_t n = n_groups();
    if (r < n) return {true, 1.0, eta_[static_cast<Eigen::Index>(r)], r, 0};
    const std::size_t c = r - n;
    const std::size_t i = c / m();
    return {false, W_, eta_[static_cast<Eigen::Index>(i)], i, c % m()};
}

double WLRProblem::row_y(std::size_t r) const {
    const Row rw = row(r);
    return rw.z ? data_->ys[static_cast<Eigen::Index>(rw.group)]
                : grid_->points[static_cast<Eigen::Index>(rw.grid_index)];
}

void WLRProblem::row_features(std::size_t r, double* out) const {
    fm_->evaluate_into(data_->x(row(r).group), row_y(r), out);
}

WLRProblem WLRProblem::restricted(std::vector<std::size_t> rows) const {
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (rows[k] >= n_rows()) throw InputError("row index out of range");
        if (k > 0 && rows[k] <= rows[k - 1]) throw InputError("row indices must be sorted and unique");
    }
    WLRProblem out = *this;
    out.rows_ = std::move(rows);
    return out;
}

WLRProblem::Evaluation WLRProblem::evaluate(const Eigen::VectorXd& theta, bool with_gradient,
                                            bool with_hessian) const {
    if (static_cast<std::size_t>(theta.size()) != dim())
        throw InputError("theta length does not match the feature map");
    return rows_ ? evaluate_rows(theta, with_gradient, with_hessian)
                 : evaluate_full(theta, with_gradient, with_hessian);
}

WLRProblem::Evaluation WLRProblem::evaluate_full(const Eigen::VectorXd& theta, bool grad,
                                                 bool hess) const {
    const auto d = static_cast<Eigen::Index>(dim());
    Evaluation ev;
    if (grad) ev.gradient = Eigen::VectorXd::Zero(d);
    if (hess) ev.hessian = Eigen::MatrixXd::Zero(d, d);

    num::Accumulator ll;
    Eigen::VectorXd h(d);
    Eigen::MatrixXd G;
    Eigen::ArrayXd t, s;
    for (std::size_t i = 0; i < n_groups(); ++i) {
        const auto x = data_->x(i);
        const double off = eta_[static_cast<Eigen::Index>(i)];

        fm_->evaluate_into(x, data_->ys[static_cast<Eigen::Index>(i)], h.data());
        const double tc = off + h.dot(theta);
        ll += tc - num::log1pexp(tc);

        fm_->evaluate_grid_into(x, grid_->span(), G);
        t = (G * theta).array() + off;
        double ctrl = 0.0;
        for (Eigen::Index j = 0; j < t.size(); ++j) ctrl += num::log1pexp(t[j]);
        ll += -W_ * ctrl;

        if (grad || hess) {
            s = t.unaryExpr([](double v) { return num::sigmoid(v); });
            const double sc = num::sigmoid(tc);
            if (grad) {
                ev.gradient += (1.0 - sc) * h;
                ev.gradient.noalias() -= W_ * (G.transpose() * s.matrix());
            }
            if (hess) {
                ev.hessian.noalias() -= sc * (1.0 - sc) * (h * h.transpose());
                const Eigen::ArrayXd v = W_ * s * (1.0 - s);
                ev.hessian.noalias() -= G.transpose() * (G.array().colwise() * v).matrix();
            }
        }
    }
    ev.loglik = ll.value();
    return ev;
}

WLRProblem::Evaluation WLRProblem::evaluate_rows(const Eigen::VectorXd& theta, bool grad,
                                                 bool hess) const {
    const auto d = static_cast<Eigen::Index>(dim());
    Evaluation ev;
    if (grad) ev.gradient = Eigen::VectorXd::Zero(d);
    if (hess) ev.hessian = Eigen::MatrixXd::Zero(d, d);
    num::Accumulator ll;
    Eigen::VectorXd f(d);
    for (std::size_t r : *rows_) {
        const Row rw = row(r);
        row_features(r, f.data());
        const double t = rw.offset + f.dot(theta);
        ll += rw.weight * ((rw.z ? t : 0.0) - num::log1pexp(t));
        if (grad || hess) {
            const double p = num::sigmoid(t);
            if (grad) ev.gradient += rw.weight * ((rw.z ? 1.0 : 0.0) - p) * f;
            if (hess) ev.hessian.noalias() -= rw.weight * p * (1.0 - p) * (f * f.transpose());
        }
    }
    ev.loglik = ll.value();
    return ev;
}

double wlr_loglik(const WLRProblem& problem, const Eigen::VectorXd& theta) {
    return problem.evaluate(theta, false, false).loglik;
}

Eigen::VectorXd wlr_gradient(const WLRProblem& problem, const Eigen::VectorXd& theta) {
    return problem.evaluate(theta, true, false).gradient;
}

Eigen::MatrixXd wlr_hessian(const WLRProblem& problem, const Eigen::VectorXd& theta) {
    return problem.evaluate(theta, false, true).hessian;
}

namespace {

// At a maximizer of a strictly concave objective, moving a distance of
// max(1, ||theta||) along theta loses likelihood. Under separation the
// objective keeps rising along that ray and the "optimum" is an artifact of
// the gradient tolerance.
bool looks_separated(const WLRProblem& problem, const Eigen::VectorXd& theta, double obj) {
    const double norm = theta.norm();
    if (norm == 0.0) return false;
    const Eigen::VectorXd further = theta * (1.0 + std::max(1.0, norm) / norm);
    const double ahead = problem.evaluate(further, false, false).loglik;
    return ahead >= obj - 1e-12 * (1.0 + std::abs(obj));
}

}  // namespace

WLRFit fit_wlr_fixed_offsets(const WLRProblem& problem, const Eigen::VectorXd& init,
                             const SolverConfig& cfg) {
    cfg.validate();
    if (static_cast<std::size_t>(init.size()) != problem.dim())
        throw InputError("initial theta length does not match the feature map");
    if (!init.allFinite()) throw NumericError("initial theta has non-finite entries");

    const auto d = init.size();
    const double tol = cfg.grad_tol * static_cast<double>(problem.n_groups());
    // Tolerated objective decrease per accepted step: rounding noise only.
    auto slack = [](double obj) { return 1e-13 * (1.0 + std::abs(obj)); };

    WLRFit fit;
    fit.theta = init;
    auto ev = problem.evaluate(fit.theta, true, true);
    fit.objective_trace.push_back(ev.loglik);

    for (int it = 0;; ++it) {
        fit.grad_norm = ev.gradient.lpNorm<Eigen::Infinity>();
        fit.degenerate = ev.hessian.isZero(0.0);
        if (fit.grad_norm <= tol) {
            if (!fit.degenerate && it > 0 && looks_separated(problem, fit.theta, ev.loglik))
                throw DivergenceError("objective increases without bound along theta (separation)",
                                      fit.theta);
            return fit;
        }
        if (fit.degenerate) {
            // Gradient is constant in theta; there is no maximizer to move toward.
            throw NonConvergenceError("flat weighted logistic objective (zero Hessian)", fit.theta);
        }
        if (it >= cfg.max_newton_iters)
            throw NonConvergenceError("Newton iteration limit reached (gradient norm " +
                                          std::to_string(fit.grad_norm) + ")",
                                      fit.theta);

        // Solve (-H + ridge I) step = g, escalating the ridge on failure.
        const Eigen::MatrixXd neg_h = -ev.hessian;
        const double scale = std::max(1.0, neg_h.diagonal().cwiseAbs().maxCoeff());
        Eigen::VectorXd step;
        double ridge = cfg.ridge;
        for (;;) {
            Eigen::LLT<Eigen::MatrixXd> llt(neg_h + ridge * scale * Eigen::MatrixXd::Identity(d, d));
            if (llt.info() == Eigen::Success) {
                step = llt.solve(ev.gradient);
                if (step.allFinite()) break;
            }
            ridge *= 10.0;
            if (ridge > cfg.max_ridge)
                throw NonConvergenceError("weighted logistic Hessian is numerically singular",
                                          fit.theta);
        }
        fit.ridge_used = std::max(fit.ridge_used, ridge);

        double frac = 1.0;
        bool accepted = false;
        for (int k = 0; k <= cfg.step_halving_max; ++k, frac *= 0.5) {
            Eigen::VectorXd cand = fit.theta + frac * step;
            auto cand_ev = problem.evaluate(cand, true, true);
            if (std::isfinite(cand_ev.loglik) && cand_ev.loglik >= ev.loglik - slack(ev.loglik)) {
                fit.theta = std::move(cand);
                ev = std::move(cand_ev);
                accepted = true;
                break;
            }
        }
        ++fit.iterations;
        if (!accepted) {
            // No ascent along the Newton direction: we are at the rounding floor.
            if (fit.grad_norm <= 1e3 * tol) return fit;
            throw NonConvergenceError("step halving failed to increase the objective", fit.theta);
        }
        fit.objective_trace.push_back(ev.loglik);
        if (fit.theta.lpNorm<Eigen::Infinity>() > cfg.divergence_norm)
            throw DivergenceError("theta diverged (possible separation)", fit.theta);
        if (frac * step.lpNorm<Eigen::Infinity>() <=
            1e-15 * (1.0 + fit.theta.lpNorm<Eigen::Infinity>())) {
            fit.grad_norm = ev.gradient.lpNorm<Eigen::Infinity>();
            return fit;
        }
    }
}

}  // namespace cde
