#include "cde/optimizer.hpp"

#include <cmath>
#include <sstream>

#include "cde/errors.hpp"
#include "cde/lcc.hpp"
#include "cde/likelihood.hpp"
#include "cde/rng.hpp"

namespace cde {

void FitConfig::validate() const {
    if (!(W > 1) || !std::isfinite(W)) throw InputError("W must be a finite number > 1");
    if (m < 2) throw InputError("m must be at least 2");
    if (!(delta > 0)) throw InputError("delta must be positive");
    if (max_outer_iters < 1) throw InputError("max_outer_iters must be at least 1");
    if (domain_padding < 0) throw InputError("domain padding must be non-negative");
    if (theta_init && !theta_init->allFinite()) throw InputError("theta_init must be finite");
    solver.validate();
}

BackgroundGrid grid_for(const Dataset& data, const FitConfig& cfg) {
    const Domain dom = data.transform == Transform::logistic ? Domain{0.0, 1.0}
                                                             : domain_from_data(data.ys, cfg.domain_padding);
    return make_grid(dom, cfg.m, cfg.grid, cfg.grid_seed);
}

namespace {

Eigen::VectorXd initial_theta(const FitConfig& cfg, const FeatureMap& fm) {
    if (!cfg.theta_init) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fm.out_dim()));
    if (static_cast<std::size_t>(cfg.theta_init->size()) != fm.out_dim())
        throw InputError("theta_init length does not match the feature map");
    return *cfg.theta_init;
}

FitResult start(const Dataset& data, const BackgroundGrid& grid, const FeatureMap& fm,
                const FitConfig& cfg) {
    cfg.validate();
    data.validate();
    FitResult res;
    res.config = cfg;
    res.config.m = grid.m();  // an explicitly passed grid overrides cfg.m
    res.kernel = fm.name();
    res.transform = data.transform;
    res.grid = grid;
    res.theta_hat = initial_theta(cfg, fm);
    check_dimensions(res.theta_hat, data, grid, fm);
    return res;
}

void finish(FitResult& res, const Profile& prof) {
    res.alpha_hat = prof.alpha;
    res.eta_hat = (prof.alpha.array() - std::log(res.config.W)).matrix();
}

}  // namespace

FitResult fit(const Dataset& data, const FeatureMap& fm, const FitConfig& cfg) {
    cfg.validate();
    return fit(data, grid_for(data, cfg), fm, cfg);
}

FitResult fit(const Dataset& data, const BackgroundGrid& grid, const FeatureMap& fm,
              const FitConfig& cfg) {
    FitResult res = start(data, grid, fm, cfg);
    Eigen::VectorXd theta = res.theta_hat;
    Profile prof = profile(theta, data, grid, fm);
    res.trace.push_back({0, theta, prof.loglik, 0.0, 0, 0.0, 0.0, std::nullopt, 0.0, true});
    res.message = "iteration limit reached";

    for (int k = 1; k <= cfg.max_outer_iters; ++k) {
        const WLRProblem problem(data, grid, fm, (prof.alpha.array() - std::log(cfg.W)).matrix(),
                                 cfg.W);
        WLRFit step;
        try {
            step = fit_wlr_fixed_offsets(problem, theta, cfg.solver);
        } catch (const NonConvergenceError& e) {
            res.message = std::string("inner solver failed: ") + e.what();
            break;
        }
        Profile next = profile(step.theta, data, grid, fm);
        if (next.loglik < prof.loglik - cfg.ascent_slack) {
            std::ostringstream os;
            os.precision(17);
            os << "target log-likelihood decreased at outer iteration " << k << ": "
               << prof.loglik << " -> " << next.loglik;
            throw InternalError(os.str());
        }
        const double step_sq = (step.theta - theta).squaredNorm();
        theta = step.theta;
        prof = std::move(next);
        res.outer_iters = k;
        res.trace.push_back({k, theta, prof.loglik, step_sq, step.iterations, step.grad_norm,
                             step.ridge_used, std::nullopt, 0.0, true});
        if (step_sq < cfg.delta) {
            res.converged = true;
            res.message = "converged";
            break;
        }
    }
    res.theta_hat = theta;
    finish(res, prof);
    return res;
}

FitResult fit_lcc_variant(const Dataset& data, const FeatureMap& fm, const FitConfig& cfg) {
    cfg.validate();
    return fit_lcc_variant(data, grid_for(data, cfg), fm, cfg);
}

FitResult fit_lcc_variant(const Dataset& data, const BackgroundGrid& grid, const FeatureMap& fm,
                          const FitConfig& cfg) {
    if (!cfg.lcc) throw InputError("fit_lcc_variant called with local case-control sampling disabled");
    FitResult res = start(data, grid, fm, cfg);
    Eigen::VectorXd theta = res.theta_hat;
    Profile prof = profile(theta, data, grid, fm);
    res.trace.push_back({0, theta, prof.loglik, 0.0, 0, 0.0, 0.0, std::nullopt, 0.0, true});
    res.message = "iteration limit reached";

    for (int k = 1; k <= cfg.max_outer_iters; ++k) {
        const WLRProblem problem(data, grid, fm, (prof.alpha.array() - std::log(cfg.W)).matrix(),
                                 cfg.W);
        TraceEntry entry;
        entry.iter = k;
        Eigen::VectorXd next_theta;
        try {
            bool full = k == 1 && cfg.lcc_full_first_step;
            if (!full) {
                const std::uint64_t seed =
                    cfg.lcc_fresh_draws ? rng::derive_seed(cfg.lcc_seed, static_cast<std::uint64_t>(k))
                                        : cfg.lcc_seed;
                try {
                    LCCFit lf = fit_lcc(problem, Pilot{theta}, seed, cfg.solver);
                    next_theta = lf.theta;
                    entry.subsample_size = lf.sample.size();
                    entry.expected_subsample_size = lf.sample.expected_size;
                    entry.full_step = lf.used_full_problem;
                    entry.newton_iters = lf.solver.iterations;
                    entry.grad_norm = lf.solver.grad_norm;
                    entry.ridge = lf.solver.ridge_used;
                } catch (const EmptySubsampleError&) {
                    full = true;
                }
            }
            if (full) {
                WLRFit step = fit_wlr_fixed_offsets(problem, theta, cfg.solver);
                next_theta = step.theta;
                entry.full_step = true;
                entry.newton_iters = step.iterations;
                entry.grad_norm = step.grad_norm;
                entry.ridge = step.ridge_used;
            }
        } catch (const NonConvergenceError& e) {
            res.message = std::string("inner solver failed: ") + e.what();
            break;
        }
        entry.step_sq = (next_theta - theta).squaredNorm();
        theta = std::move(next_theta);
        prof = profile(theta, data, grid, fm);
        entry.theta = theta;
        entry.loglik = prof.loglik;
        res.outer_iters = k;
        res.trace.push_back(std::move(entry));
        if (res.trace.back().step_sq < cfg.delta) {
            res.converged = true;
            res.message = "converged";
            break;
        }
    }
    res.theta_hat = theta;
    finish(res, prof);
    return res;
}

FitResult estimate(const Dataset& data, const FeatureMap& fm, const FitConfig& cfg) {
    return cfg.lcc ? fit_lcc_variant(data, fm, cfg) : fit(data, fm, cfg);
}

Eigen::VectorXd direct_fit(const Dataset& data, const FeatureMap& fm, const BackgroundGrid& grid,
                           double tol, std::optional<Eigen::VectorXd> init, int max_iters) {
    Eigen::VectorXd theta =
        init ? *init : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fm.out_dim()));
    check_dimensions(theta, data, grid, fm);
    const double target = tol * static_cast<double>(data.n());
    double f = target_loglik(theta, data, grid, fm);
    Eigen::VectorXd g = target_score(theta, data, grid, fm);
    double t = 1.0 / std::max(1.0, g.norm());
    for (int it = 0; it < max_iters; ++it) {
        if (g.lpNorm<Eigen::Infinity>() < target) return theta;
        const double gg = g.squaredNorm();
        bool ok = false;
        Eigen::VectorXd cand;
        for (int k = 0; k < 60; ++k, t *= 0.5) {
            cand = theta + t * g;
            const double fc = target_loglik(cand, data, grid, fm);
            if (fc >= f + 1e-4 * t * gg) {
                f = fc;
                ok = true;
                break;
            }
        }
        if (!ok) throw NonConvergenceError("direct_fit line search failed", theta);
        Eigen::VectorXd g_new = target_score(cand, data, grid, fm);
        // Barzilai-Borwein length for the next trial step; backtracking keeps it safe.
        const Eigen::VectorXd s = cand - theta, yv = g - g_new;
        const double sy = s.dot(yv);
        t = sy > 0 ? s.squaredNorm() / sy : 2.0 * t;
        theta = std::move(cand);
        g = std::move(g_new);
    }
    throw NonConvergenceError("direct_fit iteration limit reached", theta);
}

}  // namespace cde
