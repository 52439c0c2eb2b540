#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cde/dataset.hpp"
#include "cde/feature_map.hpp"
#include "cde/wlr_solver.hpp"

namespace cde {

struct FitConfig {
    double W = 1e6;                 // control weight
    std::size_t m = 100;            // background points
    GridScheme grid = GridScheme::regular;
    std::uint64_t grid_seed = 0;    // uniform_random grids only
    double domain_padding = 0.0;    // fraction of the data range added on each side
    double delta = 1e-6;            // stop when ||theta_k - theta_{k-1}||^2 < delta
    int max_outer_iters = 200;
    std::optional<Eigen::VectorXd> theta_init;  // zero when unset
    bool lcc = false;
    std::uint64_t lcc_seed = 0;
    bool lcc_full_first_step = true;  // first LCC iteration fits the full problem
    bool lcc_fresh_draws = false;     // new uniforms each iteration instead of reusing them
    SolverConfig solver;
    double ascent_slack = 1e-10;    // allowed loglik decrease per outer step (non-LCC)

    void validate() const;
};

struct TraceEntry {
    int iter = 0;
    Eigen::VectorXd theta;
    double loglik = 0.0;   // target_loglik(theta)
    double step_sq = 0.0;  // ||theta_k - theta_{k-1}||^2
    int newton_iters = 0;
    double grad_norm = 0.0;
    double ridge = 0.0;
    // LCC iterations only
    std::optional<std::size_t> subsample_size;
    double expected_subsample_size = 0.0;
    bool full_step = true;
};

struct FitResult {
    Eigen::VectorXd theta_hat;
    Eigen::VectorXd alpha_hat;  // alpha_closed_form(theta_hat)
    Eigen::VectorXd eta_hat;    // alpha_hat - log W
    bool converged = false;
    int outer_iters = 0;
    std::string message;        // why the loop stopped
    std::vector<TraceEntry> trace;  // trace[0] is the starting point
    FitConfig config;
    std::string kernel;         // FeatureMap::name()
    Transform transform = Transform::identity;
    BackgroundGrid grid;
};

/// Domain and background grid implied by the config: [0, 1] for
/// logistic-transformed data, otherwise the (padded) data range.
BackgroundGrid grid_for(const Dataset& data, const FitConfig& cfg);

/// Block-wise alternating maximization: closed-form intercepts, then a
/// weighted logistic regression for theta with the intercepts held fixed.
///
/// Each outer step can only increase the target log-likelihood; a decrease
/// beyond cfg.ascent_slack throws InternalError. Solver failures end the loop
/// with converged = false and the best iterate so far.
FitResult fit(const Dataset& data, const FeatureMap& fm, const FitConfig& cfg);
FitResult fit(const Dataset& data, const BackgroundGrid& grid, const FeatureMap& fm,
              const FitConfig& cfg);

/// Alternating scheme with local case-control subsampling in the theta step,
/// using the previous iterate as pilot. Requires cfg.lcc.
FitResult fit_lcc_variant(const Dataset& data, const FeatureMap& fm, const FitConfig& cfg);
FitResult fit_lcc_variant(const Dataset& data, const BackgroundGrid& grid, const FeatureMap& fm,
                          const FitConfig& cfg);

/// fit or fit_lcc_variant depending on cfg.lcc.
FitResult estimate(const Dataset& data, const FeatureMap& fm, const FitConfig& cfg);

/// Maximizes target_loglik directly by gradient ascent with backtracking
/// line search until ||target_score||_inf < tol * n. Intended as a
/// reference for small problems.
Eigen::VectorXd direct_fit(const Dataset& data, const FeatureMap& fm, const BackgroundGrid& grid,
                           double tol, std::optional<Eigen::VectorXd> init = std::nullopt,
                           int max_iters = 1'000'000);

}  // namespace cde
