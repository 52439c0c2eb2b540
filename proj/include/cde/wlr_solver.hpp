#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "cde/dataset.hpp"
#include "cde/feature_map.hpp"

namespace cde {

struct SolverConfig {
    int max_newton_iters = 50;
    /// Convergence when ||gradient||_inf <= grad_tol * n (n = number of groups).
    double grad_tol = 1e-8;
    /// Initial ridge added to the negated Hessian when solving for the step.
    double ridge = 1e-8;
    /// Ridge escalation stops here (x10 per attempt).
    double max_ridge = 1e-2;
    int step_halving_max = 30;
    /// ||theta||_inf beyond this is treated as divergence (separation).
    double divergence_norm = 1e8;

    void validate() const;
};

/// Weighted logistic regression with fixed per-group offsets.
///
/// Rows are enumerated virtually: rows [0, n) are the cases (z = 1, weight 1,
/// features h(x_i, y_i)); row n + i*m + j is the control for group i at
/// background point j (z = 0, weight W, features h(x_i, y^(j))). Every row of
/// group i carries offset eta_i. Feature vectors are computed on the fly.
///
/// The problem refers to the dataset, grid and feature map; they must outlive it.
class WLRProblem {
public:
    WLRProblem(const Dataset& data, const BackgroundGrid& grid, const FeatureMap& fm,
               Eigen::VectorXd eta, double W);

    struct Row {
        bool z;
        double weight;
        double offset;
        std::size_t group;
        std::size_t grid_index;  // meaningful for controls only
    };

    std::size_t n_groups() const { return data_->n(); }
    std::size_t m() const { return grid_->m(); }
    std::size_t n_rows() const { return n_groups() * (1 + m()); }
    std::size_t dim() const { return fm_->out_dim(); }
    double W() const { return W_; }
    const Eigen::VectorXd& eta() const { return eta_; }

    const Dataset& data() const { return *data_; }
    const BackgroundGrid& grid() const { return *grid_; }
    const FeatureMap& feature_map() const { return *fm_; }

    Row row(std::size_t r) const;
    /// (x_i, y) of row r: y is y_i for cases and y^(j) for controls.
    double row_y(std::size_t r) const;
    void row_features(std::size_t r, double* out) const;

    /// Same problem restricted to the given rows (sorted, unique, in range).
    WLRProblem restricted(std::vector<std::size_t> rows) const;
    const std::optional<std::vector<std::size_t>>& active_rows() const { return rows_; }
    std::size_t n_active_rows() const { return rows_ ? rows_->size() : n_rows(); }

    struct Evaluation {
        double loglik = 0.0;
        Eigen::VectorXd gradient;
        Eigen::MatrixXd hessian;
    };
    Evaluation evaluate(const Eigen::VectorXd& theta, bool with_gradient, bool with_hessian) const;

private:
    Evaluation evaluate_full(const Eigen::VectorXd& theta, bool grad, bool hess) const;
    Evaluation evaluate_rows(const Eigen::VectorXd& theta, bool grad, bool hess) const;

    const Dataset* data_;
    const BackgroundGrid* grid_;
    const FeatureMap* fm_;
    Eigen::VectorXd eta_;
    double W_;
    std::optional<std::vector<std::size_t>> rows_;
};

/// sum_rows w [z (offset + theta' f) - log(1 + e^{offset + theta' f})]
double wlr_loglik(const WLRProblem& problem, const Eigen::VectorXd& theta);
Eigen::VectorXd wlr_gradient(const WLRProblem& problem, const Eigen::VectorXd& theta);
/// Negative semidefinite.
Eigen::MatrixXd wlr_hessian(const WLRProblem& problem, const Eigen::VectorXd& theta);

struct WLRFit {
    Eigen::VectorXd theta;
    int iterations = 0;
    double grad_norm = 0.0;   // ||gradient||_inf at theta
    double ridge_used = 0.0;  // largest ridge needed by any step
    bool degenerate = false;  // Hessian identically zero (flat objective)
    std::vector<double> objective_trace;  // objective at init and after each step
};

/// Maximizes wlr_loglik over theta by Newton steps with step halving.
/// Throws NonConvergenceError (carrying the last iterate) when the Hessian
/// stays singular or the iteration budget runs out, DivergenceError when
/// ||theta|| runs away.
WLRFit fit_wlr_fixed_offsets(const WLRProblem& problem, const Eigen::VectorXd& init,
                             const SolverConfig& cfg = {});

}  // namespace cde
