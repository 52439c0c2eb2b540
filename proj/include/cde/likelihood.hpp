#pragma once

#include <Eigen/Core>

#include "cde/dataset.hpp"
#include "cde/feature_map.hpp"

namespace cde {

/// Slopes theta (length d) and per-observation log-normalizers alpha (length n).
///
/// alpha_i normalizes the discrete background sum: sum_j exp(alpha_i + theta' h(x_i, y_j)) = 1.
/// The quadrature weight |S|/m is not folded in; the density module handles
/// normalization on its own.
struct ModelState {
    Eigen::VectorXd theta;
    Eigen::VectorXd alpha;

    /// eta_i = alpha_i - log W, the offsets of the weighted logistic regression.
    Eigen::VectorXd eta(double W) const;
};

/// sum_i [theta' h(x_i, y_i) - log sum_j exp(theta' h(x_i, y_j))]
double target_loglik(const Eigen::VectorXd& theta, const Dataset& data,
                     const BackgroundGrid& grid, const FeatureMap& fm);

/// Gradient of target_loglik:
/// sum_i [h(x_i, y_i) - sum_j softmax_j(theta' h(x_i, y_j)) h(x_i, y_j)]
Eigen::VectorXd target_score(const Eigen::VectorXd& theta, const Dataset& data,
                             const BackgroundGrid& grid, const FeatureMap& fm);

/// alpha_i = -log sum_j exp(theta' h(x_i, y_j)), the maximizer of
/// complete_loglik over alpha for fixed theta.
Eigen::VectorXd alpha_closed_form(const Eigen::VectorXd& theta, const Dataset& data,
                                  const BackgroundGrid& grid, const FeatureMap& fm);

/// sum_i [alpha_i + theta' h(x_i, y_i) - sum_j exp(alpha_i + theta' h(x_i, y_j))].
/// Returns -inf if a penalty term overflows.
double complete_loglik(const Eigen::VectorXd& alpha, const Eigen::VectorXd& theta,
                       const Dataset& data, const BackgroundGrid& grid, const FeatureMap& fm);

/// alpha_closed_form and target_loglik from a single pass over the groups.
struct Profile {
    Eigen::VectorXd alpha;
    double loglik = 0.0;
};
Profile profile(const Eigen::VectorXd& theta, const Dataset& data, const BackgroundGrid& grid,
                const FeatureMap& fm);

/// Throws InputError on inconsistent dimensions.
void check_dimensions(const Eigen::VectorXd& theta, const Dataset& data,
                      const BackgroundGrid& grid, const FeatureMap& fm);

}  // namespace cde
