#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "cde/feature_map.hpp"
#include "cde/wlr_solver.hpp"

namespace cde {

/// Pilot slopes; the pilot probability is logistic(theta_tilde' h(x, y)),
/// evaluated without group offsets.
struct Pilot {
    Eigen::VectorXd theta_tilde;
};

/// |z - p~(x, y)|: 1 - p~ for cases, p~ for controls.
double acceptance_prob(const Pilot& pilot, bool z, std::span<const double> x, double y,
                       const FeatureMap& fm);

struct Subsample {
    std::vector<std::size_t> rows;  // sorted indices into the problem's row enumeration
    std::uint64_t seed = 0;
    std::size_t n_cases = 0;
    std::size_t n_controls = 0;
    double expected_size = 0.0;  // sum of acceptance probabilities over all rows
    double size_variance = 0.0;  // sum of a (1 - a)

    std::size_t size() const { return rows.size(); }
};

struct EmptySubsampleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Accepts each row independently with its acceptance probability. Row r uses
/// the uniform draw rng::counter_uniform(seed, r), so the result depends only
/// on (problem, pilot, seed). Only the problem's active rows are considered.
Subsample subsample(const WLRProblem& problem, const Pilot& pilot, std::uint64_t seed);

struct LCCFit {
    Eigen::VectorXd theta;    // adjusted estimate theta_S + theta_tilde
    Eigen::VectorXd theta_s;  // unadjusted subsample estimate
    Subsample sample;
    bool used_full_problem = false;  // subsample was rank deficient
    WLRFit solver;
};

/// Fits the weighted logistic regression on an LCC subsample (same offsets,
/// same weights) and applies the additive pilot correction. If the subsample
/// has fewer than d + 1 distinct feature rows the full problem is fitted
/// instead, starting from the pilot, and no correction is applied.
LCCFit fit_lcc(const WLRProblem& problem, const Pilot& pilot, std::uint64_t seed,
               const SolverConfig& cfg = {});

}  // namespace cde
