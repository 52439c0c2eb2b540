#include "cde/lcc.hpp"

#include <algorithm>

#include "cde/errors.hpp"
#include "cde/numeric.hpp"
#include "cde/rng.hpp"

namespace cde {

namespace {

void check_pilot(const Pilot& pilot, const FeatureMap& fm) {
    if (static_cast<std::size_t>(pilot.theta_tilde.size()) != fm.out_dim())
        throw InputError("pilot dimension does not match the feature map");
    if (!pilot.theta_tilde.allFinite()) throw NumericError("pilot has non-finite entries");
}

double accept(bool z, double pilot_score) {
    // 1 - logistic(s) == logistic(-s), without the cancellation.
    return num::sigmoid(z ? -pilot_score : pilot_score);
}

// d + 1 distinct feature rows among the accepted ones?
bool has_enough_distinct_rows(const WLRProblem& problem, const std::vector<std::size_t>& rows) {
    const std::size_t need = problem.dim() + 1;
    std::vector<Eigen::VectorXd> seen;
    Eigen::VectorXd f(static_cast<Eigen::Index>(problem.dim()));
    for (std::size_t r : rows) {
        problem.row_features(r, f.data());
        if (std::none_of(seen.begin(), seen.end(), [&](const auto& s) { return s == f; })) {
            seen.push_back(f);
            if (seen.size() >= need) return true;
        }
    }
    return false;
}

}  // namespace

double acceptance_prob(const Pilot& pilot, bool z, std::span<const double> x, double y,
                       const FeatureMap& fm) {
    check_pilot(pilot, fm);
    return accept(z, fm.evaluate(x, y).dot(pilot.theta_tilde));
}

Subsample subsample(const WLRProblem& problem, const Pilot& pilot, std::uint64_t seed) {
    const FeatureMap& fm = problem.feature_map();
    check_pilot(pilot, fm);
    Subsample out;
    out.seed = seed;
    num::Accumulator expected, variance;

    auto consider = [&](std::size_t r, bool z, double score) {
        const double a = accept(z, score);
        expected += a;
        variance += a * (1.0 - a);
        if (rng::counter_uniform(seed, r) < a) {
            out.rows.push_back(r);
            ++(z ? out.n_cases : out.n_controls);
        }
    };

    if (const auto& active = problem.active_rows()) {
        Eigen::VectorXd f(static_cast<Eigen::Index>(problem.dim()));
        for (std::size_t r : *active) {
            problem.row_features(r, f.data());
            consider(r, problem.row(r).z, f.dot(pilot.theta_tilde));
        }
    } else {
        const Dataset& data = problem.data();
        const std::size_t n = problem.n_groups();
        const std::size_t m = problem.m();
        Eigen::VectorXd f(static_cast<Eigen::Index>(problem.dim()));
        for (std::size_t i = 0; i < n; ++i) {
            fm.evaluate_into(data.x(i), data.ys[static_cast<Eigen::Index>(i)], f.data());
            consider(i, true, f.dot(pilot.theta_tilde));
        }
        Eigen::MatrixXd G;
        Eigen::VectorXd scores;
        for (std::size_t i = 0; i < n; ++i) {
            fm.evaluate_grid_into(data.x(i), problem.grid().span(), G);
            scores.noalias() = G * pilot.theta_tilde;
            for (std::size_t j = 0; j < m; ++j)
                consider(n + i * m + j, false, scores[static_cast<Eigen::Index>(j)]);
        }
        // Cases were visited first and carry the smallest indices, so rows are sorted.
    }
    out.expected_size = expected.value();
    out.size_variance = variance.value();
    if (out.rows.empty())
        throw EmptySubsampleError(
            "local case-control subsample is empty; change the pilot estimate or the seed");
    return out;
}

LCCFit fit_lcc(const WLRProblem& problem, const Pilot& pilot, std::uint64_t seed,
               const SolverConfig& cfg) {
    LCCFit out;
    out.sample = subsample(problem, pilot, seed);
    if (!has_enough_distinct_rows(problem, out.sample.rows)) {
        out.used_full_problem = true;
        out.solver = fit_wlr_fixed_offsets(problem, pilot.theta_tilde, cfg);
        out.theta = out.solver.theta;
        out.theta_s = out.theta - pilot.theta_tilde;
        return out;
    }
    const WLRProblem sub = problem.restricted(out.sample.rows);
    out.solver = fit_wlr_fixed_offsets(sub, Eigen::VectorXd::Zero(pilot.theta_tilde.size()), cfg);
    out.theta_s = out.solver.theta;
    out.theta = out.theta_s + pilot.theta_tilde;
    return out;
}

}  // namespace cde
