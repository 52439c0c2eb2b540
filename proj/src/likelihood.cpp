#include "cde/likelihood.hpp"

#include <cmath>
#include <limits>

#include "cde/errors.hpp"
#include "cde/numeric.hpp"

namespace cde {

Eigen::VectorXd ModelState::eta(double W) const {
    return (alpha.array() - std::log(W)).matrix();
}

void check_dimensions(const Eigen::VectorXd& theta, const Dataset& data,
                      const BackgroundGrid& grid, const FeatureMap& fm) {
    if (static_cast<std::size_t>(theta.size()) != fm.out_dim())
        throw InputError("theta has length " + std::to_string(theta.size()) +
                         ", feature map has " + std::to_string(fm.out_dim()) + " terms");
    if (data.x_dim() != fm.x_dim())
        throw InputError("dataset x dimension " + std::to_string(data.x_dim()) +
                         " does not match feature map (" + std::to_string(fm.x_dim()) + ")");
    if (data.n() == 0) throw InputError("dataset is empty");
    if (grid.m() < 2) throw InputError("background grid needs m >= 2 points");
    if (!theta.allFinite()) throw NumericError("theta has non-finite entries");
}

namespace {

// Per-group quantities shared by every routine in this file.
class GroupEvaluator {
public:
    GroupEvaluator(const Eigen::VectorXd& theta, const Dataset& data, const BackgroundGrid& grid,
                   const FeatureMap& fm)
        : theta_(theta), data_(data), grid_(grid), fm_(fm), h_obs_(fm.out_dim()) {
        check_dimensions(theta, data, grid, fm);
    }

    // Loads group i: observed features, grid features, grid scores and their lse.
    void load(std::size_t i) {
        const auto x = data_.x(i);
        fm_.evaluate_into(x, data_.ys[static_cast<Eigen::Index>(i)], h_obs_.data());
        fm_.evaluate_grid_into(x, grid_.span(), h_grid_);
        if (!h_obs_.allFinite() || !h_grid_.allFinite())
            throw NumericError("non-finite basis value in observation " + std::to_string(i + 1));
        scores_.noalias() = h_grid_ * theta_;
        lse_ = num::log_sum_exp({scores_.data(), static_cast<std::size_t>(scores_.size())});
    }

    double observed_score() const { return h_obs_.dot(theta_); }
    double lse() const { return lse_; }
    const Eigen::VectorXd& h_obs() const { return h_obs_; }
    const Eigen::MatrixXd& h_grid() const { return h_grid_; }
    const Eigen::VectorXd& scores() const { return scores_; }

private:
    const Eigen::VectorXd& theta_;
    const Dataset& data_;
    const BackgroundGrid& grid_;
    const FeatureMap& fm_;
    Eigen::VectorXd h_obs_;
    Eigen::MatrixXd h_grid_;
    Eigen::VectorXd scores_;
    double lse_ = 0.0;
};

}  // namespace

double target_loglik(const Eigen::VectorXd& theta, const Dataset& data,
                     const BackgroundGrid& grid, const FeatureMap& fm) {
    return profile(theta, data, grid, fm).loglik;
}

Profile profile(const Eigen::VectorXd& theta, const Dataset& data, const BackgroundGrid& grid,
                const FeatureMap& fm) {
    GroupEvaluator ev(theta, data, grid, fm);
    Profile out;
    out.alpha.resize(static_cast<Eigen::Index>(data.n()));
    num::Accumulator acc;
    for (std::size_t i = 0; i < data.n(); ++i) {
        ev.load(i);
        out.alpha[static_cast<Eigen::Index>(i)] = -ev.lse();
        acc += ev.observed_score() - ev.lse();
    }
    out.loglik = acc.value();
    return out;
}

Eigen::VectorXd target_score(const Eigen::VectorXd& theta, const Dataset& data,
                             const BackgroundGrid& grid, const FeatureMap& fm) {
    GroupEvaluator ev(theta, data, grid, fm);
    const auto d = theta.size();
    std::vector<num::Accumulator> acc(static_cast<std::size_t>(d));
    Eigen::VectorXd weights;
    Eigen::VectorXd term(d);
    for (std::size_t i = 0; i < data.n(); ++i) {
        ev.load(i);
        weights = (ev.scores().array() - ev.lse()).exp().matrix();
        term.noalias() = ev.h_obs() - ev.h_grid().transpose() * weights;
        for (Eigen::Index k = 0; k < d; ++k) acc[static_cast<std::size_t>(k)] += term[k];
    }
    Eigen::VectorXd g(d);
    for (Eigen::Index k = 0; k < d; ++k) g[k] = acc[static_cast<std::size_t>(k)].value();
    return g;
}

Eigen::VectorXd alpha_closed_form(const Eigen::VectorXd& theta, const Dataset& data,
                                  const BackgroundGrid& grid, const FeatureMap& fm) {
    return profile(theta, data, grid, fm).alpha;
}

double complete_loglik(const Eigen::VectorXd& alpha, const Eigen::VectorXd& theta,
                       const Dataset& data, const BackgroundGrid& grid, const FeatureMap& fm) {
    if (static_cast<std::size_t>(alpha.size()) != data.n())
        throw InputError("alpha has length " + std::to_string(alpha.size()) + ", dataset has " +
                         std::to_string(data.n()) + " observations");
    if (!alpha.allFinite()) throw NumericError("alpha has non-finite entries");
    GroupEvaluator ev(theta, data, grid, fm);
    num::Accumulator acc;
    for (std::size_t i = 0; i < data.n(); ++i) {
        ev.load(i);
        const double a = alpha[static_cast<Eigen::Index>(i)];
        // sum_j exp(a + s_j) = exp(a + lse)
        const double penalty = std::exp(a + ev.lse());
        if (!std::isfinite(penalty)) return -std::numeric_limits<double>::infinity();
        acc += a + ev.observed_score() - penalty;
    }
    return acc.value();
}

}  // namespace cde
