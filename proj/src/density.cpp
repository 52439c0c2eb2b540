#include "cde/density.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cde/errors.hpp"
#include "cde/numeric.hpp"

namespace cde {

ConditionalDensity::ConditionalDensity(FeatureMap fm, Eigen::VectorXd theta, Domain domain,
                                       Transform transform, std::size_t quad_points)
    : fm_(std::move(fm)),
      theta_(std::move(theta)),
      domain_(domain),
      transform_(transform),
      quad_points_(quad_points) {
    if (static_cast<std::size_t>(theta_.size()) != fm_.out_dim())
        throw InputError("theta length does not match the feature map");
    if (!theta_.allFinite()) throw NumericError("theta has non-finite entries");
    if (quad_points_ < 2) throw InputError("quadrature needs at least 2 points");
    if (transform_ == Transform::logistic) domain_ = {0.0, 1.0};
    if (!(domain_.hi > domain_.lo)) throw InputError("domain must satisfy lo < hi");
}

std::size_t ConditionalDensity::default_quad_points(std::size_t m) {
    return std::max<std::size_t>(10 * m, 1000);
}

double ConditionalDensity::node(std::size_t k) const {
    if (k + 1 == quad_points_) return domain_.hi;
    return domain_.lo + domain_.volume() * static_cast<double>(k) /
                            static_cast<double>(quad_points_ - 1);
}

double ConditionalDensity::log_normalizer(std::span<const double> x) const {
    fm_.check_x(x);
    const std::size_t q = quad_points_;
    Eigen::VectorXd g(static_cast<Eigen::Index>(q));
    Eigen::VectorXd h(theta_.size());
    for (std::size_t k = 0; k < q; ++k) {
        fm_.evaluate_into(x, node(k), h.data());
        g[static_cast<Eigen::Index>(k)] = h.dot(theta_);
    }
    if (!g.allFinite()) throw NumericError("non-finite kernel value during normalization");
    const double mx = g.maxCoeff();
    const double step = domain_.volume() / static_cast<double>(q - 1);
    num::Accumulator s;
    for (std::size_t k = 0; k < q; ++k) {
        const double w = (k == 0 || k + 1 == q) ? 0.5 : 1.0;
        s += w * std::exp(g[static_cast<Eigen::Index>(k)] - mx);
    }
    return mx + std::log(s.value() * step);
}

ConditionalDensity::Table ConditionalDensity::tabulate(std::span<const double> x) const {
    const double log_z = log_normalizer(x);
    const std::size_t q = quad_points_;
    Table t;
    t.density.resize(static_cast<Eigen::Index>(q));
    t.cumulative.resize(static_cast<Eigen::Index>(q));
    for (std::size_t k = 0; k < q; ++k)
        t.density[static_cast<Eigen::Index>(k)] = working_pdf(x, node(k), log_z);
    const double step = domain_.volume() / static_cast<double>(q - 1);
    t.cumulative[0] = 0.0;
    for (Eigen::Index k = 1; k < static_cast<Eigen::Index>(q); ++k)
        t.cumulative[k] = t.cumulative[k - 1] + 0.5 * step * (t.density[k - 1] + t.density[k]);
    // Equal to 1 up to rounding; pin it.
    t.cumulative /= t.cumulative[static_cast<Eigen::Index>(q - 1)];
    return t;
}

double ConditionalDensity::working_pdf(std::span<const double> x, double u, double log_z) const {
    Eigen::VectorXd h(theta_.size());
    fm_.evaluate_into(x, u, h.data());
    return std::exp(h.dot(theta_) - log_z);
}

double ConditionalDensity::working_cdf(const Table& t, double u) const {
    if (u <= domain_.lo) return 0.0;
    if (u >= domain_.hi) return 1.0;
    const double pos = (u - domain_.lo) / domain_.volume() * static_cast<double>(quad_points_ - 1);
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(pos), quad_points_ - 2);
    const double frac = pos - static_cast<double>(k);
    const auto ki = static_cast<Eigen::Index>(k);
    return t.cumulative[ki] + frac * (t.cumulative[ki + 1] - t.cumulative[ki]);
}

double ConditionalDensity::pdf(std::span<const double> x, double y) const {
    if (!std::isfinite(y)) throw InputError("y must be finite");
    if (transform_ == Transform::logistic) {
        const double u = num::sigmoid(y);
        return working_pdf(x, u, log_normalizer(x)) * u * (1.0 - u);
    }
    if (!domain_.contains(y)) {
        if (clamp_outside_) return 0.0;
        throw DomainError("y = " + std::to_string(y) + " is outside the domain [" +
                          std::to_string(domain_.lo) + ", " + std::to_string(domain_.hi) + "]");
    }
    return working_pdf(x, y, log_normalizer(x));
}

double ConditionalDensity::cdf(std::span<const double> x, double y) const {
    if (std::isnan(y)) throw InputError("y is NaN");
    const Table t = tabulate(x);
    return working_cdf(t, transform_ == Transform::logistic ? num::sigmoid(y) : y);
}

double ConditionalDensity::quantile(std::span<const double> x, double p) const {
    if (!(p > 0.0 && p < 1.0)) throw InputError("quantile level must lie in (0, 1)");
    const Table t = tabulate(x);
    const auto& c = t.cumulative;
    // First node with cumulative >= p; interpolate linearly inside that cell.
    const auto it = std::lower_bound(c.begin(), c.end(), p);
    auto k = static_cast<Eigen::Index>(it - c.begin());
    k = std::clamp<Eigen::Index>(k, 1, c.size() - 1);
    const double lo = node(static_cast<std::size_t>(k - 1));
    const double hi = node(static_cast<std::size_t>(k));
    const double span = c[k] - c[k - 1];
    const double u = span > 0 ? lo + (p - c[k - 1]) / span * (hi - lo) : lo;
    return transform_ == Transform::logistic ? num::logit(u) : u;
}

double ConditionalDensity::cond_mean(std::span<const double> x) const {
    const double log_z = log_normalizer(x);
    const std::size_t q = quad_points_;
    const double step = domain_.volume() / static_cast<double>(q - 1);
    num::Accumulator acc;
    if (transform_ == Transform::logistic) {
        // logit is unbounded at the end nodes; use cell midpoints.
        for (std::size_t k = 0; k + 1 < q; ++k) {
            const double u = 0.5 * (node(k) + node(k + 1));
            acc += num::logit(u) * working_pdf(x, u, log_z) * step;
        }
        return acc.value();
    }
    for (std::size_t k = 0; k < q; ++k) {
        const double w = (k == 0 || k + 1 == q) ? 0.5 : 1.0;
        const double y = node(k);
        acc += w * step * y * working_pdf(x, y, log_z);
    }
    return acc.value();
}

}  // namespace cde
