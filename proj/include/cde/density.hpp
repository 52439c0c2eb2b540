#pragma once

#include <span>

#include <Eigen/Core>

#include "cde/dataset.hpp"
#include "cde/feature_map.hpp"

namespace cde {

/// f(y | x) = exp(theta' h(x, y)) / integral over the domain of exp(theta' h(x, u)) du,
/// with the integral computed by the trapezoid rule on quad_points regular
/// nodes, independently of the background grid used for fitting.
///
/// For a logistic-transformed fit the domain is the working scale (0, 1) and
/// all public functions take and return original-scale y; pdf carries the
/// Jacobian u (1 - u) of u = 1 / (1 + e^{-y}).
class ConditionalDensity {
public:
    ConditionalDensity(FeatureMap fm, Eigen::VectorXd theta, Domain domain,
                       Transform transform = Transform::identity,
                       std::size_t quad_points = 1000);

    /// max(10 m, 1000)
    static std::size_t default_quad_points(std::size_t m);

    double pdf(std::span<const double> x, double y) const;
    double cdf(std::span<const double> x, double y) const;
    /// Pseudo-inverse of cdf; p must lie in (0, 1).
    double quantile(std::span<const double> x, double p) const;
    double cond_mean(std::span<const double> x) const;

    /// log of the trapezoid integral of exp(theta' h(x, u)) over the working domain.
    double log_normalizer(std::span<const double> x) const;

    /// Identity transform only: return 0 outside the domain instead of throwing DomainError.
    void set_clamp_outside(bool on) { clamp_outside_ = on; }

    const FeatureMap& feature_map() const { return fm_; }
    const Eigen::VectorXd& theta() const { return theta_; }
    const Domain& domain() const { return domain_; }
    Transform transform() const { return transform_; }
    std::size_t quad_points() const { return quad_points_; }

private:
    struct Table {
        Eigen::VectorXd density;     // normalized working-scale density at the nodes
        Eigen::VectorXd cumulative;  // trapezoid cdf at the nodes, 0 ... 1
    };
    Table tabulate(std::span<const double> x) const;
    double node(std::size_t k) const;
    double working_pdf(std::span<const double> x, double u, double log_z) const;
    double working_cdf(const Table& t, double u) const;

    FeatureMap fm_;
    Eigen::VectorXd theta_;
    Domain domain_;
    Transform transform_;
    std::size_t quad_points_;
    bool clamp_outside_ = false;
};

}  // namespace cde
