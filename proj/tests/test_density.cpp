#include <doctest.h>

#include <cmath>
#include <random>

#include "cde/density.hpp"
#include "cde/errors.hpp"
#include "oracles.hpp"

using namespace cde;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    std::copy(v.begin(), v.end(), out.begin());
    return out;
}

}  // namespace

TEST_CASE("zero theta gives the uniform density") {
    const ConditionalDensity cd(kernel_b(), Eigen::VectorXd::Zero(3), {-1.0, 3.0});
    for (double x : {-2.0, 0.0, 0.7})
        for (double y : {-1.0, 0.0, 1.3, 3.0}) CHECK(cd.pdf({&x, 1}, y) == doctest::Approx(0.25));
    const double x = 0.3;
    CHECK(cd.cond_mean({&x, 1}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cd.cdf({&x, 1}, 0.0) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("kernel A at x = 0.5 is a truncated exponential") {
    const double L = 2.5, x = 0.5, rate = 3.5;
    const ConditionalDensity cd(kernel_a(), vec({-1.0, -5.0}), {0.0, L});
    for (double y : {0.0, 0.3, 0.9, 1.7, 2.5}) {
        const double ref = oracle::truncated_exp_pdf(rate, L, y);
        CHECK(std::abs(cd.pdf({&x, 1}, y) - ref) <= 1e-4 * ref);
    }
    CHECK(std::abs(cd.cond_mean({&x, 1}) - oracle::truncated_exp_mean(rate, L)) < 1e-3);
    // cdf of the truncated exponential: (1 - e^{-ry}) / (1 - e^{-rL})
    for (double y : {0.2, 1.0, 2.0})
        CHECK(std::abs(cd.cdf({&x, 1}, y) - std::expm1(-rate * y) / std::expm1(-rate * L)) < 1e-4);
}

TEST_CASE("pdf integrates to one and is stable under quadrature refinement") {
    std::mt19937_64 gen(12);
    std::uniform_real_distribution<double> ux(-1, 2);
    const FeatureMap fm = polynomial_kernel(2, 2);
    const Eigen::VectorXd th = vec({-0.5, 1.2, -0.8, -1.5, 0.4, 0.3});
    const Domain dom{-2.0, 3.0};
    const ConditionalDensity cd(fm, th, dom, Transform::identity, 1000);
    const ConditionalDensity fine(fm, th, dom, Transform::identity, 10000);
    for (int k = 0; k < 10; ++k) {
        const double x = ux(gen);
        const double mass = oracle::simpson([&](double y) { return cd.pdf({&x, 1}, y); }, dom.lo, dom.hi);
        CHECK(std::abs(mass - 1.0) <= 1e-3);
        for (double y : {-2.0, -0.5, 0.0, 1.1, 2.9}) {
            const double a = cd.pdf({&x, 1}, y), b = fine.pdf({&x, 1}, y);
            CHECK(std::abs(a - b) <= 1e-4 * b);
        }
    }
}

TEST_CASE("cdf is monotone and quantile inverts it") {
    const ConditionalDensity cd(kernel_b(), vec({-0.9, -5.0, 4.7}), {0.0, 4.0}, Transform::identity,
                                1000);
    const double cell = 4.0 / 999;
    for (double x : {0.05, 0.5, 0.95}) {
        CHECK(cd.cdf({&x, 1}, 0.0) == 0.0);
        CHECK(cd.cdf({&x, 1}, 4.0) == doctest::Approx(1.0).epsilon(1e-15));
        double prev = 0.0;
        for (double y = 0.0; y <= 4.0; y += 0.01) {
            const double c = cd.cdf({&x, 1}, y);
            CHECK(c >= prev);
            prev = c;
        }
        for (double y : {0.01, 0.3, 1.0, 2.2, 3.9}) {
            const double p = cd.cdf({&x, 1}, y);
            CHECK(std::abs(cd.quantile({&x, 1}, p) - y) <= cell);
        }
    }
    const double x = 0.2;
    CHECK_THROWS_AS(cd.quantile({&x, 1}, 0.0), InputError);
    CHECK_THROWS_AS(cd.quantile({&x, 1}, 1.0), InputError);
    CHECK_THROWS_AS(cd.quantile({&x, 1}, std::nan("")), InputError);
}

TEST_CASE("equivalent normal kernels give the same density") {
    // exp(-(y - b x)^2 / (2 s2)) versus exp(-(y^2 - 2 y b x) / (2 s2)).
    const double b = 1.3, s2 = 0.6;
    const FeatureMap full(
        1,
        {OpaqueTerm{"normal",
                    [=](std::span<const double> x, double y) {
                        const double r = y - b * x[0];
                        return -r * r / (2 * s2);
                    }}},
        "normal");
    // Monomial basis (y^2, x y) with matched coefficients.
    const FeatureMap mono(1, {MonomialTerm{{0}, 2}, MonomialTerm{{1}, 1}}, "normal-mono");
    const Domain dom{-4.0, 5.0};
    const ConditionalDensity a(full, vec({1.0}), dom);
    const ConditionalDensity c(mono, vec({-1.0 / (2 * s2), b / s2}), dom);
    for (double x : {-1.0, 0.0, 0.8, 2.0})
        for (double y = dom.lo; y <= dom.hi; y += 0.05)
            CHECK(std::abs(a.pdf({&x, 1}, y) - c.pdf({&x, 1}, y)) <= 1e-8);
}

TEST_CASE("logistic-transformed fits report densities on the original scale") {
    // theta = 0 on the working scale is uniform in u, i.e. the standard
    // logistic distribution in y.
    const ConditionalDensity cd(kernel_a(), Eigen::VectorXd::Zero(2), {-50, 50}, Transform::logistic,
                                4000);
    CHECK(cd.domain().lo == 0.0);
    CHECK(cd.domain().hi == 1.0);
    const double x = 0.4;
    for (double y : {-8.0, -1.0, 0.0, 0.5, 3.0, 20.0}) {
        const double s = 1.0 / (1.0 + std::exp(-y));
        CHECK(cd.pdf({&x, 1}, y) == doctest::Approx(s * (1 - s)).epsilon(1e-12));
        CHECK(std::abs(cd.cdf({&x, 1}, y) - s) < 1e-12);
    }
    CHECK(std::abs(cd.quantile({&x, 1}, 0.5)) < 1e-9);
    CHECK(std::abs(cd.quantile({&x, 1}, 0.9) - std::log(9.0)) < 1e-9);
    CHECK(std::abs(cd.cond_mean({&x, 1})) < 1e-9);
    const double mass = oracle::simpson([&](double y) { return cd.pdf({&x, 1}, y); }, -40, 40);
    CHECK(std::abs(mass - 1.0) < 1e-9);

    // Non-trivial working-scale density: original-scale mass still one.
    const ConditionalDensity tilted(kernel_b(), vec({2.0, -1.0, 0.5}), {}, Transform::logistic);
    const double mass2 = oracle::simpson([&](double y) { return tilted.pdf({&x, 1}, y); }, -40, 40);
    CHECK(std::abs(mass2 - 1.0) < 1e-3);
}

TEST_CASE("out-of-domain queries") {
    ConditionalDensity cd(kernel_a(), vec({-1.0, -2.0}), {0.0, 2.0});
    const double x = 0.5;
    CHECK_THROWS_AS(cd.pdf({&x, 1}, -0.1), DomainError);
    CHECK_THROWS_AS(cd.pdf({&x, 1}, 2.1), DomainError);
    CHECK(cd.cdf({&x, 1}, -1.0) == 0.0);
    CHECK(cd.cdf({&x, 1}, 5.0) == 1.0);
    cd.set_clamp_outside(true);
    CHECK(cd.pdf({&x, 1}, -0.1) == 0.0);
    CHECK(cd.pdf({&x, 1}, 1.0) > 0.0);
}

TEST_CASE("construction checks and defaults") {
    CHECK(ConditionalDensity::default_quad_points(20) == 1000);
    CHECK(ConditionalDensity::default_quad_points(100) == 1000);
    CHECK(ConditionalDensity::default_quad_points(500) == 5000);
    CHECK_THROWS_AS(ConditionalDensity(kernel_a(), vec({1.0}), {0.0, 1.0}), InputError);
    CHECK_THROWS_AS(ConditionalDensity(kernel_a(), vec({1.0, 1.0}), {1.0, 1.0}), InputError);
    CHECK_THROWS_AS(ConditionalDensity(kernel_a(), vec({1.0, 1.0}), {0.0, 1.0}, Transform::identity, 1),
                    InputError);
    const double x[2] = {0.1, 0.2};
    const ConditionalDensity cd(kernel_a(), vec({1.0, 1.0}), {0.0, 1.0});
    CHECK_THROWS_AS(cd.pdf({x, 2}, 0.5), InputError);
}
