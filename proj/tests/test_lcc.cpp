#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "cde/errors.hpp"
#include "cde/lcc.hpp"
#include "cde/likelihood.hpp"
#include "cde/numeric.hpp"
#include "cde/optimizer.hpp"
#include "cde/simgen.hpp"

using namespace cde;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    std::copy(v.begin(), v.end(), out.begin());
    return out;
}

BackgroundGrid manual_grid(std::vector<double> pts) {
    BackgroundGrid g;
    g.points = Eigen::Map<Eigen::VectorXd>(pts.data(), static_cast<Eigen::Index>(pts.size()));
    g.domain = {-1, 1};
    return g;
}

// Full-data fit on a Model I data set, shared by the statistical checks.
struct ModelIInstance {
    Dataset data = gen_model(Model::I, 1000, 20240501);
    FeatureMap fm = kernel_a();
    BackgroundGrid grid;
    Eigen::VectorXd theta_hat;
    Eigen::VectorXd eta;
    double W = 1e6;

    ModelIInstance() {
        FitConfig cfg;
        cfg.delta = 1e-12;
        grid = grid_for(data, cfg);
        const FitResult r = fit(data, grid, fm, cfg);
        REQUIRE(r.converged);
        theta_hat = r.theta_hat;
        eta = r.eta_hat;
    }
};

const ModelIInstance& model_i() {
    static const ModelIInstance inst;
    return inst;
}

}  // namespace

TEST_CASE("zero pilot accepts everything with probability one half") {
    const FeatureMap fm = kernel_b();
    const Pilot pilot{Eigen::VectorXd::Zero(3)};
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int k = 0; k < 50; ++k) {
        const double x = u(gen), y = u(gen);
        CHECK(acceptance_prob(pilot, true, {&x, 1}, y, fm) == 0.5);
        CHECK(acceptance_prob(pilot, false, {&x, 1}, y, fm) == 0.5);
    }
}

TEST_CASE("acceptance along a ray and complementarity") {
    const FeatureMap fm = kernel_b();
    const Eigen::VectorXd dir = vec({0.4, -1.0, 0.7});
    const double x = 0.3, y = 0.8;  // dir' h(x, y) > 0
    REQUIRE(fm.evaluate(vec({x}), y).dot(dir) > 0);
    double prev_case = 1.0, prev_control = 0.0;
    for (double t : {0.0, 1.0, 4.0, 16.0, 64.0, 256.0, 4096.0}) {
        const Pilot p{t * dir};
        const double a1 = acceptance_prob(p, true, {&x, 1}, y, fm);
        const double a0 = acceptance_prob(p, false, {&x, 1}, y, fm);
        CHECK(a1 <= prev_case);
        CHECK(a0 >= prev_control);
        CHECK(a1 + a0 == doctest::Approx(1.0).epsilon(1e-15));
        prev_case = a1;
        prev_control = a0;
    }
    CHECK(prev_case < 1e-30);
    CHECK(prev_control == 1.0);

    std::mt19937_64 gen(3);
    std::normal_distribution<double> nd;
    for (int k = 0; k < 100; ++k) {
        const Pilot p{5 * vec({nd(gen), nd(gen), nd(gen)})};
        const double xs = nd(gen), ys = nd(gen);
        const double s = acceptance_prob(p, true, {&xs, 1}, ys, fm) +
                         acceptance_prob(p, false, {&xs, 1}, ys, fm);
        CHECK(std::abs(s - 1.0) <= 2 * std::numeric_limits<double>::epsilon());
    }
}

TEST_CASE("zero pilot subsample size is binomial with p = 1/2") {
    const Dataset d = gen_model(Model::I, 500, 5);
    const BackgroundGrid g = make_grid(domain_from_data(d.ys), 60);
    const FeatureMap fm = kernel_a();
    WLRProblem p(d, g, fm, Eigen::VectorXd::Constant(500, -10.0), 1e6);
    const Subsample s = subsample(p, Pilot{Eigen::VectorXd::Zero(2)}, 77);
    const double N = static_cast<double>(p.n_rows());
    CHECK(std::abs(static_cast<double>(s.size()) - N / 2) <= 4 * std::sqrt(N / 4));
    CHECK(s.expected_size == doctest::Approx(N / 2));
    CHECK(s.n_cases + s.n_controls == s.size());
    CHECK(std::is_sorted(s.rows.begin(), s.rows.end()));
}

TEST_CASE("extreme pilot keeps controls with high and cases with low pilot probability") {
    // h = y. Pilot slope 50: rows at y = +1 have p~ ~ 1, rows at y = -1 have p~ ~ 0.
    const std::size_t n = 200;
    Eigen::VectorXd ys(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < ys.size(); ++i) ys[i] = (i % 2 == 0) ? 1.0 : -1.0;
    const Dataset d = make_dataset(RowMatrixXd::Zero(static_cast<Eigen::Index>(n), 1), ys);
    const BackgroundGrid g = manual_grid({-1.0, 1.0});
    const FeatureMap fm = polynomial_kernel(0, 1);
    WLRProblem p(d, g, fm, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)), 1.0);
    const Subsample s = subsample(p, Pilot{vec({50.0})}, 9);
    for (std::size_t r : s.rows) CHECK(p.row_y(r) == (p.row(r).z ? -1.0 : 1.0));
    CHECK(s.n_cases == n / 2);
    CHECK(s.n_controls == n);

    // Saturated pilot that rejects every row.
    const Dataset pos = make_dataset(RowMatrixXd::Zero(4, 1), Eigen::VectorXd::Ones(4));
    const BackgroundGrid neg = manual_grid({-1.0});
    WLRProblem q(pos, neg, fm, Eigen::VectorXd::Zero(4), 1.0);
    CHECK_THROWS_AS(subsample(q, Pilot{vec({800.0})}, 1), EmptySubsampleError);
}

TEST_CASE("subsampling is determined by the seed") {
    const Dataset d = gen_model(Model::II, 300, 12);
    const BackgroundGrid g = make_grid(domain_from_data(d.ys), 40);
    const FeatureMap fm = kernel_b();
    WLRProblem p(d, g, fm, Eigen::VectorXd::Constant(300, -12.0), 1e6);
    const Pilot pilot{vec({-1.0, -4.0, 3.0})};
    const Subsample a = subsample(p, pilot, 1234);
    const Subsample b = subsample(p, pilot, 1234);
    const Subsample c = subsample(p, pilot, 1235);
    CHECK(a.rows == b.rows);
    CHECK(a.rows != c.rows);

    // Restricting to a superset of rows does not change which rows are drawn.
    std::vector<std::size_t> evens;
    for (std::size_t r = 0; r < p.n_rows(); r += 2) evens.push_back(r);
    const Subsample e = subsample(p.restricted(evens), pilot, 1234);
    std::vector<std::size_t> expect;
    for (std::size_t r : a.rows)
        if (r % 2 == 0) expect.push_back(r);
    CHECK(e.rows == expect);
}

TEST_CASE("subsampled log-odds equal offset plus (theta - pilot)' h") {
    // Two rows (x, y) with model probability P(z=1) = logistic(eta + theta' h).
    // Enumerate the joint outcomes of (z, w) and condition on acceptance w = 1.
    const FeatureMap fm = kernel_b();
    const Eigen::VectorXd theta = vec({-0.8, -3.0, 1.5});
    const Pilot pilot{vec({0.5, -2.0, 0.7})};
    const double eta = -2.3;
    const double rows[2][2] = {{0.25, 0.6}, {0.9, 1.7}};
    for (const auto& row : rows) {
        const double x = row[0], y = row[1];
        const Eigen::VectorXd h = fm.evaluate(vec({x}), y);
        const double p1 = num::sigmoid(eta + theta.dot(h));
        const double joint_z1_w1 = p1 * acceptance_prob(pilot, true, {&x, 1}, y, fm);
        const double joint_z0_w1 = (1 - p1) * acceptance_prob(pilot, false, {&x, 1}, y, fm);
        const double log_odds = std::log(joint_z1_w1 / joint_z0_w1);
        CHECK(log_odds == doctest::Approx(eta + (theta - pilot.theta_tilde).dot(h)).epsilon(1e-12));
    }
}

TEST_CASE("pilot at the full-data estimate: adjusted estimates average to it") {
    const auto& inst = model_i();
    WLRProblem p(inst.data, inst.grid, inst.fm, inst.eta, inst.W);
    const Pilot pilot{inst.theta_hat};
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(2);
    double size_mean = 0.0, expected = 0.0, variance = 0.0;
    const int reps = 20;
    for (int s = 0; s < reps; ++s) {
        const LCCFit f = fit_lcc(p, pilot, 1000 + static_cast<std::uint64_t>(s));
        CHECK_FALSE(f.used_full_problem);
        CHECK((f.theta - (f.theta_s + pilot.theta_tilde)).norm() == 0.0);
        mean += f.theta / reps;
        size_mean += static_cast<double>(f.sample.size()) / reps;
        expected = f.sample.expected_size;
        variance = f.sample.size_variance;
    }
    MESSAGE("theta_hat = " << inst.theta_hat.transpose() << ", LCC mean = " << mean.transpose());
    CHECK((mean - inst.theta_hat).lpNorm<Eigen::Infinity>() < 0.1);
    CHECK(std::abs(size_mean - expected) <= 4 * std::sqrt(variance));
    MESSAGE("mean subsample " << size_mean << " expected " << expected << " of " << p.n_rows());
}

TEST_CASE("zero pilot: plain thinning with no correction") {
    const auto& inst = model_i();
    WLRProblem p(inst.data, inst.grid, inst.fm, inst.eta, inst.W);
    const LCCFit f = fit_lcc(p, Pilot{Eigen::VectorXd::Zero(2)}, 4321);
    CHECK(f.theta == f.theta_s);
    // Halving every row leaves the log-odds unchanged; the only error is the
    // extra sampling noise from discarding half of the cases.
    MESSAGE("theta_hat = " << inst.theta_hat.transpose() << ", thinned = " << f.theta.transpose());
    CHECK(std::abs(f.theta[0] - inst.theta_hat[0]) < 0.5);
    CHECK(std::abs(f.theta[1] - inst.theta_hat[1]) < 1.5);
}

TEST_CASE("rank-deficient subsample falls back to the full problem") {
    // Pilot that keeps only the y = -1 cases: every accepted row has the same
    // feature vector, fewer than d + 1 = 2 distinct rows.
    Eigen::VectorXd ys(6);
    ys << 1, -1, 1, -1, 0.5, 2;
    const Dataset d = make_dataset(RowMatrixXd::Zero(6, 1), ys);
    const BackgroundGrid g = manual_grid({-1.0});
    const FeatureMap fm = polynomial_kernel(0, 1);
    WLRProblem p(d, g, fm, Eigen::VectorXd::Constant(6, -1.0), 1.0);
    const Pilot pilot{vec({40.0})};
    const Subsample s = subsample(p, pilot, 5);
    REQUIRE(s.size() > 0);
    const LCCFit f = fit_lcc(p, pilot, 5);
    CHECK(f.used_full_problem);
    const WLRFit full = fit_wlr_fixed_offsets(p, pilot.theta_tilde);
    CHECK((f.theta - full.theta).norm() < 1e-12);
}

TEST_CASE("pilot dimension is validated") {
    const FeatureMap fm = kernel_a();
    const double x = 0.1;
    CHECK_THROWS_AS(acceptance_prob(Pilot{Eigen::VectorXd::Zero(3)}, true, {&x, 1}, 0.2, fm),
                    InputError);
}
