#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cde/errors.hpp"
#include "cde/likelihood.hpp"
#include "cde/optimizer.hpp"
#include "cde/simgen.hpp"
#include "oracles.hpp"

using namespace cde;

namespace {

void check_monotone(const FitResult& r, double slack = 1e-10) {
    for (std::size_t k = 1; k < r.trace.size(); ++k)
        CHECK(r.trace[k].loglik >= r.trace[k - 1].loglik - slack);
}

FitConfig tight(double W = 1e6, std::size_t m = 20) {
    FitConfig c;
    c.W = W;
    c.m = m;
    c.delta = 1e-14;
    c.max_outer_iters = 500;
    return c;
}

}  // namespace

TEST_CASE("outer loop ascends the target log-likelihood") {
    for (auto [model, kernel] : {std::pair{Model::I, "A"}, {Model::I, "B"}, {Model::II, "A"},
                                  {Model::II, "B"}, {Model::II, "poly:2,2"}}) {
        const Dataset d = gen_model(model, 400, 17);
        const FeatureMap fm = parse_kernel_spec(kernel);
        FitConfig cfg;
        cfg.m = 50;
        const FitResult r = fit(d, fm, cfg);
        CHECK(r.converged);
        CHECK(r.trace.front().theta.isZero());
        CHECK(r.trace.size() == static_cast<std::size_t>(r.outer_iters) + 1);
        CHECK(r.trace.back().step_sq < cfg.delta);
        CHECK(r.trace.back().theta == r.theta_hat);
        check_monotone(r);
        CHECK(r.alpha_hat.isApprox(alpha_closed_form(r.theta_hat, d, r.grid, fm), 1e-14));
        CHECK(r.kernel == fm.name());
    }
}

TEST_CASE("restarting at the estimate stops after one outer iteration") {
    const Dataset d = gen_model(Model::I, 300, 23);
    const FeatureMap fm = kernel_b();
    FitConfig cfg = tight(1e6, 40);
    const FitResult first = fit(d, fm, cfg);
    REQUIRE(first.converged);
    cfg.theta_init = first.theta_hat;
    cfg.delta = 1e-12;
    const FitResult again = fit(d, fm, cfg);
    CHECK(again.converged);
    CHECK(again.outer_iters == 1);
    CHECK((again.theta_hat - first.theta_hat).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("agrees with direct maximization of the target likelihood") {
    const Dataset d = gen_model(Model::I, 50, 4);
    const FeatureMap fm = kernel_a();
    const BackgroundGrid g = make_grid(domain_from_data(d.ys), 20);
    const Eigen::VectorXd direct = direct_fit(d, fm, g, 1e-11);
    CHECK(target_score(direct, d, g, fm).lpNorm<Eigen::Infinity>() < 1e-9);

    const FitResult w6 = fit(d, g, fm, tight(1e6));
    const FitResult w8 = fit(d, g, fm, tight(1e8));
    REQUIRE(w6.converged);
    REQUIRE(w8.converged);
    MESSAGE("direct " << direct.transpose() << " | W=1e6 " << w6.theta_hat.transpose()
                      << " | W=1e8 " << w8.theta_hat.transpose());
    CHECK((w6.theta_hat - direct).lpNorm<Eigen::Infinity>() < 1e-3);
    CHECK((w8.theta_hat - direct).lpNorm<Eigen::Infinity>() < 1e-4);
    check_monotone(w6);
    check_monotone(w8);
}

TEST_CASE("estimate is insensitive to W once W is large") {
    const Dataset d = gen_model(Model::I, 50, 4);
    const FeatureMap fm = kernel_a();
    const FitResult w4 = fit(d, fm, tight(1e4));
    const FitResult w8 = fit(d, fm, tight(1e8));
    REQUIRE(w4.converged);
    REQUIRE(w8.converged);
    CHECK((w4.theta_hat - w8.theta_hat).lpNorm<Eigen::Infinity>() < 1e-3);
}

TEST_CASE("direct ascent: stationary start and a one-parameter grid search") {
    const Dataset d = gen_model(Model::II, 40, 8);
    const FeatureMap fm = kernel_b();
    const BackgroundGrid g = make_grid(domain_from_data(d.ys), 15);
    const Eigen::VectorXd opt = direct_fit(d, fm, g, 1e-10);
    const Eigen::VectorXd again = direct_fit(d, fm, g, 1e-10, opt);
    CHECK(again == opt);

    // n = 2, m = 3, h = y.
    Eigen::VectorXd ys(2);
    ys << 0.2, 0.9;
    const Dataset tiny = make_dataset(RowMatrixXd::Zero(2, 1), ys);
    const BackgroundGrid g3 = make_grid({0.0, 1.0}, 3);
    const FeatureMap lin = polynomial_kernel(0, 1);
    const Eigen::VectorXd t = direct_fit(tiny, lin, g3, 1e-12);
    auto f = [&](double th) {
        Eigen::VectorXd v(1);
        v[0] = th;
        return oracle::naive_target_loglik(v, tiny, g3, lin);
    };
    CHECK(std::abs(t[0] - oracle::grid_search_max(f, -20, 20, 1e-2, 1e-10)) < 1e-6);

    const FitResult alg = fit(tiny, g3, lin, tight(1e8, 3));
    CHECK(std::abs(alg.theta_hat[0] - t[0]) < 1e-5);
}

TEST_CASE("LCC variant tracks the full fit") {
    const Dataset d = gen_model(Model::I, 1000, 20240502);
    const FeatureMap fm = kernel_a();
    FitConfig cfg;
    const FitResult full = fit(d, fm, cfg);
    REQUIRE(full.converged);

    cfg.lcc = true;
    cfg.lcc_seed = 99;
    const FitResult lcc = fit_lcc_variant(d, fm, cfg);
    MESSAGE("full " << full.theta_hat.transpose() << " | lcc " << lcc.theta_hat.transpose() << " ("
                    << lcc.message << ")");
    CHECK(lcc.converged);
    CHECK((lcc.theta_hat - full.theta_hat).lpNorm<Eigen::Infinity>() < 0.15);

    const double total = static_cast<double>(d.n() * (1 + cfg.m));
    REQUIRE(lcc.trace.size() >= 3);
    CHECK(lcc.trace[1].full_step);
    std::ostringstream sizes;
    for (std::size_t k = 2; k < lcc.trace.size(); ++k) {
        const auto& e = lcc.trace[k];
        REQUIRE(e.subsample_size.has_value());
        CHECK(std::abs(static_cast<double>(*e.subsample_size) - e.expected_subsample_size) <=
              4 * std::sqrt(e.expected_subsample_size));
        sizes << *e.subsample_size << ' ';
    }
    MESSAGE("subsample sizes: " << sizes.str() << "of " << total);
    // Once the pilot has settled the subsample is a small fraction of all rows.
    CHECK(static_cast<double>(*lcc.trace.back().subsample_size) < 0.15 * total);
}

TEST_CASE("LCC variant requires the flag; estimate dispatches on it") {
    const Dataset d = gen_model(Model::I, 100, 3);
    const FeatureMap fm = kernel_a();
    FitConfig cfg;
    cfg.m = 30;
    CHECK_THROWS_AS(fit_lcc_variant(d, fm, cfg), InputError);
    const FitResult a = estimate(d, fm, cfg);
    const FitResult b = fit(d, fm, cfg);
    CHECK(a.theta_hat == b.theta_hat);
    for (const auto& e : a.trace) CHECK_FALSE(e.subsample_size.has_value());
}

TEST_CASE("iteration limit and invalid configurations") {
    const Dataset d = gen_model(Model::I, 100, 3);
    const FeatureMap fm = kernel_a();
    FitConfig cfg;
    cfg.m = 30;
    cfg.max_outer_iters = 2;
    const FitResult r = fit(d, fm, cfg);
    CHECK_FALSE(r.converged);
    CHECK(r.outer_iters == 2);
    CHECK(r.theta_hat == r.trace.back().theta);

    FitConfig bad;
    bad.W = 0.5;
    CHECK_THROWS_AS(fit(d, fm, bad), InputError);
    bad = {};
    bad.m = 1;
    CHECK_THROWS_AS(fit(d, fm, bad), InputError);
    bad = {};
    bad.delta = 0;
    CHECK_THROWS_AS(fit(d, fm, bad), InputError);
    bad = {};
    bad.theta_init = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(fit(d, fm, bad), InputError);
}

TEST_CASE("identical covariates: fitted grid mean matches the sample mean") {
    const Dataset base = gen_model(Model::I, 200, 31);
    const Dataset d = make_dataset(RowMatrixXd::Constant(200, 1, 0.4), base.ys);
    const FeatureMap fm = polynomial_kernel(0, 1);
    FitConfig cfg = tight(1e10, 100);
    cfg.delta = 1e-20;
    const FitResult r = fit(d, fm, cfg);
    const BackgroundGrid& g = r.grid;
    Eigen::ArrayXd w = (r.theta_hat[0] * g.points.array()).exp();
    const double grid_mean = (w * g.points.array()).sum() / w.sum();
    CHECK(std::abs(grid_mean - d.ys.mean()) < 1e-8);
}
