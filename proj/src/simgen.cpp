#include "cde/simgen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <thread>

#include "cde/errors.hpp"
#include "cde/numeric.hpp"
#include "cde/rng.hpp"

namespace cde {

std::string to_string(Model m) { return m == Model::I ? "I" : "II"; }

Model parse_model(const std::string& s) {
    if (s == "I" || s == "1") return Model::I;
    if (s == "II" || s == "2") return Model::II;
    throw InputError("unknown model '" + s + "' (valid models: I, II)");
}

double model_rate(Model m, double x) {
    return m == Model::I ? 1.0 + 5.0 * x : 1.0 + 5.0 * x - 5.0 * x * x;
}

Dataset gen_model(Model m, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw InputError("n must be at least 1");
    rng::Stream s(seed);
    RowMatrixXd xs(static_cast<Eigen::Index>(n), 1);
    Eigen::VectorXd ys(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
        const double x = s.uniform();
        // 1 - u lies in (0, 1], so the log is finite and y >= 0.
        double y = -std::log1p(-s.uniform()) / model_rate(m, x);
        if (y <= 0.0) y = std::numeric_limits<double>::denorm_min();
        xs(i, 0) = x;
        ys[i] = y;
    }
    return make_dataset(std::move(xs), std::move(ys));
}

Eigen::VectorXd true_theta(Model model, const FeatureMap& fm) {
    // log f(y | x) = -rate(x) y + const; rate(x) = sum_a c_a x^a.
    const double coef[3] = {1.0, 5.0, model == Model::I ? 0.0 : -5.0};
    const auto d = static_cast<Eigen::Index>(fm.out_dim());
    const Eigen::VectorXd nan =
        Eigen::VectorXd::Constant(d, std::numeric_limits<double>::quiet_NaN());
    if (fm.x_dim() != 1) return nan;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
    bool covered[3] = {false, false, false};
    for (Eigen::Index k = 0; k < d; ++k) {
        const auto* mono = std::get_if<MonomialTerm>(&fm.terms()[static_cast<std::size_t>(k)]);
        if (!mono) return nan;
        const int a = mono->x_exp[0];
        if (mono->y_exp == 1 && a < 3) {
            theta[k] = -coef[a];
            covered[a] = true;
        }
    }
    for (int a = 0; a < 3; ++a)
        if (coef[a] != 0.0 && !covered[a]) return nan;
    return theta;
}

void StudySpec::validate() const {
    if (replicates < 1) throw InputError("a study needs at least one replicate");
    if (n < 2) throw InputError("a study needs n >= 2");
    fit.validate();
}

std::uint64_t replicate_seed(std::uint64_t base_seed, std::size_t r) {
    return rng::derive_seed(base_seed, static_cast<std::uint64_t>(r));
}

unsigned resolve_threads(unsigned requested) {
    if (requested > 0) return requested;
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("CDE_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return std::min<unsigned>(static_cast<unsigned>(v), hw);
    }
    return hw;
}

std::vector<CoefficientSummary> summarize(const std::vector<ReplicateRecord>& reps,
                                          const Eigen::VectorXd& truth) {
    const auto d = truth.size();
    std::vector<CoefficientSummary> out(static_cast<std::size_t>(d));
    std::size_t count = 0;
    std::vector<num::Accumulator> sum(static_cast<std::size_t>(d));
    for (const auto& r : reps) {
        if (!r.converged) continue;
        ++count;
        for (Eigen::Index k = 0; k < d; ++k) sum[static_cast<std::size_t>(k)] += r.theta[k];
    }
    for (Eigen::Index k = 0; k < d; ++k) {
        auto& c = out[static_cast<std::size_t>(k)];
        c.name = "theta" + std::to_string(k);
        c.truth = truth[k];
        if (count == 0) {
            c.mean = c.se = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        c.mean = sum[static_cast<std::size_t>(k)].value() / static_cast<double>(count);
        num::Accumulator ss;
        for (const auto& r : reps)
            if (r.converged) ss += (r.theta[k] - c.mean) * (r.theta[k] - c.mean);
        c.se = count > 1 ? std::sqrt(ss.value() / static_cast<double>(count - 1)) : 0.0;
    }
    return out;
}

StudyResult run_study(const StudySpec& spec) {
    spec.validate();
    const FeatureMap fm = parse_kernel_spec(spec.kernel);
    StudyResult res;
    res.spec = spec;
    res.replicates.resize(spec.replicates);

    auto run_one = [&](std::size_t r) {
        ReplicateRecord& rec = res.replicates[r];
        rec.index = r;
        rec.seed = replicate_seed(spec.base_seed, r);
        try {
            const Dataset data = gen_model(spec.model, spec.n, rec.seed);
            FitConfig cfg = spec.fit;
            cfg.lcc_seed = rng::derive_seed(rec.seed, 1);
            const FitResult fr = estimate(data, fm, cfg);
            rec.theta = fr.theta_hat;
            rec.converged = fr.converged;
            rec.outer_iters = fr.outer_iters;
            rec.message = fr.message;
            if (!cfg.lcc)
                for (std::size_t k = 1; k < fr.trace.size(); ++k)
                    rec.max_loglik_decrease = std::max(rec.max_loglik_decrease,
                                                       fr.trace[k - 1].loglik - fr.trace[k].loglik);
        } catch (const InternalError&) {
            throw;
        } catch (const std::exception& e) {
            rec.theta = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(fm.out_dim()),
                                                  std::numeric_limits<double>::quiet_NaN());
            rec.converged = false;
            rec.message = e.what();
        }
    };

    const unsigned workers = std::min<unsigned>(resolve_threads(spec.threads),
                                                static_cast<unsigned>(spec.replicates));
    std::atomic<std::size_t> next{0};
    std::exception_ptr fatal;
    std::mutex fatal_mu;
    auto worker = [&] {
        for (std::size_t r; (r = next.fetch_add(1)) < spec.replicates;) {
            try {
                run_one(r);
            } catch (...) {
                std::lock_guard lk(fatal_mu);
                if (!fatal) fatal = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    if (fatal) std::rethrow_exception(fatal);

    for (const auto& r : res.replicates) (r.converged ? res.n_converged : res.n_failed)++;
    res.summary = summarize(res.replicates, true_theta(spec.model, fm));
    if (5 * res.n_failed > spec.replicates)
        throw StudyFailure(std::to_string(res.n_failed) + " of " +
                               std::to_string(spec.replicates) + " replicates did not converge",
                           std::move(res));
    return res;
}

}  // namespace cde
