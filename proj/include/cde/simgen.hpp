#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cde/dataset.hpp"
#include "cde/feature_map.hpp"
#include "cde/optimizer.hpp"

namespace cde {

/// Conditional exponential models: Y | X = x ~ Exp(rate(x)), X ~ U(0, 1).
/// I: rate 1 + 5x.  II: rate 1 + 5x - 5x^2.
enum class Model { I, II };

std::string to_string(Model m);
Model parse_model(const std::string& s);

double model_rate(Model m, double x);

/// Reproducible from seed; y drawn by inverting the exponential cdf.
Dataset gen_model(Model m, std::size_t n, std::uint64_t seed);

/// True theta of `model` in the basis of `fm`, or NaNs when the basis cannot
/// represent the model (e.g. kernel A for model II).
Eigen::VectorXd true_theta(Model model, const FeatureMap& fm);

struct StudySpec {
    Model model = Model::I;
    std::string kernel = "A";
    std::size_t n = 1000;
    std::size_t replicates = 100;
    std::uint64_t base_seed = 0;
    FitConfig fit;        // fit.m is the number of background points
    unsigned threads = 0;  // 0: CDE_THREADS or hardware concurrency

    void validate() const;
};

/// Seed of replicate r's data; also the parent of its LCC seed.
std::uint64_t replicate_seed(std::uint64_t base_seed, std::size_t r);

struct ReplicateRecord {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    Eigen::VectorXd theta;
    bool converged = false;
    int outer_iters = 0;
    std::string message;
    double max_loglik_decrease = 0.0;  // largest drop between outer iterations (non-LCC fits)
};

struct CoefficientSummary {
    std::string name;  // theta0, theta1, ...
    double mean = 0.0;
    double se = 0.0;   // sample standard deviation across replicates
    double truth = 0.0;  // NaN when not representable
};

struct StudyResult {
    StudySpec spec;
    std::vector<ReplicateRecord> replicates;  // ordered by index
    std::vector<CoefficientSummary> summary;
    std::size_t n_converged = 0;
    std::size_t n_failed = 0;
};

/// Mean and sample SD per coefficient over converged replicates, accumulated
/// in index order.
std::vector<CoefficientSummary> summarize(const std::vector<ReplicateRecord>& reps,
                                          const Eigen::VectorXd& truth);

struct StudyFailure : std::runtime_error {
    StudyFailure(const std::string& msg, StudyResult r)
        : std::runtime_error(msg), result(std::move(r)) {}
    StudyResult result;
};

/// Runs spec.replicates independent simulate-and-fit replicates in parallel.
/// Non-converged replicates are excluded from the summary but counted; more
/// than 20% of them throws StudyFailure (which still carries the result).
StudyResult run_study(const StudySpec& spec);

/// Worker count: explicit request, else CDE_THREADS, else hardware concurrency.
unsigned resolve_threads(unsigned requested);

}  // namespace cde
