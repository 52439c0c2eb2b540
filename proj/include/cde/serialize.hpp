#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "cde/dataset.hpp"
#include "cde/optimizer.hpp"
#include "cde/simgen.hpp"
#include "cde/version.hpp"

namespace cde {


/// A structured file with the wrong schema name or version.
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

nlohmann::json to_json(const FitConfig& cfg);
FitConfig fit_config_from_json(const nlohmann::json& j);

/// alpha/eta vectors are included only when with_intercepts is set.
nlohmann::json to_json(const FitResult& res, std::size_t x_dim, bool with_intercepts);

/// What is needed to rebuild the fitted density.
struct StoredFit {
    std::string kernel;
    std::size_t x_dim = 1;
    Transform transform = Transform::identity;
    Domain domain;
    std::size_t m = 0;
    Eigen::VectorXd theta;
    bool converged = false;
};
StoredFit stored_fit_from_json(const nlohmann::json& j);

nlohmann::json to_json(const StudySpec& spec);
StudySpec study_spec_from_json(const nlohmann::json& j);

/// replicate,seed,converged,outer_iters,theta0,...
void write_replicates_csv(const StudyResult& res, const std::filesystem::path& path);
std::vector<ReplicateRecord> read_replicates_csv(const std::filesystem::path& path);
/// coefficient,mean,se,true_value
void write_summary_csv(const std::vector<CoefficientSummary>& summary,
                       const std::filesystem::path& path);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const nlohmann::json& j, const std::filesystem::path& path);

}  // namespace cde
