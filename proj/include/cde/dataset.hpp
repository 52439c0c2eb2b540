#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace cde {

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Transform { identity, logistic };

std::string to_string(Transform t);
Transform parse_transform(const std::string& s);

/// n observations (x_i, y_i). xs is n x p, row i is x_i.
struct Dataset {
    RowMatrixXd xs;
    Eigen::VectorXd ys;
    /// Whether ys have already been mapped through the logistic function.
    Transform transform = Transform::identity;

    std::size_t n() const { return static_cast<std::size_t>(ys.size()); }
    std::size_t x_dim() const { return static_cast<std::size_t>(xs.cols()); }

    std::span<const double> x(std::size_t i) const {
        return {xs.data() + i * static_cast<std::size_t>(xs.cols()),
                static_cast<std::size_t>(xs.cols())};
    }

    /// Throws InputError if the invariants do not hold.
    void validate() const;
};

Dataset make_dataset(RowMatrixXd xs, Eigen::VectorXd ys,
                     Transform transform = Transform::identity);

struct Domain {
    double lo = 0.0;
    double hi = 1.0;
    double volume() const { return hi - lo; }
    bool contains(double y) const { return y >= lo && y <= hi; }
};

/// [min ys, max ys], optionally widened on each side by padding * (max - min).
Domain domain_from_data(std::span<const double> ys, double padding = 0.0);
inline Domain domain_from_data(const Eigen::VectorXd& ys, double padding = 0.0) {
    return domain_from_data(std::span<const double>(ys.data(), static_cast<std::size_t>(ys.size())),
                            padding);
}

/// Maps every y to 1 / (1 + e^{-y}); the domain becomes [0, 1].
std::pair<Eigen::VectorXd, Domain> apply_logistic(const Eigen::VectorXd& ys);
/// Same, for a whole dataset (sets transform = logistic).
Dataset apply_logistic(const Dataset& data);

enum class GridScheme { regular, uniform_random };

std::string to_string(GridScheme s);
GridScheme parse_grid_scheme(const std::string& s);

/// The m background points shared by every observation, sorted ascending.
struct BackgroundGrid {
    Eigen::VectorXd points;
    GridScheme scheme = GridScheme::regular;
    std::uint64_t seed = 0;
    Domain domain;

    std::size_t m() const { return static_cast<std::size_t>(points.size()); }
    std::span<const double> span() const {
        return {points.data(), static_cast<std::size_t>(points.size())};
    }
};

BackgroundGrid make_grid(const Domain& domain, std::size_t m,
                         GridScheme scheme = GridScheme::regular, std::uint64_t seed = 0);

/// CSV with header x1,...,xp,y. Lines starting with '#' and blank trailing
/// lines are skipped. Throws ParseError naming the offending data row.
Dataset load_csv(const std::filesystem::path& path);
/// Writes with 17 significant digits, so load_csv(save_csv(d)) == d.
void save_csv(const Dataset& data, const std::filesystem::path& path);

}  // namespace cde
