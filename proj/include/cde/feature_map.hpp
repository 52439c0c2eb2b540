#pragma once

#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace cde {

/// x_1^{x_exp[0]} ... x_p^{x_exp[p-1]} * y^{y_exp}, with y_exp >= 1.
struct MonomialTerm {
    std::vector<int> x_exp;
    int y_exp = 1;
};

/// User-supplied basis function. Validated numerically at construction.
struct OpaqueTerm {
    std::string tag;
    std::function<double(std::span<const double> x, double y)> fn;
};

using BasisTerm = std::variant<MonomialTerm, OpaqueTerm>;

/// Basis expansion h(x, y) of the log-linear kernel theta' h(x, y).
///
/// No basis term may be constant in y: such a term would be absorbed by the
/// per-observation normalizer and its coefficient would be unidentified.
/// Monomials enforce this through y_exp >= 1; opaque terms are probed at
/// three y values for a set of x values and rejected if the outputs coincide.
class FeatureMap {
public:
    FeatureMap(std::size_t x_dim, std::vector<BasisTerm> terms, std::string name = "custom");

    std::size_t x_dim() const { return x_dim_; }
    std::size_t out_dim() const { return terms_.size(); }
    const std::vector<BasisTerm>& terms() const { return terms_; }
    /// CLI spec string ("A", "B", "poly:a,b") or "custom".
    const std::string& name() const { return name_; }

    Eigen::VectorXd evaluate(std::span<const double> x, double y) const;
    Eigen::VectorXd evaluate(const Eigen::VectorXd& x, double y) const {
        return evaluate(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), y);
    }

    /// Writes h(x, y) into out (length out_dim). No allocation, no dimension checks.
    void evaluate_into(std::span<const double> x, double y, double* out) const;

    /// Row j is h(x, ys[j]).
    Eigen::MatrixXd evaluate_grid(std::span<const double> x, std::span<const double> ys) const;
    Eigen::MatrixXd evaluate_grid(const Eigen::VectorXd& x, const Eigen::VectorXd& ys) const;

    /// As evaluate_grid, writing into a preallocated ys.size() x out_dim matrix.
    void evaluate_grid_into(std::span<const double> x, std::span<const double> ys,
                            Eigen::MatrixXd& out) const;

    void check_x(std::span<const double> x) const;

private:
    std::size_t x_dim_;
    std::vector<BasisTerm> terms_;
    std::string name_;
    bool all_monomial_ = true;
};

/// (y, xy)
FeatureMap kernel_a();
/// (y, xy, x^2 y)
FeatureMap kernel_b();
/// All x^a y^b with total x-degree a <= x_degree and 1 <= b <= y_degree,
/// ordered by b, then by x-degree, then lexicographically.
FeatureMap polynomial_kernel(std::size_t x_degree, std::size_t y_degree, std::size_t x_dim = 1);

/// Parses "A", "B" or "poly:<x_degree>,<y_degree>".
FeatureMap parse_kernel_spec(const std::string& spec, std::size_t x_dim = 1);

}  // namespace cde
