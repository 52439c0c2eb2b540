#include "cde/feature_map.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "cde/errors.hpp"

namespace cde {

namespace {

double ipow(double base, int e) {
    double r = 1.0;
    for (int k = 0; k < e; ++k) r *= base;
    return r;
}

double eval_monomial(const MonomialTerm& t, std::span<const double> x, double y) {
    double v = ipow(y, t.y_exp);
    for (std::size_t k = 0; k < t.x_exp.size(); ++k) v *= ipow(x[k], t.x_exp[k]);
    return v;
}

void probe_opaque(const OpaqueTerm& t, std::size_t x_dim) {
    // A fixed set of x probes; a term constant in y at any of them is rejected.
    const double xs[] = {0.0, 0.37, -1.3, 2.1};
    const double ys[] = {-0.7, 0.25, 1.6};
    std::vector<double> x(x_dim);
    for (double xv : xs) {
        std::fill(x.begin(), x.end(), xv);
        double v[3];
        for (int j = 0; j < 3; ++j) v[j] = t.fn(x, ys[j]);
        if (v[0] == v[1] && v[1] == v[2])
            throw InputError("basis term '" + t.tag + "' is constant in y");
    }
}

}  // namespace

FeatureMap::FeatureMap(std::size_t x_dim, std::vector<BasisTerm> terms, std::string name)
    : x_dim_(x_dim), terms_(std::move(terms)), name_(std::move(name)) {
    if (terms_.empty()) throw InputError("feature map needs at least one basis term");
    for (const auto& term : terms_) {
        if (const auto* m = std::get_if<MonomialTerm>(&term)) {
            if (m->y_exp < 1) throw InputError("monomial basis terms need y exponent >= 1");
            if (m->x_exp.size() != x_dim_)
                throw InputError("monomial x exponent vector has wrong length");
            if (std::any_of(m->x_exp.begin(), m->x_exp.end(), [](int e) { return e < 0; }))
                throw InputError("negative x exponent");
        } else {
            const auto& o = std::get<OpaqueTerm>(term);
            if (!o.fn) throw InputError("opaque basis term '" + o.tag + "' has no evaluator");
            probe_opaque(o, x_dim_);
            all_monomial_ = false;
        }
    }
}

void FeatureMap::check_x(std::span<const double> x) const {
    if (x.size() != x_dim_)
        throw InputError("x has dimension " + std::to_string(x.size()) + ", feature map expects " +
                         std::to_string(x_dim_));
}

void FeatureMap::evaluate_into(std::span<const double> x, double y, double* out) const {
    if (all_monomial_) {
        for (std::size_t k = 0; k < terms_.size(); ++k)
            out[k] = eval_monomial(*std::get_if<MonomialTerm>(&terms_[k]), x, y);
        return;
    }
    for (std::size_t k = 0; k < terms_.size(); ++k) {
        if (const auto* m = std::get_if<MonomialTerm>(&terms_[k]))
            out[k] = eval_monomial(*m, x, y);
        else
            out[k] = std::get<OpaqueTerm>(terms_[k]).fn(x, y);
    }
}

Eigen::VectorXd FeatureMap::evaluate(std::span<const double> x, double y) const {
    check_x(x);
    if (!std::isfinite(y)) throw InputError("y must be finite");
    Eigen::VectorXd h(out_dim());
    evaluate_into(x, y, h.data());
    return h;
}

void FeatureMap::evaluate_grid_into(std::span<const double> x, std::span<const double> ys,
                                    Eigen::MatrixXd& out) const {
    const auto d = static_cast<Eigen::Index>(out_dim());
    out.resize(static_cast<Eigen::Index>(ys.size()), d);
    double buf[64];
    std::vector<double> heap;
    double* h = buf;
    if (out_dim() > 64) {
        heap.resize(out_dim());
        h = heap.data();
    }
    for (std::size_t j = 0; j < ys.size(); ++j) {
        evaluate_into(x, ys[j], h);
        for (Eigen::Index k = 0; k < d; ++k) out(static_cast<Eigen::Index>(j), k) = h[k];
    }
}

Eigen::MatrixXd FeatureMap::evaluate_grid(std::span<const double> x,
                                          std::span<const double> ys) const {
    check_x(x);
    for (double y : ys)
        if (!std::isfinite(y)) throw InputError("y must be finite");
    Eigen::MatrixXd out;
    evaluate_grid_into(x, ys, out);
    return out;
}

Eigen::MatrixXd FeatureMap::evaluate_grid(const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& ys) const {
    return evaluate_grid(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                         std::span<const double>(ys.data(), static_cast<std::size_t>(ys.size())));
}

FeatureMap kernel_a() {
    return FeatureMap(1, {MonomialTerm{{0}, 1}, MonomialTerm{{1}, 1}}, "A");
}

FeatureMap kernel_b() {
    return FeatureMap(1, {MonomialTerm{{0}, 1}, MonomialTerm{{1}, 1}, MonomialTerm{{2}, 1}}, "B");
}

namespace {

// Exponent vectors of length dim with total degree exactly `total`, lexicographic.
void compositions(std::size_t dim, int total, std::vector<int>& cur,
                  std::vector<std::vector<int>>& out) {
    if (cur.size() + 1 == dim) {
        cur.push_back(total);
        out.push_back(cur);
        cur.pop_back();
        return;
    }
    for (int e = total; e >= 0; --e) {
        cur.push_back(e);
        compositions(dim, total - e, cur, out);
        cur.pop_back();
    }
}

}  // namespace

FeatureMap polynomial_kernel(std::size_t x_degree, std::size_t y_degree, std::size_t x_dim) {
    if (y_degree < 1) throw InputError("polynomial kernel needs y degree >= 1");
    if (x_dim < 1) throw InputError("polynomial kernel needs x dimension >= 1");
    std::vector<BasisTerm> terms;
    for (std::size_t b = 1; b <= y_degree; ++b) {
        for (std::size_t a = 0; a <= x_degree; ++a) {
            std::vector<std::vector<int>> exps;
            std::vector<int> cur;
            compositions(x_dim, static_cast<int>(a), cur, exps);
            for (auto& e : exps) terms.emplace_back(MonomialTerm{std::move(e), static_cast<int>(b)});
        }
    }
    return FeatureMap(x_dim, std::move(terms),
                      "poly:" + std::to_string(x_degree) + "," + std::to_string(y_degree));
}

FeatureMap parse_kernel_spec(const std::string& spec, std::size_t x_dim) {
    if (spec == "A" || spec == "B") {
        if (x_dim != 1) throw InputError("kernel " + spec + " needs one explanatory variable");
        return spec == "A" ? kernel_a() : kernel_b();
    }
    const std::string prefix = "poly:";
    if (spec.rfind(prefix, 0) == 0) {
        const auto body = spec.substr(prefix.size());
        const auto comma = body.find(',');
        std::size_t a = 0, b = 0;
        if (comma != std::string::npos) {
            const char* s = body.data();
            auto r1 = std::from_chars(s, s + comma, a);
            auto r2 = std::from_chars(s + comma + 1, s + body.size(), b);
            if (r1.ec == std::errc{} && r1.ptr == s + comma && r2.ec == std::errc{} &&
                r2.ptr == s + body.size())
                return polynomial_kernel(a, b, x_dim);
        }
    }
    throw InputError("unknown kernel spec '" + spec + "' (expected A, B or poly:<x_degree>,<y_degree>)");
}

}  // namespace cde
