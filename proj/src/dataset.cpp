#include "cde/dataset.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "cde/errors.hpp"
#include "cde/version.hpp"
#include "cde/numeric.hpp"
#include "cde/rng.hpp"

namespace cde {

std::string to_string(Transform t) { return t == Transform::identity ? "identity" : "logistic"; }

Transform parse_transform(const std::string& s) {
    if (s == "identity" || s == "none") return Transform::identity;
    if (s == "logistic") return Transform::logistic;
    throw InputError("unknown transform '" + s + "' (expected identity or logistic)");
}

std::string to_string(GridScheme s) { return s == GridScheme::regular ? "regular" : "random"; }

GridScheme parse_grid_scheme(const std::string& s) {
    if (s == "regular") return GridScheme::regular;
    if (s == "random" || s == "uniform_random") return GridScheme::uniform_random;
    throw InputError("unknown grid scheme '" + s + "' (expected regular or random)");
}

void Dataset::validate() const {
    if (ys.size() < 1) throw InputError("dataset is empty");
    if (xs.rows() != ys.size()) throw InputError("xs and ys have different lengths");
    if (!xs.allFinite()) throw InputError("non-finite x value");
    if (!ys.allFinite()) throw InputError("non-finite y value");
    if (transform == Transform::logistic &&
        ((ys.array() <= 0.0).any() || (ys.array() >= 1.0).any()))
        throw InputError("logistic-transformed ys must lie strictly inside (0, 1)");
}

Dataset make_dataset(RowMatrixXd xs, Eigen::VectorXd ys, Transform transform) {
    Dataset d;
    d.xs = std::move(xs);
    d.ys = std::move(ys);
    d.transform = transform;
    d.validate();
    return d;
}

Domain domain_from_data(std::span<const double> ys, double padding) {
    if (ys.size() < 2) throw DataError("need at least two observations to determine the domain");
    const auto [mn, mx] = std::minmax_element(ys.begin(), ys.end());
    if (!(*mx > *mn)) throw DataError("all y values are equal; the domain would be degenerate");
    if (padding < 0) throw InputError("domain padding must be non-negative");
    const double pad = padding * (*mx - *mn);
    return {*mn - pad, *mx + pad};
}

std::pair<Eigen::VectorXd, Domain> apply_logistic(const Eigen::VectorXd& ys) {
    Eigen::VectorXd out(ys.size());
    for (Eigen::Index i = 0; i < ys.size(); ++i) out[i] = num::sigmoid(ys[i]);
    return {std::move(out), Domain{0.0, 1.0}};
}

Dataset apply_logistic(const Dataset& data) {
    if (data.transform == Transform::logistic) return data;
    Dataset out = data;
    out.ys = apply_logistic(data.ys).first;
    out.transform = Transform::logistic;
    out.validate();
    return out;
}

BackgroundGrid make_grid(const Domain& domain, std::size_t m, GridScheme scheme,
                         std::uint64_t seed) {
    if (m < 2) throw InputError("background grid needs m >= 2 points");
    if (!(domain.hi > domain.lo)) throw InputError("domain must satisfy lo < hi");
    BackgroundGrid g;
    g.scheme = scheme;
    g.seed = seed;
    g.domain = domain;
    g.points.resize(static_cast<Eigen::Index>(m));
    if (scheme == GridScheme::regular) {
        const double step = domain.volume() / static_cast<double>(m - 1);
        for (std::size_t j = 0; j < m; ++j)
            g.points[static_cast<Eigen::Index>(j)] = domain.lo + step * static_cast<double>(j);
        g.points[static_cast<Eigen::Index>(m - 1)] = domain.hi;
    } else {
        rng::Stream s(seed);
        for (auto& p : g.points) p = s.uniform(domain.lo, domain.hi);
        std::sort(g.points.begin(), g.points.end());
    }
    return g;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, std::size_t row, std::size_t col) {
    const std::string s = trim(raw);
    if (s.empty())
        throw ParseError("row " + std::to_string(row) + ", column " + std::to_string(col + 1) +
                             ": empty cell",
                         row);
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v))
        throw ParseError("row " + std::to_string(row) + ", column " + std::to_string(col + 1) +
                             ": not a finite number: '" + s + "'",
                         row);
    return v;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string(), 0);

    std::string line;
    std::vector<std::string> header;
    const std::string schema = csv_schema_line("cde.dataset");
    while (std::getline(in, line)) {
        if (line.rfind("# schema=", 0) == 0 && line + "\n" != schema)
            throw ParseError(path.string() + ": unsupported schema line '" + line + "'", 0);
        if (line.empty() || line[0] == '#') continue;
        header = split_csv_line(line);
        break;
    }
    if (header.empty()) throw ParseError(path.string() + ": missing header row", 0);
    for (auto& h : header) h = trim(h);
    const std::size_t p = header.size() - 1;
    if (header.size() < 2 || header.back() != "y")
        throw ParseError(path.string() + ": header must be x1,...,xp,y", 0);
    for (std::size_t k = 0; k < p; ++k)
        if (header[k] != "x" + std::to_string(k + 1))
            throw ParseError(path.string() + ": header column " + std::to_string(k + 1) +
                                 " should be x" + std::to_string(k + 1) + ", found '" + header[k] +
                                 "'",
                             0);

    std::vector<double> xs, ys;
    std::size_t row = 0;
    std::vector<std::size_t> blank_rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] == '#') continue;
        ++row;
        if (trim(line).empty() || line == "\r") {
            blank_rows.push_back(row);
            continue;
        }
        if (!blank_rows.empty())
            throw ParseError("row " + std::to_string(blank_rows.front()) + ": blank line", blank_rows.front());
        const auto cells = split_csv_line(line);
        if (cells.size() != p + 1)
            throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(p + 1) +
                                 " columns, found " + std::to_string(cells.size()),
                             row);
        for (std::size_t k = 0; k < p; ++k) xs.push_back(parse_cell(cells[k], row, k));
        ys.push_back(parse_cell(cells[p], row, p));
    }
    if (ys.empty()) throw ParseError(path.string() + ": no data rows", 0);

    const auto n = static_cast<Eigen::Index>(ys.size());
    Dataset d;
    d.xs = Eigen::Map<RowMatrixXd>(
        xs.data(), n, static_cast<Eigen::Index>(p));
    d.ys = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
    d.validate();
    return d;
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(17);
    out << csv_schema_line("cde.dataset");
    for (std::size_t k = 0; k < data.x_dim(); ++k) out << 'x' << (k + 1) << ',';
    out << "y\n";
    for (Eigen::Index i = 0; i < data.ys.size(); ++i) {
        for (Eigen::Index k = 0; k < data.xs.cols(); ++k) out << data.xs(i, k) << ',';
        out << data.ys[i] << '\n';
    }
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace cde
