#include "cde/serialize.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "cde/errors.hpp"

namespace cde {

using nlohmann::json;

namespace {

json vec(const Eigen::VectorXd& v) {
    json a = json::array();
    for (double x : v) {
        if (std::isfinite(x))
            a.push_back(x);
        else
            a.push_back(nullptr);
    }
    return a;
}

Eigen::VectorXd to_vec(const json& a) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t k = 0; k < a.size(); ++k)
        v[static_cast<Eigen::Index>(k)] =
            a[k].is_null() ? std::numeric_limits<double>::quiet_NaN() : a[k].get<double>();
    return v;
}

void check_schema(const json& j, const std::string& name) {
    if (!j.is_object() || j.value("schema", "") != name)
        throw SchemaError("expected a '" + name + "' document");
    const int v = j.value("schema_version", -1);
    if (v != kSchemaVersion)
        throw SchemaError("'" + name + "' schema version " + std::to_string(v) +
                          " is not supported (expected " + std::to_string(kSchemaVersion) + ")");
}

}  // namespace

json to_json(const FitConfig& c) {
    json j = {{"W", c.W},
              {"m", c.m},
              {"grid", to_string(c.grid)},
              {"grid_seed", c.grid_seed},
              {"domain_padding", c.domain_padding},
              {"delta", c.delta},
              {"max_outer_iters", c.max_outer_iters},
              {"lcc", c.lcc},
              {"lcc_seed", c.lcc_seed},
              {"lcc_full_first_step", c.lcc_full_first_step},
              {"lcc_fresh_draws", c.lcc_fresh_draws},
              {"ascent_slack", c.ascent_slack},
              {"solver",
               {{"max_newton_iters", c.solver.max_newton_iters},
                {"grad_tol", c.solver.grad_tol},
                {"ridge", c.solver.ridge},
                {"max_ridge", c.solver.max_ridge},
                {"step_halving_max", c.solver.step_halving_max},
                {"divergence_norm", c.solver.divergence_norm}}}};
    j["theta_init"] = c.theta_init ? vec(*c.theta_init) : json(nullptr);
    return j;
}

FitConfig fit_config_from_json(const json& j) {
    FitConfig c;
    c.W = j.value("W", c.W);
    c.m = j.value("m", c.m);
    c.grid = parse_grid_scheme(j.value("grid", to_string(c.grid)));
    c.grid_seed = j.value("grid_seed", c.grid_seed);
    c.domain_padding = j.value("domain_padding", c.domain_padding);
    c.delta = j.value("delta", c.delta);
    c.max_outer_iters = j.value("max_outer_iters", c.max_outer_iters);
    c.lcc = j.value("lcc", c.lcc);
    c.lcc_seed = j.value("lcc_seed", c.lcc_seed);
    c.lcc_full_first_step = j.value("lcc_full_first_step", c.lcc_full_first_step);
    c.lcc_fresh_draws = j.value("lcc_fresh_draws", c.lcc_fresh_draws);
    c.ascent_slack = j.value("ascent_slack", c.ascent_slack);
    if (j.contains("theta_init") && !j["theta_init"].is_null())
        c.theta_init = to_vec(j["theta_init"]);
    if (j.contains("solver")) {
        const auto& s = j["solver"];
        c.solver.max_newton_iters = s.value("max_newton_iters", c.solver.max_newton_iters);
        c.solver.grad_tol = s.value("grad_tol", c.solver.grad_tol);
        c.solver.ridge = s.value("ridge", c.solver.ridge);
        c.solver.max_ridge = s.value("max_ridge", c.solver.max_ridge);
        c.solver.step_halving_max = s.value("step_halving_max", c.solver.step_halving_max);
        c.solver.divergence_norm = s.value("divergence_norm", c.solver.divergence_norm);
    }
    return c;
}

json to_json(const FitResult& res, std::size_t x_dim, bool with_intercepts) {
    json j = {{"schema", "cde.fit"},
              {"schema_version", kSchemaVersion},
              {"kernel", res.kernel},
              {"x_dim", x_dim},
              {"transform", to_string(res.transform)},
              {"domain", {{"lo", res.grid.domain.lo}, {"hi", res.grid.domain.hi}}},
              {"theta_hat", vec(res.theta_hat)},
              {"converged", res.converged},
              {"outer_iters", res.outer_iters},
              {"message", res.message},
              {"config", to_json(res.config)}};
    if (with_intercepts) {
        j["alpha_hat"] = vec(res.alpha_hat);
        j["eta_hat"] = vec(res.eta_hat);
    }
    json trace = json::array();
    for (const auto& t : res.trace) {
        json e = {{"iter", t.iter},
                  {"theta", vec(t.theta)},
                  {"loglik", t.loglik},
                  {"step_sq", t.step_sq},
                  {"newton_iters", t.newton_iters},
                  {"grad_norm", t.grad_norm},
                  {"ridge", t.ridge},
                  {"full_step", t.full_step}};
        if (t.subsample_size) {
            e["subsample_size"] = *t.subsample_size;
            e["expected_subsample_size"] = t.expected_subsample_size;
        }
        trace.push_back(std::move(e));
    }
    j["trace"] = std::move(trace);
    return j;
}

StoredFit stored_fit_from_json(const json& j) {
    check_schema(j, "cde.fit");
    try {
        StoredFit f;
        f.kernel = j.at("kernel").get<std::string>();
        f.x_dim = j.at("x_dim").get<std::size_t>();
        f.transform = parse_transform(j.at("transform").get<std::string>());
        f.domain = {j.at("domain").at("lo").get<double>(), j.at("domain").at("hi").get<double>()};
        f.theta = to_vec(j.at("theta_hat"));
        f.converged = j.value("converged", false);
        f.m = j.at("config").value("m", std::size_t{100});
        return f;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed fit document: ") + e.what());
    }
}

json to_json(const StudySpec& s) {
    return {{"schema", "cde.study"},
            {"schema_version", kSchemaVersion},
            {"model", to_string(s.model)},
            {"kernel", s.kernel},
            {"n", s.n},
            {"reps", s.replicates},
            {"seed", s.base_seed},
            {"threads", s.threads},
            {"fit", to_json(s.fit)}};
}

StudySpec study_spec_from_json(const json& j) {
    if (j.contains("schema")) check_schema(j, "cde.study");
    try {
        StudySpec s;
        s.model = parse_model(j.value("model", std::string("I")));
        s.kernel = j.value("kernel", s.kernel);
        s.n = j.value("n", s.n);
        s.replicates = j.value("reps", s.replicates);
        s.base_seed = j.value("seed", s.base_seed);
        s.threads = j.value("threads", s.threads);
        if (j.contains("fit")) s.fit = fit_config_from_json(j["fit"]);
        // Flat shorthands.
        s.fit.m = j.value("m", s.fit.m);
        s.fit.W = j.value("W", s.fit.W);
        s.fit.delta = j.value("delta", s.fit.delta);
        s.fit.lcc = j.value("lcc", s.fit.lcc);
        return s;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed study spec: ") + e.what());
    }
}

void write_replicates_csv(const StudyResult& res, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(17);
    const std::size_t d = res.summary.size();
    out << csv_schema_line("cde.replicates");
    out << "replicate,seed,converged,outer_iters";
    for (std::size_t k = 0; k < d; ++k) out << ",theta" << k;
    out << '\n';
    for (const auto& r : res.replicates) {
        out << r.index << ',' << r.seed << ',' << (r.converged ? 1 : 0) << ',' << r.outer_iters;
        for (Eigen::Index k = 0; k < r.theta.size(); ++k) {
            out << ',';
            if (std::isfinite(r.theta[k]))
                out << r.theta[k];
            else
                out << "nan";
        }
        out << '\n';
    }
}

std::vector<ReplicateRecord> read_replicates_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string(), 0);
    std::string line;
    const std::string expect = csv_schema_line("cde.replicates");
    while (std::getline(in, line) && !line.empty() && line[0] == '#') {
        if (line.rfind("# schema=", 0) == 0 && line + "\n" != expect)
            throw SchemaError(path.string() + ": unsupported schema line '" + line + "'");
    }
    if (line.rfind("replicate,", 0) != 0) throw ParseError(path.string() + ": missing header", 0);
    std::vector<ReplicateRecord> out;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() < 5) throw ParseError("row " + std::to_string(row) + ": too few columns", row);
        try {
            ReplicateRecord r;
            r.index = std::stoull(cells[0]);
            r.seed = std::stoull(cells[1]);
            r.converged = cells[2] == "1";
            r.outer_iters = std::stoi(cells[3]);
            r.theta.resize(static_cast<Eigen::Index>(cells.size() - 4));
            for (std::size_t k = 4; k < cells.size(); ++k)
                r.theta[static_cast<Eigen::Index>(k - 4)] = std::stod(cells[k]);
            out.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw ParseError("row " + std::to_string(row) + ": malformed value", row);
        }
    }
    return out;
}

void write_summary_csv(const std::vector<CoefficientSummary>& summary,
                       const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(17);
    out << csv_schema_line("cde.summary");
    out << "coefficient,mean,se,true_value\n";
    for (const auto& c : summary) {
        out << c.name << ',' << c.mean << ',' << c.se << ',';
        if (std::isfinite(c.truth))
            out << c.truth;
        else
            out << "NA";
        out << '\n';
    }
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string(), 0);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

void write_json(const json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace cde
