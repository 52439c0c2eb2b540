#include "cde/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cde/density.hpp"
#include "cde/errors.hpp"
#include "cde/optimizer.hpp"
#include "cde/serialize.hpp"
#include "cde/simgen.hpp"

namespace cde::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

fs::path manifest_path_for(const fs::path& out) {
    fs::path p = out;
    p.replace_extension(".manifest.json");
    return p;
}

void write_manifest(const fs::path& path, const std::string& subcommand,
                    const std::vector<std::string>& args, json config, json inputs, json outputs,
                    std::chrono::steady_clock::time_point started) {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    json j = {{"schema", "cde.manifest"},
              {"schema_version", kSchemaVersion},
              {"tool", "cde"},
              {"tool_version", kToolVersion},
              {"subcommand", subcommand},
              {"argv", args},
              {"config", std::move(config)},
              {"inputs", std::move(inputs)},
              {"outputs", std::move(outputs)},
              {"timings", {{"wall_seconds", wall}}}};
    write_json(j, path);
}

bool parse_on_off(const std::string& v) {
    if (v == "on") return true;
    if (v == "off") return false;
    throw UsageError("--lcc expects on or off, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& s, const char* flag) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(cell, &used));
            if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::logic_error&) {
            throw UsageError(std::string(flag) + ": not a number: '" + cell + "'");
        }
    }
    if (out.empty()) throw UsageError(std::string(flag) + ": empty list");
    return out;
}

// "lo:hi:count" or a comma-separated list of values.
std::vector<double> parse_lattice(const std::string& s, const Domain& dom, Transform tr) {
    if (s.empty()) {
        std::vector<double> ys;
        const int count = 101;
        // Original-scale lattice for logistic fits has to avoid the infinite ends.
        const double lo = tr == Transform::logistic ? -6.0 : dom.lo;
        const double hi = tr == Transform::logistic ? 6.0 : dom.hi;
        for (int k = 0; k < count; ++k) ys.push_back(lo + (hi - lo) * k / (count - 1));
        ys.back() = hi;
        return ys;
    }
    if (std::count(s.begin(), s.end(), ':') == 2) {
        const auto a = s.find(':'), b = s.rfind(':');
        const auto lo = parse_list(s.substr(0, a), "--y").front();
        const auto hi = parse_list(s.substr(a + 1, b - a - 1), "--y").front();
        const auto cnt = parse_list(s.substr(b + 1), "--y").front();
        if (cnt < 2 || cnt != std::floor(cnt)) throw UsageError("--y: count must be an integer >= 2");
        std::vector<double> ys;
        const int count = static_cast<int>(cnt);
        for (int k = 0; k < count; ++k) ys.push_back(lo + (hi - lo) * k / (count - 1));
        ys.back() = hi;
        return ys;
    }
    return parse_list(s, "--y");
}

struct Options {
    // simulate
    std::string model = "I";
    std::size_t n = 1000;
    std::uint64_t seed = 0;
    std::string out;
    // fit
    std::string data;
    std::string kernel = "A";
    std::size_t m = 100;
    double W = 1e6;
    double delta = 1e-6;
    std::string grid = "regular";
    std::string lcc = "off";
    std::uint64_t lcc_seed = 0;
    std::string transform = "identity";
    int max_iters = 200;
    double padding = 0.0;
    bool save_intercepts = false;
    // density
    std::string fit_path;
    std::string x_values;
    std::string y_lattice;
    bool clamp = false;
    // replicate
    std::string spec_path;
    std::size_t reps = 100;
    unsigned threads = 0;
    // summarize
    std::string replicates_path;
};

int cmd_simulate(const Options& o, const std::vector<std::string>& args) {
    const auto t0 = std::chrono::steady_clock::now();
    Model model;
    try {
        model = parse_model(o.model);
    } catch (const InputError& e) {
        throw UsageError(e.what());
    }
    const Dataset data = gen_model(model, o.n, o.seed);
    save_csv(data, o.out);
    write_manifest(manifest_path_for(o.out), "simulate", args,
                   {{"model", to_string(model)}, {"n", o.n}, {"seed", o.seed}}, json::array(),
                   {o.out}, t0);
    std::cout << "wrote " << o.n << " rows to " << o.out << '\n';
    return kOk;
}

int cmd_fit(const Options& o, const std::vector<std::string>& args) {
    const auto t0 = std::chrono::steady_clock::now();
    FitConfig cfg;
    cfg.W = o.W;
    cfg.m = o.m;
    cfg.delta = o.delta;
    cfg.max_outer_iters = o.max_iters;
    cfg.domain_padding = o.padding;
    cfg.grid_seed = o.seed;
    cfg.lcc_seed = o.lcc_seed;
    try {
        cfg.grid = parse_grid_scheme(o.grid);
        cfg.lcc = parse_on_off(o.lcc);
        cfg.validate();
    } catch (const InputError& e) {
        throw UsageError(e.what());
    }
    Transform tr;
    try {
        tr = parse_transform(o.transform);
    } catch (const InputError& e) {
        throw UsageError(e.what());
    }

    Dataset data = load_csv(o.data);
    if (tr == Transform::logistic) data = apply_logistic(data);
    std::optional<FeatureMap> fm;
    try {
        fm.emplace(parse_kernel_spec(o.kernel, data.x_dim()));
    } catch (const InputError& e) {
        throw UsageError(e.what());
    }

    const FitResult res = estimate(data, *fm, cfg);
    write_json(to_json(res, data.x_dim(), o.save_intercepts), o.out);
    json echo = to_json(cfg);
    echo["kernel"] = o.kernel;
    echo["transform"] = to_string(tr);
    write_manifest(manifest_path_for(o.out), "fit", args, echo, {o.data}, {o.out}, t0);

    std::cout << (res.converged ? "converged" : "NOT converged") << " after " << res.outer_iters
              << " outer iterations; theta_hat =";
    for (double v : res.theta_hat) std::cout << ' ' << v;
    std::cout << '\n';
    if (!res.converged) {
        std::cerr << "fit did not converge: " << res.message << '\n';
        return kNonConvergence;
    }
    return kOk;
}

int cmd_density(const Options& o, const std::vector<std::string>& args) {
    const auto t0 = std::chrono::steady_clock::now();
    const StoredFit f = stored_fit_from_json(read_json(o.fit_path));
    const FeatureMap fm = parse_kernel_spec(f.kernel, f.x_dim);
    ConditionalDensity cd(fm, f.theta, f.domain, f.transform,
                          ConditionalDensity::default_quad_points(f.m));
    cd.set_clamp_outside(o.clamp);

    const auto xs_flat = parse_list(o.x_values, "--x");
    if (xs_flat.size() % f.x_dim != 0)
        throw UsageError("--x: number of values must be a multiple of the x dimension");
    const auto ys = parse_lattice(o.y_lattice, f.domain, f.transform);

    // Evaluate everything first so a domain error leaves no partial file.
    std::ostringstream out;
    out.precision(17);
    out << csv_schema_line("cde.density");
    for (std::size_t k = 0; k < f.x_dim; ++k) out << 'x' << (k + 1) << ',';
    out << "y,pdf\n";
    for (std::size_t i = 0; i < xs_flat.size(); i += f.x_dim) {
        const std::span<const double> x(xs_flat.data() + i, f.x_dim);
        for (double y : ys) {
            for (double xv : x) out << xv << ',';
            out << y << ',' << cd.pdf(x, y) << '\n';
        }
    }
    std::ofstream file(o.out);
    if (!file) throw std::runtime_error("cannot write " + o.out);
    file << out.str();
    file.close();
    write_manifest(manifest_path_for(o.out), "density", args,
                   {{"x", o.x_values}, {"y", o.y_lattice}, {"quad_points", cd.quad_points()},
                    {"clamp", o.clamp}, {"schema_version", kSchemaVersion}},
                   {o.fit_path}, {o.out}, t0);
    return kOk;
}

int cmd_replicate(const Options& o, const std::vector<std::string>& args, const CLI::App& sub) {
    const auto t0 = std::chrono::steady_clock::now();
    StudySpec spec;
    if (!o.spec_path.empty()) spec = study_spec_from_json(read_json(o.spec_path));
    // Explicit flags override the spec file.
    try {
        if (sub.count("--model")) spec.model = parse_model(o.model);
        if (sub.count("--kernel")) spec.kernel = o.kernel;
        if (sub.count("--n")) spec.n = o.n;
        if (sub.count("--m")) spec.fit.m = o.m;
        if (sub.count("--reps")) spec.replicates = o.reps;
        if (sub.count("--seed")) spec.base_seed = o.seed;
        if (sub.count("--W")) spec.fit.W = o.W;
        if (sub.count("--delta")) spec.fit.delta = o.delta;
        if (sub.count("--lcc")) spec.fit.lcc = parse_on_off(o.lcc);
        if (sub.count("--threads")) spec.threads = o.threads;
        parse_kernel_spec(spec.kernel);
        spec.validate();
    } catch (const InputError& e) {
        throw UsageError(e.what());
    }

    const fs::path dir = o.out;
    fs::create_directories(dir);
    auto emit = [&](const StudyResult& res) {
        write_json(to_json(res.spec), dir / "study.json");
        write_replicates_csv(res, dir / "replicates.csv");
        write_summary_csv(res.summary, dir / "summary.csv");
        json cfg = to_json(res.spec);
        cfg["threads_used"] = resolve_threads(res.spec.threads);
        write_manifest(dir / "manifest.json", "replicate", args, cfg,
                       o.spec_path.empty() ? json::array() : json::array({o.spec_path}),
                       {(dir / "study.json").string(), (dir / "replicates.csv").string(),
                        (dir / "summary.csv").string()},
                       t0);
        std::cout << "model " << to_string(res.spec.model) << ", kernel " << res.spec.kernel
                  << ": " << res.n_converged << " converged, " << res.n_failed << " failed\n";
        std::cout << "coefficient      mean        se   true\n";
        for (const auto& c : res.summary)
            std::cout << c.name << "  " << c.mean << "  (" << c.se << ")  " << c.truth << '\n';
    };
    try {
        const StudyResult res = run_study(spec);
        emit(res);
    } catch (const StudyFailure& f) {
        emit(f.result);
        std::cerr << f.what() << '\n';
        return kNonConvergence;
    }
    return kOk;
}

int cmd_summarize(const Options& o, const std::vector<std::string>& args) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto reps = read_replicates_csv(o.replicates_path);
    if (reps.empty()) throw DataError("no replicates in " + o.replicates_path);
    Eigen::VectorXd truth =
        Eigen::VectorXd::Constant(reps.front().theta.size(), std::numeric_limits<double>::quiet_NaN());
    if (!o.spec_path.empty()) {
        const StudySpec spec = study_spec_from_json(read_json(o.spec_path));
        truth = true_theta(spec.model, parse_kernel_spec(spec.kernel));
    }
    write_summary_csv(summarize(reps, truth), o.out);
    write_manifest(manifest_path_for(o.out), "summarize", args, json::object(),
                   {o.replicates_path}, {o.out}, t0);
    return kOk;
}

}  // namespace

int run(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return run(args);
}

int run(const std::vector<std::string>& args) {
    CLI::App app{"Conditional density estimation by infinitely weighted logistic regression", "cde"};
    app.require_subcommand(1);
    Options o;

    auto* sim = app.add_subcommand("simulate", "Generate a dataset from model I or II");
    sim->add_option("--model", o.model, "I or II")->required();
    sim->add_option("--n", o.n, "number of observations");
    sim->add_option("--seed", o.seed, "RNG seed");
    sim->add_option("--out", o.out, "output CSV")->required();

    auto* fit = app.add_subcommand("fit", "Fit a conditional density to a CSV dataset");
    fit->add_option("--data", o.data, "input CSV with header x1,...,xp,y")->required();
    fit->add_option("--kernel", o.kernel, "A, B or poly:<x_degree>,<y_degree>");
    fit->add_option("--m", o.m, "number of background points");
    fit->add_option("--W", o.W, "control weight");
    fit->add_option("--delta", o.delta, "tolerance on the squared theta step");
    fit->add_option("--grid", o.grid, "regular or random");
    fit->add_option("--seed", o.seed, "seed for a random background grid");
    fit->add_option("--lcc", o.lcc, "local case-control subsampling: on or off");
    fit->add_option("--lcc-seed", o.lcc_seed, "seed for subsampling");
    fit->add_option("--transform", o.transform, "identity or logistic");
    fit->add_option("--max-iters", o.max_iters, "outer iteration limit");
    fit->add_option("--padding", o.padding, "fractional padding of the data-range domain");
    fit->add_flag("--save-intercepts", o.save_intercepts, "store alpha and eta in the output");
    fit->add_option("--out", o.out, "output JSON")->required();

    auto* den = app.add_subcommand("density", "Evaluate a fitted conditional density");
    den->add_option("--fit", o.fit_path, "fit JSON")->required();
    den->add_option("--x", o.x_values, "comma-separated x values (row-major for p > 1)")->required();
    den->add_option("--y", o.y_lattice, "lo:hi:count or comma-separated y values");
    den->add_flag("--clamp", o.clamp, "pdf 0 outside the domain instead of an error");
    den->add_option("--out", o.out, "output CSV")->required();

    auto* rep = app.add_subcommand("replicate", "Run a simulation study");
    rep->add_option("--spec", o.spec_path, "study spec JSON");
    rep->add_option("--model", o.model, "I or II");
    rep->add_option("--kernel", o.kernel, "A, B or poly:<x_degree>,<y_degree>");
    rep->add_option("--n", o.n, "observations per replicate");
    rep->add_option("--m", o.m, "background points");
    rep->add_option("--reps", o.reps, "number of replicates");
    rep->add_option("--seed", o.seed, "base seed");
    rep->add_option("--W", o.W, "control weight");
    rep->add_option("--delta", o.delta, "outer tolerance");
    rep->add_option("--lcc", o.lcc, "on or off");
    rep->add_option("--threads", o.threads, "worker threads (default: CDE_THREADS or all cores)");
    rep->add_option("--out", o.out, "output directory")->required();

    auto* sum = app.add_subcommand("summarize", "Recompute a study summary from replicates.csv");
    sum->add_option("--replicates", o.replicates_path, "replicates CSV")->required();
    sum->add_option("--spec", o.spec_path, "study spec JSON (for true values)");
    sum->add_option("--out", o.out, "output CSV")->required();

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
        app.parse(std::move(rev));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*sim) return cmd_simulate(o, args);
        if (*fit) return cmd_fit(o, args);
        if (*den) return cmd_density(o, args);
        if (*rep) return cmd_replicate(o, args, *rep);
        if (*sum) return cmd_summarize(o, args);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const InternalError& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kInternal;
    } catch (const ParseError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const NonConvergenceError& e) {
        std::cerr << "non-convergence: " << e.what() << '\n';
        return kNonConvergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDataError;
    }
    return kUsage;
}

}  // namespace cde::cli
