// dolbeault: index and identity checks for Hermitian metrics on complex charts.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>

#include "report.hpp"

using namespace dolbeault;
using namespace dolbeault::cli;

namespace {

struct Options {
    std::string manifold;
    std::string metric_file;
    std::optional<int> k;
    std::string formula = "all";
    std::string method;
    std::uint64_t budget = 0;
    double tol = std::numeric_limits<double>::quiet_NaN();
    double fd_step = FDConfig{}.step;
    std::uint64_t seed = 1;
    std::string json_path;
    std::string csv_path;
    bool force = false;
    bool slow = false;
    // verb specific
    std::string suite = "all";
    int points = 0;
    std::string levels;
};

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("manifold,--manifold", o.manifold, "Built-in manifold (cp1, cp2, torus2, torus4, hopf2, hopf3)");
    cmd->add_option("--metric-file", o.metric_file, "Metric DSL file");
    cmd->add_option("-k,--twist", o.k, "Twist charge k");
    cmd->add_option("--fd-step", o.fd_step, "Finite-difference step")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", o.seed, "Seed for sampling and randomized quadrature");
    cmd->add_option("--tol", o.tol, "Tolerance (default depends on verb and dimension)");
    cmd->add_option("--json", o.json_path, "Write the JSON report here ('-' for stdout)");
    cmd->add_flag("--slow", o.slow, "Allow the long-running budgets (10^7 QMC samples in real dimension 6)");
}

void add_quadrature(CLI::App* cmd, Options& o) {
    cmd->add_option("--method", o.method, "gauss, qmc or mc (default: gauss up to real dimension 4, qmc above)")
        ->check(CLI::IsMember({"gauss", "qmc", "mc"}));
    cmd->add_option("--budget", o.budget, "Gauss nodes per dimension, or total QMC/MC samples");
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw Error("cannot read " + path);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

ManifoldSpec load(const Options& o) {
    if (!o.metric_file.empty()) {
        if (!o.manifold.empty())
            throw Error("give either a manifold name or --metric-file, not both");
        return manifold_from_dsl(read_file(o.metric_file), o.k);
    }
    if (o.manifold.empty())
        throw Error("no manifold given (name or --metric-file)");
    return builtin(o.manifold, {o.k.value_or(0)});
}

FDConfig fd_config(const Options& o) {
    FDConfig fd;
    fd.step = o.fd_step;
    fd.validate();
    return fd;
}

QuadratureConfig quadrature(const Options& o, const ManifoldSpec& spec) {
    QuadratureConfig cfg = default_quadrature(spec, o.slow);
    if (!o.method.empty()) {
        cfg.method = method_from_string(o.method);
        if (o.budget == 0 && cfg.method != QuadratureMethod::GaussTensor && cfg.budget < 4096)
            cfg.budget = 1u << 16;
        if (o.budget == 0 && cfg.method == QuadratureMethod::GaussTensor && spec.n == 3)
            cfg.budget = 8;
    }
    if (o.budget != 0)
        cfg.budget = o.budget;
    cfg.seed = o.seed;
    const std::uint64_t gauss_points =
        cfg.method == QuadratureMethod::GaussTensor
            ? static_cast<std::uint64_t>(std::pow(static_cast<double>(cfg.budget), 2 * spec.n))
            : cfg.budget;
    if (gauss_points > 5'000'000 && !o.slow)
        throw Error("budget needs " + std::to_string(gauss_points) + " evaluations; pass --slow to allow it");
    return cfg;
}

void emit_json(const Options& o, const Json& j) {
    if (o.json_path.empty())
        return;
    const std::string text = dump(j) + "\n";
    if (o.json_path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(o.json_path);
    if (!out)
        throw Error("cannot write " + o.json_path);
    out << text;
}

bool table_on_stdout(const Options& o) { return o.json_path != "-"; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void print_manifold(const ManifoldSpec& spec) {
    std::printf("manifold %s (n = %d, chart %s)", spec.name.c_str(), spec.n, to_string(spec.chart_kind));
    if (spec.k != 0)
        std::printf(", twist k = %d", spec.k);
    if (spec.expected_index)
        std::printf(", expected index %d", *spec.expected_index);
    std::printf("\n  kahler %s (max |d omega| %.3g), skt %s (max |d dbar omega| %.3g)\n",
                spec.flags.kahler ? "yes" : "no", spec.flags.kahler_residual, spec.flags.skt ? "yes" : "no",
                spec.flags.skt_residual);
}

int cmd_index(const Options& o) {
    const ManifoldSpec spec = load(o);
    IndexRequest req;
    req.formulas = parse_formulas(o.formula);
    req.explicit_formulas = o.formula != "all";
    req.force = o.force;
    req.fd = fd_config(o);
    req.quadrature = quadrature(o, spec);
    req.tolerance = std::isnan(o.tol) ? default_index_tolerance(spec) : o.tol;
    req.quadrature.tolerance = req.tolerance;
    const auto t0 = std::chrono::steady_clock::now();
    const IndexReport report = run_index(spec, req);
    const double elapsed = seconds_since(t0);
    if (table_on_stdout(o)) {
        print_manifold(spec);
        std::printf("  %s, budget %llu, seed %llu, tolerance %g\n\n", to_string(req.quadrature.method),
                    static_cast<unsigned long long>(req.quadrature.budget),
                    static_cast<unsigned long long>(req.quadrature.seed), req.tolerance);
        std::printf("%-14s %22s %12s %12s %8s %12s  %s\n", "formula", "value", "error", "evaluations", "nearest",
                    "deviation", "status");
        for (const FormulaOutcome& r : report.outcomes)
            std::printf("%-14s %22.15f %12.3e %12llu %8ld %12.3e  %s\n", to_string(r.formula), r.result.value,
                        r.result.error, static_cast<unsigned long long>(r.result.evaluations), r.nearest,
                        r.deviation, r.passed ? "ok" : "FAIL");
        for (const SkippedFormula& s : report.skipped)
            std::printf("%-14s skipped: %s\n", to_string(s.formula), s.reason.c_str());
        std::printf("\n%.2f s\n", elapsed);
    }
    emit_json(o, index_json(spec, req, report));
    return report.passed() ? kExitPass : kExitTolerance;
}

int cmd_check(const Options& o) {
    const ManifoldSpec spec = load(o);
    std::vector<std::string> suites;
    if (o.suite == "all") {
        suites = suite_names();
    } else {
        std::stringstream in(o.suite);
        std::string s;
        while (std::getline(in, s, ','))
            suites.push_back(s);
    }
    const bool all = o.suite == "all";
    SuiteOptions so;
    so.seed = o.seed;
    so.fd = fd_config(o);
    if (!std::isnan(o.tol))
        so.tolerance = o.tol;
    Options qo = o;
    if (qo.budget == 0 && qo.method.empty())
        qo.budget = spec.n == 1 ? 32 : spec.n == 2 ? 20 : 4096;
    so.quadrature = quadrature(qo, spec);

    Json reports = Json::array();
    Json skipped = Json::array();
    bool passed = true;
    if (table_on_stdout(o))
        print_manifold(spec);
    for (const std::string& suite : suites) {
        so.points = o.points > 0 ? o.points : suite == "hopf" ? 100 : 50;
        SuiteReport r;
        try {
            r = run_suite(spec, suite, so);
        } catch (const PreconditionError& e) {
            if (!all)
                throw;
            skipped.push_back({{"suite", suite}, {"reason", e.what()}});
            if (table_on_stdout(o))
                std::printf("\n[%s] skipped: %s\n", suite.c_str(), e.what());
            continue;
        }
        passed = passed && r.passed();
        if (table_on_stdout(o)) {
            std::printf("\n[%s] %d points, seed %llu\n", suite.c_str(), r.points,
                        static_cast<unsigned long long>(r.seed));
            for (const Residual& x : r.residuals) {
                if (x.enforced)
                    std::printf("  %-40s %12.3e  <= %-9.1e %s\n", x.name.c_str(), x.value, x.tolerance,
                                x.passed() ? "ok" : "FAIL");
                else
                    std::printf("  %-40s %12.3e  (info)\n", x.name.c_str(), x.value);
            }
        }
        reports.push_back(suite_json(r));
    }
    Json j;
    j["schema"] = 1;
    j["command"] = "check";
    j["manifold"] = manifold_json(spec);
    j["fd"] = fd_json(so.fd);
    j["seed"] = o.seed;
    j["suites"] = reports;
    j["skipped"] = skipped;
    j["environment"] = environment_json(so.quadrature);
    j["passed"] = passed;
    emit_json(o, j);
    return passed ? kExitPass : kExitTolerance;
}

std::vector<std::uint64_t> convergence_levels(const Options& o, const ManifoldSpec& spec,
                                              const QuadratureConfig& cfg) {
    std::vector<std::uint64_t> levels;
    if (!o.levels.empty()) {
        std::stringstream in(o.levels);
        std::string s;
        while (std::getline(in, s, ','))
            levels.push_back(std::stoull(s));
        return levels;
    }
    if (cfg.method == QuadratureMethod::GaussTensor)
        return spec.n == 1 ? std::vector<std::uint64_t>{16, 32, 64} : std::vector<std::uint64_t>{8, 12, 16, 24};
    if (o.slow)
        return {1u << 16, 1u << 20, 10'000'000};
    return {1u << 12, 1u << 14, 1u << 16};
}

int cmd_convergence(const Options& o) {
    const ManifoldSpec spec = load(o);
    const IndexFormula formula = formula_from_string(o.formula == "all" ? "todd" : o.formula);
    if (!o.force && ((formula == IndexFormula::KahlerAS && !spec.flags.kahler) ||
                     (formula == IndexFormula::BismutSKT && !spec.flags.skt)))
        throw PreconditionError(std::string(to_string(formula)) + " does not apply to " + spec.name +
                                " (use --force)");
    QuadratureConfig cfg = quadrature(o, spec);
    const auto levels = convergence_levels(o, spec, cfg);
    const double tol = std::isnan(o.tol) ? default_index_tolerance(spec) : o.tol;
    const DensityEvaluator eval(GeometryEngine(spec.metric, fd_config(o)), spec.twist());

    std::ostringstream csv;
    csv << "level,evaluations,value,error_estimate\n";
    Json rows = Json::array();
    if (table_on_stdout(o)) {
        print_manifold(spec);
        std::printf("  %s, %s\n\n%12s %12s %22s %12s\n", to_string(formula), to_string(cfg.method), "level",
                    "evaluations", "value", "error");
    }
    IntegralResult last;
    for (std::uint64_t level : levels) {
        cfg.budget = level;
        last = integrate_index(eval, formula_bit(formula), spec.chart, cfg)[static_cast<std::size_t>(formula)];
        char line[160];
        std::snprintf(line, sizeof line, "%llu,%llu,%.17g,%.17g\n", static_cast<unsigned long long>(level),
                      static_cast<unsigned long long>(last.evaluations), last.value, last.error);
        csv << line;
        rows.push_back({{"level", level}, {"result", result_json(last)}});
        if (table_on_stdout(o))
            std::printf("%12llu %12llu %22.15f %12.3e\n", static_cast<unsigned long long>(level),
                        static_cast<unsigned long long>(last.evaluations), last.value, last.error);
    }
    if (!o.csv_path.empty()) {
        if (o.csv_path == "-") {
            std::cout << csv.str();
        } else {
            std::ofstream out(o.csv_path);
            if (!out)
                throw Error("cannot write " + o.csv_path);
            out << csv.str();
        }
    }
    const bool passed = !spec.expected_index || std::abs(last.value - *spec.expected_index) <= tol;
    Json j;
    j["schema"] = 1;
    j["command"] = "convergence";
    j["manifold"] = manifold_json(spec);
    j["formula"] = to_string(formula);
    cfg.budget = levels.empty() ? 0 : levels.back();
    j["quadrature"] = quadrature_json(cfg);
    j["tolerance"] = tol;
    j["seed"] = o.seed;
    j["levels"] = rows;
    j["environment"] = environment_json(cfg);
    j["passed"] = passed;
    emit_json(o, j);
    return passed ? kExitPass : kExitTolerance;
}

int cmd_laplacian(const Options& o) {
    const ManifoldSpec spec = load(o);
    const FDConfig fd = fd_config(o);
    const double tol = std::isnan(o.tol) ? 1e-7 : o.tol;
    const int points = o.points > 0 ? o.points : 100;
    struct Probe {
        std::string name;
        ScalarField f;
    };
    std::vector<Probe> probes{{"1", [](const Point&) { return cplx(1.0); }}};
    for (int j = 0; j < spec.n; ++j)
        probes.push_back({"zbar" + std::to_string(j + 1), [j](const Point& q) { return std::conj(z_coord(q, j)); }});
    // ln(zbar z) is a zero mode of the Hopf metric only
    if (spec.chart_kind == ChartKind::HopfShell)
        probes.push_back({"ln(zbar z)", [](const Point& q) { return cplx(std::log(q.squaredNorm())); }});
    std::vector<double> worst(probes.size(), 0.0);
    for (const Point& p : sample_chart_points(spec.chart, points, o.seed))
        for (std::size_t i = 0; i < probes.size(); ++i)
            worst[i] = std::max(worst[i], std::abs(dolbeault_laplacian0(spec.metric, probes[i].f, p, fd)));
    bool passed = true;
    Json rows = Json::array();
    if (table_on_stdout(o))
        print_manifold(spec);
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const bool ok = worst[i] <= tol;
        passed = passed && ok;
        rows.push_back({{"function", probes[i].name}, {"max", worst[i]}, {"tolerance", tol}, {"passed", ok}});
        if (table_on_stdout(o))
            std::printf("  max |Delta %-12s| %12.3e  <= %-9.1e %s\n", probes[i].name.c_str(), worst[i], tol,
                        ok ? "ok" : "FAIL");
    }
    Json j;
    j["schema"] = 1;
    j["command"] = "laplacian";
    j["manifold"] = manifold_json(spec);
    j["fd"] = fd_json(fd);
    j["points"] = points;
    j["seed"] = o.seed;
    j["probes"] = rows;
    j["passed"] = passed;
    emit_json(o, j);
    return passed ? kExitPass : kExitTolerance;
}

int cmd_parse(const Options& o) {
    const std::string path = o.metric_file.empty() ? o.manifold : o.metric_file;
    if (path.empty())
        throw Error("parse needs a DSL file");
    const std::string text = read_file(path);
    const dsl::MetricProgram prog = dsl::parse_program(text);
    const ManifoldSpec spec = manifold_from_dsl(text, o.k);
    if (table_on_stdout(o)) {
        std::printf("%s", dsl::print(prog).c_str());
        std::printf("# ok: ");
        print_manifold(spec);
    }
    Json j;
    j["schema"] = 1;
    j["command"] = "parse";
    j["file"] = path;
    j["canonical"] = dsl::print(prog);
    j["manifold"] = manifold_json(spec);
    j["passed"] = true;
    emit_json(o, j);
    return kExitPass;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dolbeault index and Hermitian-geometry identity checks"};
    app.require_subcommand(1);
    Options o;

    auto* index = app.add_subcommand("index", "Integrate index densities");
    add_common(index, o);
    add_quadrature(index, o);
    index->add_option("--formula", o.formula, "all, or a comma list of kahler, bismut, smilga, todd");
    index->add_flag("--force", o.force, "Integrate formulas whose Kaehler/SKT precondition fails");

    auto* check = app.add_subcommand("check", "Identity residual suites");
    add_common(check, o);
    add_quadrature(check, o);
    check->add_option("--suite", o.suite, "all, or a comma list of connections, bianchi, skt, hopf, maurer-cartan, "
                                          "deformation");
    check->add_option("--points", o.points, "Sample points per suite (default 50, hopf 100)");

    auto* conv = app.add_subcommand("convergence", "Index value across quadrature levels");
    add_common(conv, o);
    add_quadrature(conv, o);
    conv->add_option("--formula", o.formula, "Single formula (default todd)");
    conv->add_option("--levels", o.levels, "Comma list of budgets");
    conv->add_option("--csv", o.csv_path, "Write level,evaluations,value,error_estimate ('-' for stdout)");
    conv->add_flag("--force", o.force, "Ignore the Kaehler/SKT precondition");

    auto* lap = app.add_subcommand("laplacian", "Dolbeault Laplacian on probe functions");
    add_common(lap, o);
    lap->add_option("--points", o.points, "Sample points (default 100)");

    auto* parse = app.add_subcommand("parse", "Lint a metric DSL file");
    parse->add_option("file", o.manifold, "DSL file");
    parse->add_option("--metric-file", o.metric_file, "DSL file");
    parse->add_option("-k,--twist", o.k, "Twist charge k");
    parse->add_option("--json", o.json_path, "Write the JSON report here ('-' for stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitPass : kExitUsage;
    }

    try {
        if (index->parsed())
            return cmd_index(o);
        if (check->parsed())
            return cmd_check(o);
        if (conv->parsed())
            return cmd_convergence(o);
        if (lap->parsed())
            return cmd_laplacian(o);
        return cmd_parse(o);
    } catch (const dsl::SyntaxError& e) {
        const std::string file = o.metric_file.empty() ? o.manifold : o.metric_file;
        std::fprintf(stderr, "%s:%s\n", file.c_str(), e.what());
        return kExitUsage;
    } catch (const IntegrationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitTolerance;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }
}
