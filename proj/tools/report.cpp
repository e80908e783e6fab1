#include "report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace dolbeault::cli {

namespace {

void dump_to(std::string& out, const Json& j, int indent, int depth) {
    const auto newline = [&](int d) {
        if (indent < 0)
            return;
        out += '\n';
        out.append(static_cast<std::size_t>(indent * d), ' ');
    };
    switch (j.type()) {
    case Json::value_t::number_float: {
        const double v = j.get<double>();
        if (!std::isfinite(v)) {
            out += "null";
            return;
        }
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out += buf;
        return;
    }
    case Json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        out += '[';
        bool first = true;
        for (const auto& e : j) {
            if (!first)
                out += ',';
            first = false;
            newline(depth + 1);
            dump_to(out, e, indent, depth + 1);
        }
        newline(depth);
        out += ']';
        return;
    }
    case Json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += '{';
        bool first = true;
        for (const auto& [key, value] : j.items()) {
            if (!first)
                out += ',';
            first = false;
            newline(depth + 1);
            out += Json(key).dump();
            out += indent < 0 ? ":" : ": ";
            dump_to(out, value, indent, depth + 1);
        }
        newline(depth);
        out += '}';
        return;
    }
    default: out += j.dump();
    }
}

double max_diff(const Tensor3& s, const Tensor3& t) {
    double m = 0.0;
    for (int a = 0; a < t.dim(); ++a)
        for (int b = 0; b < t.dim(); ++b)
            for (int c = 0; c < t.dim(); ++c)
                m = std::max(m, std::abs(s(a, b, c) - t(a, b, c)));
    return m;
}

/// Running maxima keyed by residual name, in first-seen order.
class ResidualTable {
  public:
    void add(const std::string& name, double value, double tolerance, bool enforced = true) {
        for (Residual& r : rows_)
            if (r.name == name) {
                r.value = std::max(r.value, value);
                return;
            }
        rows_.push_back({name, value, tolerance, enforced});
    }

    std::vector<Residual> take(std::optional<double> override_tolerance) {
        if (override_tolerance)
            for (Residual& r : rows_)
                if (r.enforced)
                    r.tolerance = *override_tolerance;
        return std::move(rows_);
    }

  private:
    std::vector<Residual> rows_;
};

constexpr double kIdentityTolerance = 1e-5;
constexpr double kHopfIdentityTolerance = 1e-8;
constexpr double kLaplacianTolerance = 1e-7;
constexpr double kLaplacianOracleTolerance = 1e-6;
constexpr double kNormTolerance = 1e-9;
constexpr double kDeformationTolerance = 1e-3;

std::string fmt(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

void connections_suite(const ManifoldSpec& spec, const std::vector<Point>& pts, const FDConfig& fd,
                       ResidualTable& t) {
    const GeometryEngine engine(spec.metric, fd);
    const RMat j = complex_structure_matrix(spec.n);
    for (const Point& p : pts) {
        const ConnectionData cd = engine.connection_data(p, kAllConnections);
        t.add("levi_civita.nabla_g", metric_compatibility_residual(cd, ConnectionChoice::LeviCivita),
              kIdentityTolerance);
        t.add("bismut.nabla_g", metric_compatibility_residual(cd, ConnectionChoice::Bismut), kIdentityTolerance);
        t.add("bismut.nabla_I", complex_structure_residual(cd, ConnectionChoice::Bismut), kIdentityTolerance);
        t.add("chern.nabla_g", metric_compatibility_residual(cd, ConnectionChoice::Chern), kIdentityTolerance);
        t.add("chern.nabla_I", complex_structure_residual(cd, ConnectionChoice::Chern), kIdentityTolerance);
        t.add("torsion.antisymmetry", torsion_antisymmetry_residual(cd.torsion), kIdentityTolerance);
        const RealStructure rs{cd.sample.g, j};
        t.add("torsion.holomorphic_vs_real", max_diff(contorsion_real(rs, cd.dg, cd.christoffel), cd.torsion),
              kIdentityTolerance);
        t.add("maurer_cartan", maurer_cartan_residual(cd), kIdentityTolerance);
    }
}

void bianchi_suite(const ManifoldSpec& spec, const std::vector<Point>& pts, const FDConfig& fd,
                   ResidualTable& t) {
    const GeometryEngine engine(spec.metric, fd);
    for (const Point& p : pts) {
        for (ConnectionChoice c : {ConnectionChoice::LeviCivita, ConnectionChoice::Bismut, ConnectionChoice::Chern})
            t.add(std::string("bianchi.") + to_string(c), bianchi_residual(engine, p, c), kIdentityTolerance);
        t.add("riemann_pair.with_dC", riemann_pair_closure_residual(engine, p), kIdentityTolerance);
        // the plain exchange symmetry needs a closed torsion 3-form
        t.add("riemann_pair.plain", riemann_torsion_symmetry_check(engine, p), kIdentityTolerance, spec.flags.skt);
    }
}

void skt_suite(const ManifoldSpec& spec, const std::vector<Point>& pts, const FDConfig& fd, ResidualTable& t) {
    if (!spec.flags.skt)
        throw PreconditionError("suite skt needs an SKT metric; " + spec.name + " has max |d dbar omega| = " +
                                fmt(spec.flags.skt_residual));
    const GeometryEngine engine(spec.metric, fd);
    for (const Point& p : pts) {
        t.add("d_dbar_omega", skt_residual(spec.metric, p, fd), kIdentityTolerance);
        t.add("dC", torsion_exterior_derivative(engine, p).max_abs(), kIdentityTolerance);
        t.add("riemann_pair.plain", riemann_torsion_symmetry_check(engine, p), kIdentityTolerance);
        t.add("d_omega", kahler_defect(spec.metric, p, fd), 0.0, false);
    }
}

void hopf_suite(const ManifoldSpec& spec, const std::vector<Point>& pts, const FDConfig& fd, ResidualTable& t) {
    if (spec.chart_kind != ChartKind::HopfShell)
        throw PreconditionError("suite hopf needs a manifold on the hopf chart; " + spec.name + " uses " +
                                to_string(spec.chart_kind));
    const int n = spec.n;
    const GeometryEngine engine(spec.metric, fd);
    const ScalarField one = [](const Point&) { return cplx(1.0); };
    const ScalarField log_r2 = [](const Point& q) { return cplx(std::log(q.squaredNorm())); };
    const ScalarField abs_z1 = [](const Point& q) { return cplx(std::norm(z_coord(q, 0))); };
    for (const Point& p : pts) {
        const HopfIdentityReport id = hopf_identities(engine, p);
        // F0 is pulled back from CP^{n-1}: F0 ^ F0 vanishes only for n = 2
        t.add("F0^F0.relative", id.ff_relative(), kHopfIdentityTolerance, n == 2);
        t.add("R^R.relative", id.rr_relative(), kHopfIdentityTolerance);
        t.add("laplacian(1)", std::abs(dolbeault_laplacian0(spec.metric, one, p, fd)), kLaplacianTolerance);
        t.add("laplacian(ln zbar z)", std::abs(dolbeault_laplacian0(spec.metric, log_r2, p, fd)),
              kLaplacianTolerance);
        for (int j = 0; j < n; ++j) {
            const ScalarField zbar = [j](const Point& q) { return std::conj(z_coord(q, j)); };
            t.add("laplacian(zbar" + std::to_string(j + 1) + ")",
                  std::abs(dolbeault_laplacian0(spec.metric, zbar, p, fd)), kLaplacianTolerance);
        }
        const double rho = p.squaredNorm();
        const double a = std::norm(z_coord(p, 0));
        t.add("laplacian(|z1|^2) - oracle",
              std::abs(dolbeault_laplacian0(spec.metric, abs_z1, p, fd) - ((n - 1) * a - rho)),
              kLaplacianOracleTolerance);
        PolyForm pform(2 * n);
        for (int j = 0; j < n; ++j)
            pform[1u << (2 * j)] = z_coord(p, j) / rho;
        t.add("|P|^2 - 1", std::abs(form_norm(pform, spec.metric.h(p)) - 1.0), kNormTolerance);
        t.add("h(2w) identification", hopf_identification_residual(spec.metric, p), 1e-12);
    }
}

/// sin(x1) cos(x2) + ln det h, differentiated twice.
double dd_residual(const HermitianMetricField& metric, const Point& p, const FDConfig& fd) {
    const FormField f = [&](const Point& q) {
        const double v = std::sin(q[0]) * std::cos(q[1]) + std::log(std::abs(metric.h(q).determinant()));
        return PolyForm::scalar(static_cast<int>(q.size()), v);
    };
    const FormField df = [&](const Point& q) { return d(f, q, fd, metric.domain); };
    return d(df, p, fd, metric.domain).max_abs();
}

void maurer_cartan_suite(const ManifoldSpec& spec, const std::vector<Point>& pts, const FDConfig& fd,
                         ResidualTable& t) {
    const GeometryEngine engine(spec.metric, fd);
    for (const Point& p : pts)
        t.add("maurer_cartan",
              maurer_cartan_residual(engine.connection_data(p, connection_bit(ConnectionChoice::LeviCivita))),
              kIdentityTolerance);
    // second-order stencils: halving the step divides d(d f) by four; the
    // residue is visible only where the relative step varies, |p| > 1
    Point q = pts.front();
    q *= 1.7 / q.norm();
    const double coarse = dd_residual(spec.metric, q, {2e-2, 2, false});
    const double fine = dd_residual(spec.metric, q, {1e-2, 2, false});
    t.add("d^2 order-2 residual (h=2e-2)", coarse, 0.0, false);
    t.add("d^2 order-2 residual (h=1e-2)", fine, 0.0, false);
    t.add("|ratio/4 - 1|", std::abs(coarse / fine / 4.0 - 1.0), 0.2);
}

void deformation_suite(const ManifoldSpec& spec, const SuiteOptions& options, ResidualTable& t) {
    const auto def = default_deformation(spec);
    if (!def)
        throw PreconditionError("suite deformation has no regular deformation for " + spec.name);
    const double ts[] = {0.0, 0.25, 0.5, 0.75, 1.0};
    const auto probe = deformation_probe(spec, *def, ts, IndexFormula::ToddHRR, options.quadrature, options.fd);
    const double ref = spec.expected_index ? *spec.expected_index : probe.front().result.value;
    for (const DeformationPoint& pt : probe)
        t.add("|index(t=" + fmt(pt.t) + ") - " + (spec.expected_index ? "expected" : "index(0)") + "|",
              std::abs(pt.result.value - ref), kDeformationTolerance);
}

bool applicable(IndexFormula f, const ManifoldSpec& spec) {
    if (f == IndexFormula::KahlerAS)
        return spec.flags.kahler;
    if (f == IndexFormula::BismutSKT)
        return spec.flags.skt;
    return true;
}

std::string precondition_message(IndexFormula f, const ManifoldSpec& spec) {
    std::ostringstream msg;
    msg << to_string(f) << " does not apply to " << spec.name << ": "
        << (f == IndexFormula::KahlerAS ? "max |d omega| = " + fmt(spec.flags.kahler_residual)
                                        : "max |d dbar omega| = " + fmt(spec.flags.skt_residual))
        << " > " << kPreconditionTolerance << " (use --force to integrate anyway)";
    return msg.str();
}

} // namespace

std::string dump(const Json& j, int indent) {
    std::string out;
    dump_to(out, j, indent, 0);
    return out;
}

bool SuiteReport::passed() const {
    return std::all_of(residuals.begin(), residuals.end(), [](const Residual& r) { return r.passed(); });
}

std::vector<std::string> suite_names() {
    return {"connections", "bianchi", "skt", "hopf", "maurer-cartan", "deformation"};
}

SuiteReport run_suite(const ManifoldSpec& spec, const std::string& suite, const SuiteOptions& options) {
    SuiteReport report{suite, options.points, options.seed, {}};
    ResidualTable t;
    if (suite == "deformation") {
        report.points = 0;
        deformation_suite(spec, options, t);
    } else {
        const auto names = suite_names();
        if (std::find(names.begin(), names.end(), suite) == names.end())
            throw PreconditionError("unknown suite '" + suite + "'");
        if (options.points < 1)
            throw PreconditionError("suite needs at least one point");
        const auto pts = sample_chart_points(spec.chart, options.points, options.seed);
        if (suite == "connections")
            connections_suite(spec, pts, options.fd, t);
        else if (suite == "bianchi")
            bianchi_suite(spec, pts, options.fd, t);
        else if (suite == "skt")
            skt_suite(spec, pts, options.fd, t);
        else if (suite == "hopf")
            hopf_suite(spec, pts, options.fd, t);
        else
            maurer_cartan_suite(spec, pts, options.fd, t);
    }
    report.residuals = t.take(options.tolerance);
    return report;
}

bool IndexReport::passed() const {
    return std::all_of(outcomes.begin(), outcomes.end(), [](const FormulaOutcome& o) { return o.passed; });
}

IndexReport run_index(const ManifoldSpec& spec, const IndexRequest& request) {
    IndexReport report;
    report.kahler_residual = spec.flags.kahler_residual;
    report.skt_residual = spec.flags.skt_residual;
    unsigned mask = 0;
    for (IndexFormula f : kAllFormulas) {
        if (!(request.formulas & formula_bit(f)))
            continue;
        if (!applicable(f, spec) && !request.force) {
            if (request.explicit_formulas)
                throw PreconditionError(precondition_message(f, spec));
            report.skipped.push_back({f, precondition_message(f, spec)});
            continue;
        }
        mask |= formula_bit(f);
    }
    if (mask == 0)
        return report;
    const DensityEvaluator eval(GeometryEngine(spec.metric, request.fd), spec.twist());
    const auto results = integrate_index(eval, mask, spec.chart, request.quadrature);
    for (IndexFormula f : kAllFormulas) {
        if (!(mask & formula_bit(f)))
            continue;
        FormulaOutcome o;
        o.formula = f;
        o.result = results[static_cast<std::size_t>(f)];
        o.nearest = std::lround(o.result.value);
        const double target = spec.expected_index ? *spec.expected_index : static_cast<double>(o.nearest);
        o.deviation = std::abs(o.result.value - target);
        o.passed = o.result.tolerance_met && (!spec.expected_index || o.deviation <= request.tolerance);
        report.outcomes.push_back(o);
    }
    return report;
}

unsigned parse_formulas(const std::string& text) {
    if (text == "all")
        return kAllFormulaBits;
    unsigned mask = 0;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty())
            mask |= formula_bit(formula_from_string(item));
    if (mask == 0)
        throw Error("empty formula list");
    return mask;
}

QuadratureConfig default_quadrature(const ManifoldSpec& spec, bool slow) {
    QuadratureConfig cfg;
    const int dim = 2 * spec.n;
    if (dim <= 4) {
        cfg.method = QuadratureMethod::GaussTensor;
        cfg.budget = dim == 2 ? 64 : 24;
    } else {
        cfg.method = QuadratureMethod::QmcSobol;
        cfg.budget = slow ? 10'000'000 : 1u << 16;
    }
    return cfg;
}

double default_index_tolerance(const ManifoldSpec& spec) {
    switch (spec.n) {
    case 1: return 1e-4;
    case 2: return 1e-3;
    default: return 0.05;
    }
}

Json manifold_json(const ManifoldSpec& spec) {
    Json j;
    j["name"] = spec.name;
    j["n"] = spec.n;
    j["chart"] = to_string(spec.chart_kind);
    j["description"] = spec.description;
    j["twist"] = spec.k;
    j["expected_index"] = spec.expected_index ? Json(*spec.expected_index) : Json(nullptr);
    j["flags"] = {{"kahler", spec.flags.kahler},
                  {"skt", spec.flags.skt},
                  {"kahler_residual", spec.flags.kahler_residual},
                  {"skt_residual", spec.flags.skt_residual},
                  {"samples", spec.flags.samples}};
    return j;
}

Json quadrature_json(const QuadratureConfig& cfg) {
    return {{"method", to_string(cfg.method)}, {"budget", cfg.budget},         {"tolerance", cfg.tolerance},
            {"seed", cfg.seed},                 {"replicates", cfg.replicates}};
}

Json fd_json(const FDConfig& fd) { return {{"step", fd.step}, {"order", fd.order}, {"richardson", fd.richardson}}; }

Json result_json(const IntegralResult& r) {
    Json trace = Json::array();
    for (const TracePoint& t : r.trace)
        trace.push_back({{"evaluations", t.evaluations}, {"value", t.value}});
    return {{"value", r.value},
            {"error", r.error},
            {"std_error", r.std_error},
            {"evaluations", r.evaluations},
            {"tolerance_met", r.tolerance_met},
            {"method", to_string(r.method)},
            {"seed", r.seed},
            {"trace", trace}};
}

Json environment_json(const QuadratureConfig& cfg) {
    return {{"library", "dolbeault 1.0.0"},
            {"compiler", __VERSION__},
            {"cplusplus", __cplusplus},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"threads", resolve_threads(cfg.threads)}};
}

Json suite_json(const SuiteReport& report) {
    Json rows = Json::array();
    for (const Residual& r : report.residuals)
        rows.push_back({{"name", r.name},
                        {"max", r.value},
                        {"tolerance", r.enforced ? Json(r.tolerance) : Json(nullptr)},
                        {"passed", r.passed()}});
    return {{"suite", report.suite},
            {"points", report.points},
            {"seed", report.seed},
            {"passed", report.passed()},
            {"residuals", rows}};
}

Json index_json(const ManifoldSpec& spec, const IndexRequest& request, const IndexReport& report) {
    Json results = Json::array();
    for (const FormulaOutcome& o : report.outcomes) {
        Json r = {{"formula", to_string(o.formula)}};
        r.update(result_json(o.result));
        r["nearest_integer"] = o.nearest;
        r["deviation"] = o.deviation;
        r["passed"] = o.passed;
        results.push_back(r);
    }
    Json skipped = Json::array();
    for (const SkippedFormula& s : report.skipped)
        skipped.push_back({{"formula", to_string(s.formula)}, {"reason", s.reason}});
    Json j;
    j["schema"] = 1;
    j["command"] = "index";
    j["manifold"] = manifold_json(spec);
    j["twist"] = spec.k;
    Json formulas = Json::array();
    for (IndexFormula f : kAllFormulas)
        if (request.formulas & formula_bit(f))
            formulas.push_back(to_string(f));
    j["formulas"] = formulas;
    j["force"] = request.force;
    j["tolerance"] = request.tolerance;
    j["quadrature"] = quadrature_json(request.quadrature);
    j["fd"] = fd_json(request.fd);
    j["seed"] = request.quadrature.seed;
    j["results"] = results;
    j["skipped"] = skipped;
    j["checks"] = Json::array({{{"name", "kahler.max_d_omega"}, {"max", report.kahler_residual}},
                               {{"name", "skt.max_d_dbar_omega"}, {"max", report.skt_residual}}});
    j["environment"] = environment_json(request.quadrature);
    j["passed"] = report.passed();
    return j;
}

} // namespace dolbeault::cli
