#include "dolbeault/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

namespace dolbeault {

const char* to_string(ChartKind c) {
    switch (c) {
    case ChartKind::ComplexPlane:
        return "plane";
    case ChartKind::Torus:
        return "torus";
    case ChartKind::HopfShell:
        return "hopf";
    }
    return "?";
}

ChartKind chart_from_string(const std::string& name) {
    if (name == "plane" || name == "cpn")
        return ChartKind::ComplexPlane;
    if (name == "torus")
        return ChartKind::Torus;
    if (name == "hopf")
        return ChartKind::HopfShell;
    throw Error("unknown chart '" + name + "' (expected plane, torus or hopf)");
}

ChartParam make_chart(ChartKind kind, int n) {
    const int dim = 2 * n;
    ChartParam c;
    c.dim = dim;
    switch (kind) {
    case ChartKind::ComplexPlane:
        c.description = "polar per coordinate, r = t/(1-t), theta = 2 pi u";
        c.map = [dim](const Point& u) {
            Point x(dim);
            for (int m = 0; m < dim; m += 2) {
                const double r = u[m] / (1.0 - u[m]);
                const double th = 2.0 * kPi * u[m + 1];
                x[m] = r * std::cos(th);
                x[m + 1] = r * std::sin(th);
            }
            return x;
        };
        c.jacobian = [dim](const Point& u) {
            double j = 1.0;
            for (int m = 0; m < dim; m += 2) {
                const double s = 1.0 - u[m];
                j *= 2.0 * kPi * (u[m] / s) / (s * s);
            }
            return j;
        };
        break;
    case ChartKind::Torus:
        c.description = "unit cube";
        c.map = [](const Point& u) { return u; };
        c.jacobian = [](const Point&) { return 1.0; };
        break;
    case ChartKind::HopfShell:
        c.description = "z = 2^rho sigma(angles), rho in [0,1)";
        c.map = [dim](const Point& u) {
            const double radius = std::exp2(u[0]);
            Point x(dim);
            double s = 1.0;
            for (int i = 1; i < dim - 1; ++i) {
                const double a = kPi * u[i];
                x[i - 1] = s * std::cos(a);
                s *= std::sin(a);
            }
            const double a = 2.0 * kPi * u[dim - 1];
            x[dim - 2] = s * std::cos(a);
            x[dim - 1] = s * std::sin(a);
            return Point(radius * x);
        };
        break;
    }
    return c;
}

ChartDomain chart_domain(ChartKind kind) {
    return kind == ChartKind::HopfShell ? ChartDomain::punctured(0.05) : ChartDomain::whole_space();
}

std::vector<Point> sample_chart_points(const ChartParam& chart, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.02, 0.98);
    std::vector<Point> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Point v(chart.dim);
        for (int m = 0; m < chart.dim; ++m)
            v[m] = u(rng);
        out.push_back(chart(v));
    }
    return out;
}

ManifoldFlags measure_flags(const HermitianMetricField& metric, const ChartParam& chart, int samples,
                            std::uint64_t seed, const FDConfig& cfg) {
    ManifoldFlags f;
    f.samples = samples;
    for (const Point& p : sample_chart_points(chart, samples, seed)) {
        f.kahler_residual = std::max(f.kahler_residual, kahler_defect(metric, p, cfg));
        f.skt_residual = std::max(f.skt_residual, skt_residual(metric, p, cfg));
    }
    f.kahler = f.kahler_residual < kPreconditionTolerance;
    f.skt = f.skt_residual < kPreconditionTolerance;
    return f;
}

HermitianMetricField fubini_study_metric(int n) {
    return {n,
            [n](const Point& p) {
                CVec z(n);
                for (int j = 0; j < n; ++j)
                    z[j] = z_coord(p, j);
                const double s = 1.0 + z.squaredNorm();
                CMat h(n, n);
                for (int j = 0; j < n; ++j)
                    for (int k = 0; k < n; ++k)
                        h(j, k) = -std::conj(z[j]) * z[k] / (s * s);
                // s - |z_j|^2 summed directly; subtracting loses digits when z_j dominates
                for (int j = 0; j < n; ++j) {
                    double rest = 1.0;
                    for (int k = 0; k < n; ++k)
                        if (k != j)
                            rest += std::norm(z[k]);
                    h(j, j) = rest / (s * s);
                }
                return h;
            },
            ChartDomain::whole_space()};
}

HermitianMetricField hopf_metric(int n) {
    return {n, [n](const Point& p) { return CMat(CMat::Identity(n, n) / p.squaredNorm()); },
            chart_domain(ChartKind::HopfShell)};
}

HermitianMetricField flat_metric(int n) {
    return {n, [n](const Point&) { return CMat(CMat::Identity(n, n)); }, ChartDomain::whole_space()};
}

PolyForm fubini_study_generator(const Point& p, int n) {
    const CMat h = fubini_study_metric(n).h(p);
    PolyForm f(2 * n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            const int hj = 2 * j, ak = 2 * k + 1;
            f[(1u << hj) | (1u << ak)] += (hj < ak ? 1.0 : -1.0) * (-kI) * h(j, k);
        }
    return to_real_basis(f);
}

PolyForm torus_generator(const Point&) { return PolyForm::basis(2, {1, 2}, kOrientationSign * 2.0 * kPi); }

namespace {

ManifoldSpec assemble(std::string name, ChartKind chart, HermitianMetricField metric, std::string description) {
    ManifoldSpec s;
    s.name = std::move(name);
    s.n = metric.n;
    s.chart_kind = chart;
    s.metric = std::move(metric);
    s.chart = make_chart(chart, s.n);
    s.description = std::move(description);
    return s;
}

void reject_twist(const BuiltinParams& params, const std::string& name) {
    if (params.k != 0)
        throw Error("manifold '" + name + "' does not support a twist charge (k = " + std::to_string(params.k) + ")");
}

} // namespace

std::vector<std::string> builtin_names() { return {"cp1", "cp2", "torus2", "torus4", "hopf2", "hopf3"}; }

ManifoldSpec builtin(const std::string& name, const BuiltinParams& params) {
    ManifoldSpec s;
    const int k = params.k;
    if (name == "cp1" || name == "cp2") {
        const int n = name == "cp1" ? 1 : 2;
        s = assemble(name, ChartKind::ComplexPlane, fubini_study_metric(n),
                     "CP^" + std::to_string(n) + " with the Fubini-Study metric, twisted by O(k)");
        s.twist_generator = [n](const Point& p) { return fubini_study_generator(p, n); };
        s.k = k;
        s.expected_index = n == 1 ? k + 1 : (k + 1) * (k + 2) / 2;
    } else if (name == "torus2") {
        s = assemble(name, ChartKind::Torus, flat_metric(1), "flat T^2 = C / (Z + iZ) with a constant twist field");
        s.twist_generator = torus_generator;
        s.k = k;
        s.expected_index = k;
    } else if (name == "torus4") {
        reject_twist(params, name);
        s = assemble(name, ChartKind::Torus, flat_metric(2), "flat T^4 = C^2 / Z^4");
        s.expected_index = 0;
    } else if (name == "hopf2" || name == "hopf3") {
        reject_twist(params, name);
        const int n = name == "hopf2" ? 2 : 3;
        s = assemble(name, ChartKind::HopfShell, hopf_metric(n),
                     "Hopf manifold (C^" + std::to_string(n) + " minus 0) / (z ~ 2z), h = delta / (zbar z)");
        s.expected_index = 0;
    } else {
        std::string known;
        for (const auto& b : builtin_names())
            known += (known.empty() ? "" : ", ") + b;
        throw Error("unknown manifold '" + name + "' (built-ins: " + known + ")");
    }
    s.flags = measure_flags(s.metric, s.chart);
    return s;
}

// ---------------------------------------------------------------------------
// DSL

namespace {

int manifest_int(const dsl::ManifestValue& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const int x = std::stoi(v.text, &used);
        if (used == v.text.size())
            return x;
    } catch (const std::exception&) {
    }
    throw dsl::SyntaxError(v.line, v.column, "@" + key + " needs an integer, found '" + v.text + "'", {"integer"});
}

std::string entry_name(int j, int k) {
    return "h[" + std::to_string(j + 1) + "][" + std::to_string(k + 1) + "]";
}

} // namespace

ManifoldSpec manifold_from_dsl(std::string_view text, std::optional<int> k_override) {
    const dsl::MetricProgram prog = dsl::parse_program(text);
    static const std::set<std::string> known{"name", "n", "chart", "twist", "expected_index"};
    for (const auto& [key, v] : prog.manifest)
        if (!known.count(key))
            throw dsl::SyntaxError(v.line, v.column, "unknown manifest key '@" + key + "'",
                                   {"@name", "@n", "@chart", "@twist", "@expected_index"});
    if (prog.entries.empty())
        throw MetricError("metric text assigns no entries");

    int n = 0;
    for (const auto& [jk, e] : prog.entries)
        n = std::max({n, jk.first + 1, jk.second + 1, dsl::coordinates_used(*e)});
    if (auto it = prog.manifest.find("n"); it != prog.manifest.end()) {
        const int declared = manifest_int(it->second, "n");
        if (declared < 1 || declared > kMaxComplexDim)
            throw dsl::SyntaxError(it->second.line, it->second.column,
                                   "@n must be between 1 and " + std::to_string(kMaxComplexDim), {});
        if (declared < n)
            throw MetricError("@n = " + std::to_string(declared) + " but the entries use dimension " +
                              std::to_string(n));
        n = declared;
    }

    ChartKind chart = ChartKind::ComplexPlane;
    if (auto it = prog.manifest.find("chart"); it != prog.manifest.end()) {
        try {
            chart = chart_from_string(it->second.text);
        } catch (const Error&) {
            throw dsl::SyntaxError(it->second.line, it->second.column, "unknown chart '" + it->second.text + "'",
                                   {"plane", "torus", "hopf"});
        }
    }

    std::vector<dsl::ExprPtr> cells(static_cast<std::size_t>(n * n));
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            auto it = prog.entries.find({j, k});
            if (it != prog.entries.end()) {
                cells[static_cast<std::size_t>(j * n + k)] = it->second;
                continue;
            }
            auto mirror = prog.entries.find({k, j});
            if (j == k)
                throw MetricError("Hermiticity: diagonal entry " + entry_name(j, j) + " is missing");
            cells[static_cast<std::size_t>(j * n + k)] =
                mirror != prog.entries.end() ? dsl::make_call(dsl::Func::Conj, mirror->second) : dsl::make_number(0.0);
        }

    auto eval = [n, cells](const Point& p) {
        CMat h(n, n);
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                h(j, k) = dsl::evaluate(*cells[static_cast<std::size_t>(j * n + k)], p);
        return h;
    };

    ManifoldSpec s;
    s.n = n;
    s.chart_kind = chart;
    s.chart = make_chart(chart, n);
    s.metric = {n, eval, chart_domain(chart)};
    s.name = "custom";
    if (auto it = prog.manifest.find("name"); it != prog.manifest.end())
        s.name = it->second.text;
    s.description = "metric text, chart " + std::string(to_string(chart));

    for (const Point& p : sample_chart_points(s.chart, kDslSamplePoints, 11)) {
        const CMat h = eval(p);
        if (!h.allFinite())
            throw MetricError("metric is not finite at " + format_point(p));
        const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
        for (int j = 0; j < n; ++j)
            for (int k = j; k < n; ++k) {
                const double mismatch = std::abs(h(j, k) - std::conj(h(k, j)));
                if (mismatch > 1e-12 * scale) {
                    std::ostringstream msg;
                    msg << "Hermiticity: " << entry_name(j, k) << " != conj(" << entry_name(k, j) << ") at "
                        << format_point(p) << " (difference " << mismatch << ")";
                    throw MetricError(msg.str());
                }
            }
        Eigen::LLT<CMat> llt(h);
        if (llt.info() != Eigen::Success)
            throw MetricError("metric is not positive-definite at " + format_point(p));
    }

    if (auto it = prog.manifest.find("expected_index"); it != prog.manifest.end())
        s.expected_index = manifest_int(it->second, "expected_index");
    s.k = 0;
    if (auto it = prog.manifest.find("twist"); it != prog.manifest.end())
        s.k = manifest_int(it->second, "twist");
    if (k_override)
        s.k = *k_override;
    if (chart == ChartKind::ComplexPlane)
        s.twist_generator = [n](const Point& p) { return fubini_study_generator(p, n); };
    else if (chart == ChartKind::Torus && n == 1)
        s.twist_generator = torus_generator;
    if (s.k != 0 && !s.twist_generator)
        throw Error("a twist charge needs the plane chart or a one-dimensional torus");

    s.flags = measure_flags(s.metric, s.chart);
    return s;
}

HermitianMetricField parse_metric(std::string_view text) { return manifold_from_dsl(text).metric; }

// ---------------------------------------------------------------------------
// Hopf checks

cplx dolbeault_laplacian0(const HermitianMetricField& metric, const ScalarField& f, const Point& p,
                          const FDConfig& cfg) {
    const int n = metric.n;
    auto flux = [&](const Point& q) {
        const CMat h = metric.h(q);
        const double det = h.determinant().real();
        const CVec df = del_holo(f, q, cfg, metric.domain);
        return CVec(det * (h.inverse() * df));
    };
    cplx div = 0.0;
    for (int k = 0; k < n; ++k) {
        const CVec dx = partial(flux, p, 2 * k, cfg, metric.domain);
        const CVec dy = partial(flux, p, 2 * k + 1, cfg, metric.domain);
        div += 0.5 * (dx[k] + kI * dy[k]);
    }
    return -div / metric.h(p).determinant().real();
}

HopfIdentityReport hopf_identities(const GeometryEngine& engine, const Point& p) {
    const CurvatureData cv = engine.curvature_data(p, connection_bit(ConnectionChoice::LeviCivita));
    HopfIdentityReport r;
    const PolyForm& f = cv.f0;
    r.ff = wedge(f, f).max_abs();
    r.ff_scale = f.max_abs() * f.max_abs();
    const MatrixPolyForm rm = cv.real_matrix(ConnectionChoice::LeviCivita);
    r.rr = (rm * rm).max_abs();
    r.rr_scale = rm.max_abs() * rm.max_abs();
    return r;
}

double form_norm(const PolyForm& a, const CMat& h) {
    const int dim = a.dim();
    const int n = dim / 2;
    if (h.rows() != n)
        throw DimensionError("form_norm: metric size does not match the form");
    std::uint32_t holo = 0;
    for (int b = 0; b < dim; b += 2)
        holo |= 1u << b;
    int degree = -1;
    std::vector<std::uint32_t> masks;
    for (std::uint32_t m = 0; m < a.size(); ++m) {
        if (a[m] == cplx(0.0))
            continue;
        if (m & ~holo)
            throw PreconditionError("form_norm needs a (p,0)-form; found a dzbar component");
        const int deg = std::popcount(m);
        if (degree >= 0 && deg != degree)
            throw PreconditionError("form_norm needs a form of a single degree");
        degree = deg;
        masks.push_back(m);
    }
    if (masks.empty())
        return 0.0;
    const CMat hinv = h.inverse();
    auto indices = [](std::uint32_t m) {
        std::vector<int> out;
        for (int b = 0; b < 32; b += 2)
            if (m & (1u << b))
                out.push_back(b / 2);
        return out;
    };
    cplx sum = 0.0;
    for (std::uint32_t mi : masks) {
        const auto ii = indices(mi);
        for (std::uint32_t mj : masks) {
            const auto jj = indices(mj);
            CMat sub(degree, degree);
            for (int x = 0; x < degree; ++x)
                for (int y = 0; y < degree; ++y)
                    sub(x, y) = hinv(jj[static_cast<std::size_t>(x)], ii[static_cast<std::size_t>(y)]);
            sum += a[mi] * std::conj(a[mj]) * (degree == 0 ? cplx(1.0) : sub.determinant());
        }
    }
    return sum.real();
}

double hopf_identification_residual(const HermitianMetricField& metric, const Point& w) {
    const Point w2 = 2.0 * w;
    return (4.0 * metric.h(w2) - metric.h(w)).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Deformations

std::optional<Deformation> default_deformation(const ManifoldSpec& spec) {
    const int n = spec.n;
    switch (spec.chart_kind) {
    case ChartKind::ComplexPlane:
        return Deformation{"h (1 + 0.3 t / (1 + |z|^2))", [n](const Point& p) {
                               double s = 1.0;
                               for (int m = 0; m < 2 * n; ++m)
                                   s += p[m] * p[m];
                               return 0.3 / s;
                           }};
    case ChartKind::HopfShell:
        if (n < 2)
            break;
        return Deformation{"h (1 + t (0.3 cos(2 pi log2 |z|) + 0.2 Re(z1 conj z2) / |z|^2))",
                           [](const Point& p) {
                               const double r2 = p.squaredNorm();
                               const double re = p[0] * p[2] + p[1] * p[3];
                               return 0.3 * std::cos(kPi * std::log2(r2)) + 0.2 * re / r2;
                           }};
    case ChartKind::Torus:
        return Deformation{"h (1 + 0.2 t cos(2 pi x1))", [](const Point& p) { return 0.2 * std::cos(2.0 * kPi * p[0]); }};
    }
    return std::nullopt;
}

HermitianMetricField deformed_metric(const HermitianMetricField& metric, const Deformation& def, double t) {
    HermitianMetricField out = metric;
    out.h = [h = metric.h, phi = def.phi, t](const Point& p) { return CMat(h(p) * (1.0 + t * phi(p))); };
    return out;
}

std::vector<DeformationPoint> deformation_probe(const ManifoldSpec& spec, const Deformation& def,
                                                std::span<const double> ts, IndexFormula formula,
                                                const QuadratureConfig& cfg, const FDConfig& fd) {
    std::vector<DeformationPoint> out;
    for (double t : ts) {
        const HermitianMetricField m = t == 0.0 ? spec.metric : deformed_metric(spec.metric, def, t);
        DensityEvaluator eval(GeometryEngine(m, fd), spec.twist());
        auto results = integrate_index(eval, formula_bit(formula), spec.chart, cfg);
        out.push_back({t, results[static_cast<std::size_t>(formula)]});
    }
    return out;
}

} // namespace dolbeault
