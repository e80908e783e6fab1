#include <doctest.h>

#include <algorithm>
#include <random>

#include "dolbeault/catalog.hpp"
#include "fixtures.hpp"

using namespace dolbeault;

namespace {

bool contains(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

std::string message_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

dsl::ExprPtr random_expr(std::mt19937_64& rng, int depth) {
    using K = dsl::Expr::Kind;
    std::uniform_int_distribution<int> pick(0, depth > 0 ? 9 : 3);
    switch (pick(rng)) {
    case 0: return dsl::make_number(std::uniform_real_distribution<double>(0.0, 5.0)(rng));
    case 1: return dsl::make_coord(static_cast<int>(rng() % 3));
    case 2: {
        auto e = std::make_shared<dsl::Expr>();
        e->kind = rng() % 2 ? K::Imag : K::Pi;
        return e;
    }
    case 3: return dsl::make_number(static_cast<double>(rng() % 7));
    case 4: return dsl::make_call(static_cast<dsl::Func>(rng() % 4), random_expr(rng, depth - 1));
    case 5: {
        auto e = std::make_shared<dsl::Expr>();
        e->kind = K::Neg;
        e->lhs = random_expr(rng, depth - 1);
        return e;
    }
    case 6: {
        auto e = std::make_shared<dsl::Expr>();
        e->kind = K::Pow;
        e->exponent = static_cast<int>(rng() % 7) - 3;
        e->lhs = random_expr(rng, depth - 1);
        return e;
    }
    default: {
        static constexpr K ops[] = {K::Add, K::Sub, K::Mul, K::Div};
        return dsl::make_binary(ops[rng() % 4], random_expr(rng, depth - 1), random_expr(rng, depth - 1));
    }
    }
}

constexpr const char* kCp1Text = R"(# Fubini-Study on CP^1
@name = cp1dsl
@chart = plane
h[1][1] = 1 / (1 + abs2(z1))^2
)";

} // namespace

TEST_CASE("builtin catalog") {
    const auto names = builtin_names();
    for (const char* n : {"cp1", "cp2", "torus2", "torus4", "hopf2", "hopf3"})
        CHECK(contains(names, n));

    const ManifoldSpec cp1 = builtin("cp1", {2});
    CHECK(cp1.n == 1);
    CHECK(cp1.expected_index == 3);
    CHECK(cp1.flags.kahler);
    CHECK(cp1.flags.skt);
    CHECK(builtin("cp2", {1}).expected_index == 3);
    CHECK(builtin("cp2", {2}).expected_index == 6);
    CHECK(builtin("torus2", {-4}).expected_index == -4);
    CHECK(builtin("torus4").expected_index == 0);

    const ManifoldSpec h2 = builtin("hopf2");
    CHECK_FALSE(h2.flags.kahler);
    CHECK(h2.flags.skt);
    CHECK(h2.flags.kahler_residual > 1e-3);
    CHECK(h2.flags.skt_residual < 1e-6);
    const ManifoldSpec h3 = builtin("hopf3");
    CHECK_FALSE(h3.flags.kahler);
    CHECK_FALSE(h3.flags.skt);
    CHECK(h3.expected_index == 0);

    const std::string unknown = message_of([] { builtin("k3"); });
    CHECK(unknown.find("k3") != std::string::npos);
    CHECK(unknown.find("hopf2") != std::string::npos);
    CHECK_THROWS_AS(builtin("hopf2", {1}), Error);
    CHECK_THROWS_AS(builtin("torus4", {1}), Error);
}

TEST_CASE("chart parameterizations") {
    std::mt19937_64 rng(3);
    for (ChartKind kind : {ChartKind::ComplexPlane, ChartKind::Torus, ChartKind::HopfShell}) {
        CHECK(chart_from_string(to_string(kind)) == kind);
        const ChartParam c = make_chart(kind, 2);
        CHECK(c.dim == 4);
        for (int i = 0; i < 5; ++i) {
            const Point u = fixtures::random_point(rng, 4, 0.05, 0.95);
            CHECK(c.volume_factor(u) > 0.0);
            if (kind == ChartKind::HopfShell) {
                const double r = c(u).norm();
                CHECK(r >= 1.0);
                CHECK(r < 2.0);
            }
        }
    }
    // the plane Jacobian agrees with differences of the map
    ChartParam plane = make_chart(ChartKind::ComplexPlane, 1);
    const Point u = Point::Constant(2, 0.37);
    const double exact = plane.volume_factor(u);
    plane.jacobian = nullptr;
    CHECK(plane.volume_factor(u) == doctest::Approx(exact).epsilon(1e-6));
    CHECK_THROWS_AS(chart_from_string("sphere"), Error);
}

TEST_CASE("DSL metric matches the builtin") {
    const ManifoldSpec from_text = manifold_from_dsl(kCp1Text);
    const ManifoldSpec cp1 = builtin("cp1");
    CHECK(from_text.name == "cp1dsl");
    CHECK(from_text.n == 1);
    std::mt19937_64 rng(5);
    for (int i = 0; i < 20; ++i) {
        const Point p = fixtures::random_point(rng, 2, -3.0, 3.0);
        CHECK((from_text.metric.h(p) - cp1.metric.h(p)).cwiseAbs().maxCoeff() < 1e-12);
    }
    CHECK(from_text.flags.kahler);

    const HermitianMetricField flat = parse_metric("h[1][1] = 1");
    CHECK(flat.n == 1);
    CHECK(flat.h(Point::Constant(2, 0.3))(0, 0) == cplx(1.0));

    const HermitianMetricField fs2 = parse_metric(R"(
h[1][1] = (1 + abs2(z2)) / (1 + abs2(z1) + abs2(z2))^2
h[2][2] = (1 + abs2(z1)) / (1 + abs2(z1) + abs2(z2))^2
h[1][2] = -conj(z1) * z2 / (1 + abs2(z1) + abs2(z2))^2
)");
    CHECK(fs2.n == 2);
    for (int i = 0; i < 10; ++i) {
        const Point p = fixtures::random_point(rng, 4, -2.0, 2.0);
        CHECK((fs2.h(p) - fixtures::fubini_study(p, 2)).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("DSL manifest and twists") {
    const ManifoldSpec t = manifold_from_dsl("@chart = torus\n@twist = 2\nh[1][1] = 1\n");
    CHECK(t.k == 2);
    CHECK(t.twist().active());
    CHECK(manifold_from_dsl("@chart = torus\n@twist = 2\nh[1][1] = 1\n", -1).k == -1);
    const ManifoldSpec h = manifold_from_dsl("@chart = hopf\n@expected_index = 0\nh[1][1] = 1/(abs2(z1)+abs2(z2))\n"
                                             "h[2][2] = 1/(abs2(z1)+abs2(z2))\n");
    CHECK(h.n == 2);
    CHECK(h.expected_index == 0);
    CHECK(h.flags.skt);
    CHECK_THROWS_AS(manifold_from_dsl("@chart = hopf\n@twist = 1\nh[1][1] = 1/abs2(z1)\n"), Error);
    CHECK_THROWS_AS(manifold_from_dsl("@colour = blue\nh[1][1] = 1\n"), dsl::SyntaxError);
    CHECK_THROWS_AS(manifold_from_dsl("@n = 2\nh[1][1] = 1\n"), Error);
}

TEST_CASE("DSL Hermiticity and positivity") {
    const std::string nonhermitian = message_of([] { parse_metric("h[1][2] = z1\n"); });
    CHECK(nonhermitian.find("Hermiticity") != std::string::npos);
    CHECK_THROWS_AS(parse_metric("h[1][2] = z1\n"), MetricError);

    const std::string mirror = message_of([] {
        parse_metric("h[1][1] = 2\nh[2][2] = 2\nh[1][2] = z1\nh[2][1] = z1\n");
    });
    CHECK(mirror.find("Hermiticity") != std::string::npos);
    CHECK(mirror.find("h[1][2]") != std::string::npos);

    CHECK_NOTHROW(parse_metric("h[1][1] = 2\nh[2][2] = 2\nh[1][2] = 0.5*z1/(1+abs2(z1))\n"
                               "h[2][1] = 0.5*conj(z1)/(1+abs2(z1))\n"));
    const std::string pd = message_of([] { parse_metric("h[1][1] = 1\nh[2][2] = 1\nh[1][2] = 2\n"); });
    CHECK(pd.find("positive") != std::string::npos);
    CHECK_THROWS_AS(parse_metric("h[1][1] = -1\n"), MetricError);
}

TEST_CASE("DSL syntax errors locate the problem") {
    SUBCASE("unclosed parenthesis") {
        try {
            parse_metric("h[1][1] = (1 + abs2(z1)\n");
            FAIL("expected a syntax error");
        } catch (const dsl::SyntaxError& e) {
            CHECK(e.line() == 1);
            CHECK(e.column() == 24);
            CHECK(contains(e.expected(), "')'"));
        }
    }
    SUBCASE("second line") {
        try {
            parse_metric("h[1][1] = 1\nh[2][2] = * z2\n");
            FAIL("expected a syntax error");
        } catch (const dsl::SyntaxError& e) {
            CHECK(e.line() == 2);
            CHECK(e.column() == 11);
            CHECK(contains(e.expected(), "number"));
            CHECK(std::string(e.what()).find("line 2, column 11") != std::string::npos);
        }
    }
    SUBCASE("unknown identifier") {
        try {
            parse_metric("h[1][1] = sin(z1)\n");
            FAIL("expected a syntax error");
        } catch (const dsl::SyntaxError& e) {
            CHECK(e.column() == 11);
            CHECK(std::string(e.what()).find("sin") != std::string::npos);
        }
    }
    CHECK_THROWS_AS(parse_metric("h[4][4] = 1\n"), dsl::SyntaxError);
    CHECK_THROWS_AS(parse_metric("h[1][1] = 1\nh[1][1] = 2\n"), dsl::SyntaxError);
    CHECK_THROWS_AS(parse_metric("h[1][1] = z1^1.5\n"), dsl::SyntaxError);
    CHECK_THROWS_AS(parse_metric("g[1][1] = 1\n"), dsl::SyntaxError);
    CHECK_THROWS_AS(parse_metric(""), Error);
}

TEST_CASE("DSL printing round-trips") {
    const char* corpus[] = {
        "1 / (1 + abs2(z1))^2",
        "-conj(z1) * z2 / (1 + abs2(z1) + abs2(z2))^2",
        "a",
        "2 - (3 - 4)",
        "2 / (3 * 4)",
        "(-z1)^2",
        "-z1^2",
        "exp(-pi * abs2(z3)) + i * ln(2)",
        "z1^-2 * 1.5e-3",
        "((z1))",
        "- - z2",
    };
    for (const char* text : corpus) {
        if (std::string(text) == "a") {
            CHECK_THROWS_AS(dsl::parse_expression(text), dsl::SyntaxError);
            continue;
        }
        const dsl::ExprPtr e = dsl::parse_expression(text);
        const std::string printed = dsl::print(*e);
        CHECK_MESSAGE(dsl::equal(*dsl::parse_expression(printed), *e), text << " -> " << printed);
        CHECK(dsl::print(*dsl::parse_expression(printed)) == printed);
    }

    std::mt19937_64 rng(21);
    for (int i = 0; i < 500; ++i) {
        const dsl::ExprPtr e = random_expr(rng, 4);
        const std::string printed = dsl::print(*e);
        const dsl::ExprPtr back = dsl::parse_expression(printed);
        CHECK_MESSAGE(dsl::equal(*back, *e), printed);
    }

    const dsl::MetricProgram prog = dsl::parse_program(kCp1Text);
    const dsl::MetricProgram again = dsl::parse_program(dsl::print(prog));
    CHECK(again.manifest.at("name").text == "cp1dsl");
    REQUIRE(again.entries.size() == 1);
    CHECK(dsl::equal(*again.entries.at({0, 0}), *prog.entries.at({0, 0})));
}

TEST_CASE("DSL evaluation") {
    Point p(4);
    p << 1.0, 2.0, -0.5, 0.25;
    const cplx z1(1.0, 2.0), z2(-0.5, 0.25);
    CHECK(std::abs(dsl::evaluate(*dsl::parse_expression("abs2(z1)"), p) - 5.0) < 1e-15);
    CHECK(std::abs(dsl::evaluate(*dsl::parse_expression("conj(z1) * z2"), p) - std::conj(z1) * z2) < 1e-15);
    CHECK(std::abs(dsl::evaluate(*dsl::parse_expression("z1^-2"), p) - 1.0 / (z1 * z1)) < 1e-15);
    CHECK(std::abs(dsl::evaluate(*dsl::parse_expression("exp(i*pi)"), p) + 1.0) < 1e-15);
    try {
        dsl::parse_expression("2^3^1");
        FAIL("exponents do not chain");
    } catch (const dsl::SyntaxError& e) {
        CHECK(e.column() == 4);
        CHECK(contains(e.expected(), "end of input"));
    }
}

TEST_CASE("Dolbeault Laplacian on the Hopf surface") {
    const HermitianMetricField h = hopf_metric(2);
    std::mt19937_64 rng(31);
    for (int i = 0; i < 10; ++i) {
        const Point p = fixtures::random_shell_point(rng, 4, 1.0, 2.0);
        const cplx z1(p[0], p[1]);
        const double rho = p.squaredNorm();
        CHECK(std::abs(dolbeault_laplacian0(h, [](const Point&) { return cplx(1.0); }, p)) < 1e-7);
        CHECK(std::abs(dolbeault_laplacian0(
                  h, [](const Point& q) { return cplx(std::log(q.squaredNorm())); }, p)) < 1e-7);
        CHECK(std::abs(dolbeault_laplacian0(h, [](const Point& q) { return cplx(q[0], -q[1]); }, p)) < 1e-7);
        const cplx got = dolbeault_laplacian0(h, [](const Point& q) { return cplx(q[0] * q[0] + q[1] * q[1]); }, p);
        CHECK(std::abs(got - (std::norm(z1) - rho)) < 1e-6);
    }
}

TEST_CASE("Hopf identities") {
    std::mt19937_64 rng(37);
    for (int n : {2, 3}) {
        const GeometryEngine engine(hopf_metric(n));
        for (int i = 0; i < 4; ++i) {
            const Point p = fixtures::random_shell_point(rng, 2 * n, 1.0, 2.0);
            const HopfIdentityReport r = hopf_identities(engine, p);
            CHECK(r.ff_scale > 1e-3);
            CHECK(r.rr_scale > 1e-3);
            CHECK(r.rr_relative() < 1e-8);
            // F0 is pulled back from CP^{n-1}, so F0^n = 0 but F0^2 != 0 once n > 2
            if (n == 2)
                CHECK(r.ff_relative() < 1e-8);
            else
                CHECK(r.ff_relative() > 1e-2);
        }
    }
    const GeometryEngine fs(fubini_study_metric(2));
    Point p(4);
    p << 0.3, 0.1, -0.4, 0.2;
    CHECK(hopf_identities(fs, p).ff_relative() > 1e-2);
}

TEST_CASE("form norm") {
    const int dim = 4;
    const CMat id = CMat::Identity(2, 2);
    CHECK(form_norm(PolyForm::basis(dim, {1}), id) == doctest::Approx(1.0));
    CHECK(form_norm(PolyForm::basis(dim, {1}, cplx(2.0, 0.0)), id) == doctest::Approx(4.0));
    CMat d = CMat::Zero(2, 2);
    d(0, 0) = 3.0;
    d(1, 1) = 5.0;
    CHECK(form_norm(PolyForm::basis(dim, {1, 3}), d) == doctest::Approx(1.0 / 15.0));
    CHECK(form_norm(PolyForm::basis(dim, {1}), d) == doctest::Approx(1.0 / 3.0));

    // P = z_j dz_j / |z|^2 on the Hopf surface
    std::mt19937_64 rng(41);
    const HermitianMetricField hm = hopf_metric(2);
    for (int i = 0; i < 10; ++i) {
        const Point p = fixtures::random_shell_point(rng, dim, 1.0, 2.0);
        const double r2 = p.squaredNorm();
        PolyForm pf(dim);
        pf[1u << 0] = cplx(p[0], p[1]) / r2;
        pf[1u << 2] = cplx(p[2], p[3]) / r2;
        CHECK(std::abs(form_norm(pf, hm.h(p)) - 1.0) < 1e-9);
    }

    CHECK_THROWS_AS(form_norm(PolyForm::basis(dim, {2}), id), PreconditionError);
    PolyForm mixed = PolyForm::basis(dim, {1}) + PolyForm::basis(dim, {1, 3});
    CHECK_THROWS_AS(form_norm(mixed, id), PreconditionError);
}

TEST_CASE("Hopf identification") {
    std::mt19937_64 rng(43);
    for (int n : {2, 3}) {
        const HermitianMetricField h = hopf_metric(n);
        for (int i = 0; i < 5; ++i) {
            const Point w = fixtures::random_shell_point(rng, 2 * n, 1.0, 2.0);
            CHECK(hopf_identification_residual(h, w) < 1e-15);
        }
    }
    CHECK(hopf_identification_residual(fubini_study_metric(1), Point::Constant(2, 0.7)) > 1e-2);
}

TEST_CASE("deformation probe") {
    const ManifoldSpec cp1 = builtin("cp1");
    const auto def = default_deformation(cp1);
    REQUIRE(def.has_value());
    QuadratureConfig cfg;
    cfg.budget = 32;
    const double ts[] = {0.0, 0.5, 1.0};
    const auto probe = deformation_probe(cp1, *def, ts, IndexFormula::ToddHRR, cfg);
    REQUIRE(probe.size() == 3);

    const DensityEvaluator eval(GeometryEngine(cp1.metric));
    const auto base = integrate_index(eval, formula_bit(IndexFormula::ToddHRR), cp1.chart, cfg);
    CHECK(probe[0].result.value == base[3].value);
    for (const auto& pt : probe)
        CHECK(std::abs(pt.result.value - probe[0].result.value) < 1e-3);

    // the deformed metric really differs
    const HermitianMetricField m = deformed_metric(cp1.metric, *def, 1.0);
    const Point p = Point::Constant(2, 0.4);
    CHECK(std::abs(m.h(p)(0, 0) - cp1.metric.h(p)(0, 0)) > 1e-3);

    CHECK(default_deformation(builtin("hopf2")).has_value());
}
