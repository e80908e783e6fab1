#include <doctest.h>

#include <array>
#include <random>
#include <vector>

#include "dolbeault/catalog.hpp"
#include "dolbeault/characteristic.hpp"
#include "fixtures.hpp"

using namespace dolbeault;

namespace {

/// Antisymmetric real-frame matrix with random 2-form entries.
MatrixPolyForm random_curvature(std::mt19937_64& rng, int dim, double scale) {
    std::normal_distribution<double> g(0.0, scale);
    MatrixPolyForm r(dim, dim);
    for (int a = 0; a < dim; ++a)
        for (int b = a + 1; b < dim; ++b) {
            PolyForm f = two_form(dim, [&](int, int) { return cplx(g(rng)); });
            r(a, b) = f;
            r(b, a) = -f;
        }
    return r;
}

PolyForm random_two_form(std::mt19937_64& rng, int dim, double scale) {
    std::normal_distribution<double> g(0.0, scale);
    return two_form(dim, [&](int, int) { return cplx(g(rng)); });
}

double form_diff(const PolyForm& a, const PolyForm& b) { return (a - b).max_abs(); }

/// Smooth pointwise unitary on C^2.
CMat wobbly_unitary(const Point& p) {
    const double th = 0.7 + 0.3 * std::sin(p[0]) * std::cos(p[3]);
    const double ph = 0.4 * p[1] - 0.2 * p[2];
    CMat u(2, 2);
    u(0, 0) = std::cos(th) * std::exp(kI * ph);
    u(0, 1) = -std::sin(th);
    u(1, 0) = std::sin(th);
    u(1, 1) = std::cos(th) * std::exp(-kI * ph);
    return u;
}

} // namespace

TEST_CASE("formula names round-trip") {
    for (IndexFormula f : kAllFormulas)
        CHECK(formula_from_string(to_string(f)) == f);
    CHECK(formula_from_string("todd") == IndexFormula::ToddHRR);
    CHECK(formula_from_string("Kahler") == IndexFormula::KahlerAS);
    CHECK_THROWS_AS(formula_from_string("dirac"), Error);
}

TEST_CASE("aroof of zero curvature is one") {
    for (int dim : {2, 4, 6}) {
        const PolyForm a = aroof_factor(MatrixPolyForm(dim, dim));
        CHECK(form_diff(a, PolyForm::scalar(dim, 1.0)) == 0.0);
    }
}

TEST_CASE("aroof degree-4 part is tr(G^2)/12") {
    // log(sin x / x) = -x^2/6 - ..., so Ahat = exp(tr G^2 / 12) through degree 4
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const MatrixPolyForm r = random_curvature(rng, 4, 2.0);
        MatrixPolyForm g = r;
        g *= 1.0 / (4.0 * kPi);
        const PolyForm expected = PolyForm::scalar(4, 1.0) + trace_of_product(g, g) * (1.0 / 12.0);
        CHECK(form_diff(aroof_factor(r), expected) < 1e-14);
    }
}

TEST_CASE("aroof of block-diagonal curvature is the product of x/sinh x") {
    // A 2x2 block [[0, a], [-a, 0]] has sin(B)/B = (sinh a / a) I.
    std::mt19937_64 rng(5);
    const int dim = 6;
    MatrixPolyForm r(dim, dim);
    PolyForm expected = PolyForm::scalar(dim, 1.0);
    for (int blk = 0; blk < 3; ++blk) {
        const PolyForm a = random_two_form(rng, dim, 3.0);
        r(2 * blk, 2 * blk + 1) = a;
        r(2 * blk + 1, 2 * blk) = -a;
        const PolyForm x = a * (1.0 / (4.0 * kPi));
        const PolyForm x2 = wedge(x, x);
        const PolyForm x4 = wedge(x2, x2);
        const PolyForm x6 = wedge(x4, x2);
        const PolyForm factor =
            PolyForm::scalar(dim, 1.0) - x2 * (1.0 / 6.0) + x4 * (7.0 / 360.0) - x6 * (31.0 / 15120.0);
        expected = wedge(expected, factor);
    }
    const PolyForm got = aroof_factor(r);
    CHECK(form_diff(got, expected) < 1e-12 * std::max(1.0, expected.max_abs()));
}

TEST_CASE("todd class low-degree terms") {
    std::mt19937_64 rng(9);
    SUBCASE("zero curvature") {
        CHECK(form_diff(todd_class(MatrixPolyForm(2, 4)), PolyForm::scalar(4, 1.0)) == 0.0);
    }
    SUBCASE("degree 2 and 4 against Chern-class polynomials") {
        std::normal_distribution<double> g;
        for (int trial = 0; trial < 5; ++trial) {
            const int n = 2, dim = 4;
            MatrixPolyForm rh(n, dim);
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b)
                    rh(a, b) = two_form(dim, [&](int, int) { return cplx(g(rng), g(rng)); });
            MatrixPolyForm m = rh;
            m *= kI / (2.0 * kPi);
            const PolyForm c1 = trace(m);
            const PolyForm c2 = (wedge(c1, c1) - trace_of_product(m, m)) * 0.5;
            // Td = 1 + c1/2 + (c1^2 + c2)/12
            const PolyForm expected =
                PolyForm::scalar(dim, 1.0) + c1 * 0.5 + (wedge(c1, c1) + c2) * (1.0 / 12.0);
            CHECK(form_diff(todd_class(rh), expected) < 1e-13);
        }
    }
    SUBCASE("refuses mixed curvature") {
        CHECK_THROWS_AS(todd_class(MatrixPolyForm(1, 2), 1e-3), PreconditionError);
        CHECK_NOTHROW(todd_class(MatrixPolyForm(1, 2), 1e-5));
    }
}

TEST_CASE("flat torus densities vanish") {
    std::mt19937_64 rng(11);
    for (int n : {1, 2}) {
        const DensityEvaluator eval(GeometryEngine(flat_metric(n)));
        for (int i = 0; i < 20; ++i) {
            const Point p = fixtures::random_point(rng, 2 * n, 0.0, 1.0);
            const auto d = eval.densities(kAllFormulaBits, p);
            for (const auto& f : d)
                CHECK(std::abs(top_component(f)) < 1e-10);
        }
    }
}

TEST_CASE("Kaehler densities coincide pointwise") {
    std::mt19937_64 rng(13);
    for (int n : {1, 2}) {
        const DensityEvaluator eval(GeometryEngine(fubini_study_metric(n)));
        for (int i = 0; i < 10; ++i) {
            const Point p = fixtures::random_point(rng, 2 * n, -1.5, 1.5);
            const auto d = eval.densities(kAllFormulaBits, p);
            const cplx todd = top_component(d[3]);
            const double scale = std::abs(todd);
            REQUIRE(scale > 1e-3);
            for (int f = 0; f < 3; ++f)
                CHECK(std::abs(top_component(d[static_cast<std::size_t>(f)]) - todd) < 1e-6 * scale);
        }
    }
}

TEST_CASE("CP^2 densities match the analytic Todd form far from the origin") {
    // one coordinate large, the other small, in both orders
    const std::vector<std::array<double, 4>> points{{23.5, -24.0, -0.0922, 0.0107},
                                                    {-1.72, -0.783, -38.5, 29.2},
                                                    {0.3, -0.2, 0.1, 0.4},
                                                    {60.0, 10.0, 2.0, -3.0}};
    const DensityEvaluator eval(GeometryEngine(fubini_study_metric(2)));
    for (const auto& c : points) {
        Point p(4);
        p << c[0], c[1], c[2], c[3];
        const PolyForm w = fubini_study_generator(p, 2) * (1.0 / (2.0 * kPi));
        const double exact = std::abs(top_component(wedge(w, w)));
        const auto d = eval.densities(kAllFormulaBits, p);
        for (const PolyForm& f : d)
            CHECK(std::abs(std::abs(top_component(f)) / exact - 1.0) < 1e-5);
    }
}

TEST_CASE("twisted density adds e^{F'/2pi}") {
    const ManifoldSpec s = builtin("cp1", {2});
    const DensityEvaluator plain(GeometryEngine(s.metric));
    const DensityEvaluator twisted(GeometryEngine(s.metric), s.twist());
    Point p(2);
    p << 0.3, -0.8;
    const PolyForm g = fubini_study_generator(p, 1) * (2.0 / (2.0 * kPi));
    const PolyForm expected = wedge(exp_even(g), plain.density(IndexFormula::ToddHRR, p));
    CHECK(form_diff(twisted.density(IndexFormula::ToddHRR, p), expected) < 1e-14);
}

TEST_CASE("densities are frame invariant") {
    std::mt19937_64 rng(17);
    for (const char* name : {"cp2", "hopf2"}) {
        const ManifoldSpec s = builtin(name);
        GeometryEngine rotated(s.metric);
        rotated.set_frame_rotation(wobbly_unitary);
        const DensityEvaluator a(GeometryEngine(s.metric)), b(rotated);
        const unsigned mask = s.flags.kahler ? kAllFormulaBits : kAllFormulaBits & ~formula_bit(IndexFormula::KahlerAS);
        for (const Point& p : sample_chart_points(s.chart, 5, rng())) {
            const auto da = a.densities(mask, p), db = b.densities(mask, p);
            for (int f = 0; f < kNumFormulas; ++f)
                if (mask & (1u << f)) {
                    const auto i = static_cast<std::size_t>(f);
                    CHECK(std::abs(top_component(da[i]) - top_component(db[i])) < 1e-8);
                }
        }
    }
}

TEST_CASE("formula preconditions quote the residual") {
    const ManifoldSpec hopf3 = builtin("hopf3");
    const auto pts = sample_chart_points(hopf3.chart, 4, 1);
    CHECK(formula_precondition_residual(IndexFormula::ToddHRR, hopf3.metric, pts, {}) == 0.0);
    CHECK_THROWS_AS(require_formula(IndexFormula::KahlerAS, hopf3.metric, pts, {}), PreconditionError);
    try {
        require_formula(IndexFormula::BismutSKT, hopf3.metric, pts, {});
        FAIL("expected a precondition error");
    } catch (const PreconditionError& e) {
        CHECK(std::string(e.what()).find("BismutSKT") != std::string::npos);
        CHECK(std::string(e.what()).find("> 1e-06") != std::string::npos);
    }
    const ManifoldSpec hopf2 = builtin("hopf2");
    CHECK_NOTHROW(require_formula(IndexFormula::BismutSKT, hopf2.metric, sample_chart_points(hopf2.chart, 4, 1), {}));
}

TEST_CASE("Todd density refuses Levi-Civita") {
    CHECK_THROWS_AS(DensityEvaluator(GeometryEngine(hopf_metric(2)), {}, {ConnectionChoice::LeviCivita, {}}),
                    PreconditionError);
}

TEST_CASE("oriented top calibration") {
    PolyForm f(2);
    f[3] = 2.0;
    CHECK(oriented_top(f) == cplx(-2.0));
    PolyForm g(4);
    g[15] = 2.0;
    CHECK(oriented_top(g) == cplx(2.0));
}
