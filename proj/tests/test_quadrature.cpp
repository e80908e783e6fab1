#include <doctest.h>

#include <cmath>
#include <limits>

#include "dolbeault/catalog.hpp"
#include "dolbeault/quadrature.hpp"

using namespace dolbeault;

namespace {

ChartParam unit_cube(int dim) {
    return {dim, [](const Point& u) { return u; }, [](const Point&) { return 1.0; }, 1e-6, "cube"};
}

/// prod_m (1 + u_m^2 cos u_m), exact integral prod (1 + (2 cos 1 + sin 1 - 2 sin 1)) per factor.
double smooth_product(const Point& u) {
    double v = 1.0;
    for (Eigen::Index m = 0; m < u.size(); ++m)
        v *= 1.0 + u[m] * u[m] * std::cos(u[m]);
    return v;
}

double smooth_product_exact(int dim) {
    // int_0^1 u^2 cos u du = 2 cos 1 - sin 1
    return std::pow(1.0 + 2.0 * std::cos(1.0) - std::sin(1.0), dim);
}

} // namespace

TEST_CASE("Gauss-Legendre rule on [0,1]") {
    for (int n : {1, 2, 3, 5, 8, 17, 64}) {
        const GaussRule r = gauss_legendre(n);
        REQUIRE(r.nodes.size() == static_cast<std::size_t>(n));
        double wsum = 0.0;
        for (double w : r.weights)
            wsum += w;
        CHECK(wsum == doctest::Approx(1.0).epsilon(1e-14));
        // exact through degree 2n - 1
        for (int d = 0; d < 2 * n; ++d) {
            double s = 0.0;
            for (int i = 0; i < n; ++i)
                s += r.weights[static_cast<std::size_t>(i)] * std::pow(r.nodes[static_cast<std::size_t>(i)], d);
            CHECK(std::abs(s - 1.0 / (d + 1)) < 1e-13);
        }
    }
    const GaussRule two = gauss_legendre(2);
    const double off = 0.5 / std::sqrt(3.0);
    CHECK(std::abs(two.nodes[0] - (0.5 - off)) < 1e-15);
    CHECK(std::abs(two.nodes[1] - (0.5 + off)) < 1e-15);
    CHECK_THROWS_AS(gauss_legendre(0), Error);
}

TEST_CASE("method names") {
    CHECK(method_from_string("gauss") == QuadratureMethod::GaussTensor);
    CHECK(method_from_string("qmc") == QuadratureMethod::QmcSobol);
    CHECK(method_from_string("mc") == QuadratureMethod::MonteCarlo);
    CHECK_THROWS_AS(method_from_string("simpson"), Error);
}

TEST_CASE("Gauss tensor integration reports its error and trace") {
    QuadratureConfig cfg;
    cfg.budget = 12;
    const IntegralResult r = integrate(smooth_product, unit_cube(3), cfg);
    CHECK(std::abs(r.value - smooth_product_exact(3)) < 1e-13);
    CHECK(r.error < 1e-10);
    CHECK(r.evaluations == 6u * 6u * 6u + 12u * 12u * 12u);
    REQUIRE(r.trace.size() == 2);
    CHECK(r.trace.back().value == r.value);
    CHECK(r.tolerance_met);

    cfg.budget = 1;
    CHECK_THROWS_AS(integrate(smooth_product, unit_cube(2), cfg), IntegrationError);
}

TEST_CASE("constant 2-form on the torus cell integrates to its coefficient") {
    const ManifoldSpec t = builtin("torus2");
    QuadratureConfig cfg;
    cfg.budget = 4;
    for (double c : {1.0, -2.5, 7.0}) {
        PolyForm f(2);
        f[3] = c;
        const IntegralResult r = integrate([&](const Point&) { return oriented_top(f).real(); }, t.chart, cfg);
        CHECK(std::abs(r.value - kOrientationSign * c) < 1e-14);
    }
    const IntegralResult g = integrate([](const Point& p) { return oriented_top(torus_generator(p)).real(); },
                                       t.chart, cfg);
    CHECK(std::abs(g.value - 2.0 * kPi) < 1e-13);
}

TEST_CASE("Fubini-Study flux and first Chern number of CP^1") {
    const ManifoldSpec cp1 = builtin("cp1");
    QuadratureConfig cfg;
    cfg.budget = 64;
    const IntegralResult flux = integrate(
        [](const Point& p) { return oriented_top(fubini_study_generator(p, 1)).real() / (2.0 * kPi); }, cp1.chart,
        cfg);
    CHECK(std::abs(flux.value - 1.0) < 1e-7);

    const GeometryEngine engine(cp1.metric);
    const IntegralResult c1 = integrate(
        [&](const Point& p) {
            const CurvatureData cd = engine.curvature_data(p, connection_bit(ConnectionChoice::Chern));
            return oriented_top(trace(cd.holomorphic_block(ConnectionChoice::Chern)) * (kI / (2.0 * kPi)))
                .real();
        },
        cp1.chart, cfg);
    CHECK(std::abs(c1.value - 2.0) < 1e-5);
}

TEST_CASE("randomized rules are deterministic across thread counts") {
    for (QuadratureMethod m : {QuadratureMethod::QmcSobol, QuadratureMethod::MonteCarlo}) {
        QuadratureConfig cfg;
        cfg.method = m;
        cfg.budget = 4096;
        cfg.seed = 42;
        cfg.threads = 1;
        const IntegralResult a = integrate(smooth_product, unit_cube(4), cfg);
        cfg.threads = 3;
        const IntegralResult b = integrate(smooth_product, unit_cube(4), cfg);
        CHECK(a.value == b.value);
        CHECK(a.error == b.error);
        CHECK(a.evaluations == b.evaluations);
        cfg.seed = 43;
        const IntegralResult c = integrate(smooth_product, unit_cube(4), cfg);
        CHECK(a.value != c.value);
    }
}

TEST_CASE("randomized error bars cover the exact value") {
    const double exact = smooth_product_exact(4);
    for (QuadratureMethod m : {QuadratureMethod::QmcSobol, QuadratureMethod::MonteCarlo}) {
        int covered = 0;
        const int trials = 60;
        for (int s = 0; s < trials; ++s) {
            QuadratureConfig cfg;
            cfg.method = m;
            cfg.budget = 1024;
            cfg.seed = 1000 + static_cast<std::uint64_t>(s);
            cfg.threads = 1;
            const IntegralResult r = integrate(smooth_product, unit_cube(4), cfg);
            CHECK(r.error > 0.0);
            if (std::abs(r.value - exact) <= r.error)
                ++covered;
        }
        CHECK(covered >= static_cast<int>(0.95 * trials));
    }
}

TEST_CASE("QMC converges faster than MC") {
    const double exact = smooth_product_exact(4);
    QuadratureConfig cfg;
    cfg.budget = 1 << 14;
    cfg.seed = 5;
    cfg.method = QuadratureMethod::QmcSobol;
    const IntegralResult q = integrate(smooth_product, unit_cube(4), cfg);
    cfg.method = QuadratureMethod::MonteCarlo;
    const IntegralResult mc = integrate(smooth_product, unit_cube(4), cfg);
    CHECK(q.error < mc.error);
    CHECK(std::abs(q.value - exact) < 1e-4);
}

TEST_CASE("non-finite integrands are rejected") {
    QuadratureConfig cfg;
    cfg.budget = 8;
    const auto bad = [](const Point& u) { return u[0] > 0.5 ? std::numeric_limits<double>::quiet_NaN() : 1.0; };
    CHECK_THROWS_AS(integrate(bad, unit_cube(2), cfg), IntegrationError);
    cfg.method = QuadratureMethod::QmcSobol;
    cfg.budget = 256;
    CHECK_THROWS_AS(integrate(bad, unit_cube(2), cfg), IntegrationError);
}

TEST_CASE("tolerance flag") {
    QuadratureConfig cfg;
    cfg.budget = 4;
    cfg.tolerance = 1e-12;
    const IntegralResult coarse = integrate(smooth_product, unit_cube(2), cfg);
    CHECK_FALSE(coarse.tolerance_met);
    cfg.budget = 16;
    cfg.tolerance = 1e-8;
    CHECK(integrate(smooth_product, unit_cube(2), cfg).tolerance_met);
}

TEST_CASE("index integration on CP^1 and the torus") {
    SUBCASE("convergence study") {
        const ManifoldSpec cp1 = builtin("cp1");
        const DensityEvaluator eval(GeometryEngine(cp1.metric));
        const std::uint64_t levels[] = {16, 32, 64};
        QuadratureConfig cfg;
        std::vector<double> errs;
        for (std::uint64_t n : levels) {
            cfg.budget = n;
            const auto r = integrate_index(eval, formula_bit(IndexFormula::ToddHRR), cp1.chart, cfg);
            errs.push_back(std::abs(r[3].value - 1.0));
        }
        for (double e : errs)
            CHECK(e < 1e-5);
        // far-out nodes carry densities of order 1e-14 next to a unit scalar part
        CHECK(errs[2] < 1e-8);
    }
    SUBCASE("twisted torus") {
        for (int k : {0, 1, 3, -2}) {
            const ManifoldSpec t = builtin("torus2", {k});
            const DensityEvaluator eval(GeometryEngine(t.metric), t.twist());
            QuadratureConfig cfg;
            cfg.budget = 6;
            const auto r = integrate_index(eval, kAllFormulaBits, t.chart, cfg);
            for (const IntegralResult& x : r)
                CHECK(std::abs(x.value - k) < 1e-12);
        }
    }
    SUBCASE("multi-integrand study shares levels") {
        const std::uint64_t levels[] = {4, 8};
        QuadratureConfig cfg;
        const auto study = convergence_study(
            [](const Point& u, std::span<double> out) {
                out[0] = smooth_product(u);
                out[1] = 2.0;
            },
            2, unit_cube(2), cfg, levels);
        REQUIRE(study.size() == 2);
        CHECK(study[1][1].value == doctest::Approx(2.0).epsilon(1e-14));
        CHECK(std::abs(study[1][0].value - smooth_product_exact(2)) < std::abs(study[0][0].value - smooth_product_exact(2)));
    }
}
