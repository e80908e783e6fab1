#include <doctest.h>

#include <random>
#include <vector>

#include "dolbeault/exterior.hpp"

using namespace dolbeault;

namespace {

PolyForm random_form(std::mt19937_64& rng, int dim, int degree) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    PolyForm f(dim);
    for (std::uint32_t m = 0; m < f.size(); ++m)
        if (std::popcount(m) == degree)
            f[m] = cplx(u(rng), u(rng));
    return f;
}

PolyForm random_even(std::mt19937_64& rng, int dim) {
    PolyForm f(dim);
    for (int k = 2; k <= dim; k += 2)
        f += random_form(rng, dim, k);
    return f;
}

double diff(const PolyForm& a, const PolyForm& b) { return (a - b).max_abs(); }

// Leibniz expansion of det over wedge products; entries are even, so they commute.
PolyForm leibniz_det(const MatrixPolyForm& m) {
    const int k = m.size();
    std::vector<int> perm(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i)
        perm[static_cast<std::size_t>(i)] = i;
    PolyForm total(m.dim());
    do {
        int inversions = 0;
        for (int i = 0; i < k; ++i)
            for (int j = i + 1; j < k; ++j)
                if (perm[static_cast<std::size_t>(i)] > perm[static_cast<std::size_t>(j)])
                    ++inversions;
        PolyForm term = PolyForm::scalar(m.dim(), inversions % 2 ? -1.0 : 1.0);
        for (int i = 0; i < k; ++i)
            term = wedge(term, m(i, perm[static_cast<std::size_t>(i)]));
        total += term;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return total;
}

// s(M) = sum_k s_k M^k by repeated matrix products.
MatrixPolyForm apply_series(const MatrixPolyForm& m, const std::vector<double>& s) {
    const int k = m.size();
    MatrixPolyForm power(k, m.dim());
    for (int i = 0; i < k; ++i)
        power(i, i) = PolyForm::scalar(m.dim(), 1.0);
    MatrixPolyForm out(k, m.dim());
    for (double c : s) {
        MatrixPolyForm term = power;
        term *= c;
        out = out + term;
        power = power * m;
    }
    return out;
}

} // namespace

TEST_CASE("wedge basics") {
    const auto a = PolyForm::basis(2, {1});
    const auto b = PolyForm::basis(2, {2});
    CHECK(wedge(a, b).coeff({1, 2}) == cplx(1.0));
    CHECK(wedge(b, a).coeff({1, 2}) == cplx(-1.0));
    const auto c = wedge(PolyForm::basis(3, {1, 2}), PolyForm::basis(3, {1, 3}));
    CHECK(c.is_zero());
    CHECK(PolyForm::basis(2, {2, 1}).coeff({1, 2}) == cplx(-1.0));
}

TEST_CASE("wedge keeps degrees homogeneous") {
    std::mt19937_64 rng(1);
    for (int p = 0; p <= 3; ++p)
        for (int q = 0; q + p <= 6; ++q) {
            const auto w = wedge(random_form(rng, 6, p), random_form(rng, 6, q));
            CHECK(diff(w, w.degree_part(p + q)) == 0.0);
        }
}

TEST_CASE("graded commutativity is exact") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const int p = trial % 4, q = (trial / 4) % 3;
        const auto a = random_form(rng, 6, p);
        const auto b = random_form(rng, 6, q);
        const double sign = (p * q) % 2 ? -1.0 : 1.0;
        CHECK(diff(wedge(a, b), sign * wedge(b, a)) == 0.0);
    }
}

TEST_CASE("wedge is associative") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        PolyForm a(6), b(6), c(6);
        for (int k = 0; k <= 3; ++k) {
            a += random_form(rng, 6, k);
            b += random_form(rng, 6, k);
            c += random_form(rng, 6, k);
        }
        const auto lhs = wedge(wedge(a, b), c);
        const auto rhs = wedge(a, wedge(b, c));
        CHECK(diff(lhs, rhs) < 1e-12 * std::max(1.0, lhs.max_abs()));
    }
}

TEST_CASE("exp_even") {
    CHECK(diff(exp_even(PolyForm(2)), PolyForm::scalar(2, 1.0)) == 0.0);

    const cplx c(0.7, -0.2);
    const auto f1 = PolyForm::basis(2, {1, 2}, c);
    CHECK(diff(exp_even(f1), PolyForm::scalar(2, 1.0) + f1) < 1e-15);

    const auto f = PolyForm::basis(4, {1, 2}) + PolyForm::basis(4, {3, 4});
    const auto expected = PolyForm::scalar(4, 1.0) + f + PolyForm::basis(4, {1, 2, 3, 4});
    CHECK(diff(exp_even(f), expected) < 1e-15);

    CHECK_THROWS_AS(exp_even(PolyForm::basis(2, {1})), Error);

    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const auto g = random_even(rng, 6);
        CHECK(diff(wedge(exp_even(g), exp_even(-g)), PolyForm::scalar(6, 1.0)) < 1e-12);
    }
}

TEST_CASE("top_component") {
    CHECK(top_component(PolyForm::scalar(2, 1.0)) == cplx(0.0));
    CHECK(top_component(PolyForm::basis(2, {1, 2}, 5.0)) == cplx(5.0));
    CHECK(top_component(PolyForm::basis(2, {2, 1})) == cplx(-1.0));
}

TEST_CASE("series arithmetic matches tabulated coefficients") {
    // x/(1-e^-x) = 1 + x/2 + x^2/12 - x^4/720 + x^6/30240
    const double todd[] = {1.0, 0.5, 1.0 / 12.0, 0.0, -1.0 / 720.0, 0.0, 1.0 / 30240.0};
    const auto t = ScalarSeries::todd(6);
    for (int k = 0; k <= 6; ++k)
        CHECK(std::abs(t[k] - todd[k]) < 1e-15);

    // log(sin x / x) = -x^2/6 - x^4/180 - x^6/2835
    const auto l = series_log(ScalarSeries::sinc(6));
    CHECK(std::abs(l[2] + 1.0 / 6.0) < 1e-15);
    CHECK(std::abs(l[4] + 1.0 / 180.0) < 1e-15);
    CHECK(std::abs(l[6] + 1.0 / 2835.0) < 1e-15);
    CHECK(std::abs(l[1]) + std::abs(l[3]) + std::abs(l[5]) < 1e-15);

    const auto e = series_exp(l);
    const auto s = ScalarSeries::sinc(6);
    for (int k = 0; k <= 6; ++k)
        CHECK(std::abs(e[k] - s[k]) < 1e-15);
}

TEST_CASE("trlog_apply trivial cases") {
    MatrixPolyForm zero(2, 4);
    CHECK(diff(trlog_apply(zero, ScalarSeries::todd(4)), PolyForm::scalar(4, 1.0)) < 1e-15);

    MatrixPolyForm one(1, 2);
    one(0, 0) = PolyForm::basis(2, {1, 2}, 0.3);
    const auto r = trlog_apply(one, ScalarSeries({1.0, 1.0}));
    CHECK(diff(r, PolyForm::scalar(2, 1.0) + one(0, 0)) < 1e-15);
}

TEST_CASE("trlog_apply on diagonal matrices equals per-eigenvalue product") {
    const double todd[] = {1.0, 0.5, 1.0 / 12.0, 0.0, -1.0 / 720.0};
    std::mt19937_64 rng(5);
    const int dim = 4;
    MatrixPolyForm m(2, dim);
    m(0, 0) = random_form(rng, dim, 2);
    m(1, 1) = random_form(rng, dim, 2);
    PolyForm expected = PolyForm::scalar(dim, 1.0);
    for (int a = 0; a < 2; ++a) {
        PolyForm factor(dim), power = PolyForm::scalar(dim, 1.0);
        for (double c : todd) {
            factor += c * power;
            power = wedge(power, m(a, a));
        }
        expected = wedge(expected, factor);
    }
    CHECK(diff(trlog_apply(m, ScalarSeries::todd(4)), expected) < 1e-12);
}

TEST_CASE("trlog_apply equals the Leibniz determinant of s(M)") {
    std::mt19937_64 rng(6);
    for (int k = 1; k <= 3; ++k)
        for (int n = 1; n <= 3; ++n) {
            const int dim = 2 * n;
            MatrixPolyForm m(k, dim);
            for (int a = 0; a < k; ++a)
                for (int b = 0; b < k; ++b)
                    m(a, b) = random_form(rng, dim, 2);
            const auto todd = ScalarSeries::todd(n + 2);
            std::vector<double> coeffs;
            for (int i = 0; i <= n + 2; ++i)
                coeffs.push_back(todd[i].real());
            const auto expected = leibniz_det(apply_series(m, coeffs));
            const auto got = trlog_apply(m, todd);
            CHECK(diff(got, expected) < 1e-10 * std::max(1.0, expected.max_abs()));
        }
}

TEST_CASE("trlog_apply rejects bad input") {
    MatrixPolyForm m(1, 2);
    m(0, 0) = PolyForm::scalar(2, 0.5);
    CHECK_THROWS_AS(trlog_apply(m, ScalarSeries::todd(3)), Error);
    MatrixPolyForm ok(1, 6);
    ok(0, 0) = PolyForm::basis(6, {1, 2});
    CHECK_THROWS_AS(trlog_apply(ok, ScalarSeries::todd(1)), Error);
}

TEST_CASE("pruning is relative within each degree") {
    PolyForm a = PolyForm::scalar(2, 1.0) + PolyForm::basis(2, {1, 2}, 1e-15);
    const PolyForm w = wedge(a, PolyForm::scalar(2, 1.0));
    CHECK(w.coeff({1, 2}) == cplx(1e-15));
    PolyForm b = PolyForm::basis(4, {1, 2}, 1.0) + PolyForm::basis(4, {3, 4}, 1e-17);
    b.prune();
    CHECK(b.coeff({3, 4}) == cplx(0.0));
    CHECK(b.coeff({1, 2}) == cplx(1.0));
}
