#pragma once

#include <cmath>
#include <random>

#include "dolbeault/geometry.hpp"

namespace fixtures {

using namespace dolbeault;

inline HermitianMetricField flat(int n) {
    return {n, [n](const Point&) { return CMat(CMat::Identity(n, n)); }, ChartDomain::whole_space()};
}

/// Fubini-Study on the affine chart of CP^n:
/// h = [(1+|z|^2) delta - zbar_j z_k] / (1+|z|^2)^2.
inline CMat fubini_study(const Point& p, int n) {
    CVec z(n);
    for (int j = 0; j < n; ++j)
        z[j] = z_coord(p, j);
    const double s = 1.0 + z.squaredNorm();
    CMat h(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
            h(j, k) = ((j == k ? s : 0.0) - std::conj(z[j]) * z[k]) / (s * s);
    return h;
}

inline HermitianMetricField cpn(int n) {
    return {n, [n](const Point& p) { return fubini_study(p, n); }, ChartDomain::whole_space()};
}

inline HermitianMetricField hopf(int n) {
    return {n,
            [n](const Point& p) {
                return CMat(CMat::Identity(n, n) / p.squaredNorm());
            },
            ChartDomain::punctured(0.05)};
}

/// Periodic, non-Kaehler, non-SKT metric on the unit torus chart.
inline HermitianMetricField wobbly_torus() {
    return {2,
            [](const Point& p) {
                const double t = 2.0 * kPi;
                CMat h(2, 2);
                h(0, 0) = 2.0 + 0.3 * std::sin(t * p[0]) * std::cos(t * p[3]);
                h(1, 1) = 1.5 + 0.4 * std::cos(t * (p[1] + p[2]));
                h(0, 1) = 0.2 * cplx(std::cos(t * p[1]), std::sin(t * p[2]) + 0.5 * std::cos(t * p[3]));
                h(1, 0) = std::conj(h(0, 1));
                return h;
            },
            ChartDomain::whole_space()};
}

inline Point random_point(std::mt19937_64& rng, int dim, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Point p(dim);
    for (int m = 0; m < dim; ++m)
        p[m] = u(rng);
    return p;
}

/// Random point with lo < |p| < hi.
inline Point random_shell_point(std::mt19937_64& rng, int dim, double lo, double hi) {
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(lo, hi);
    Point p(dim);
    for (int m = 0; m < dim; ++m)
        p[m] = g(rng);
    return p * (u(rng) / p.norm());
}

/// Holomorphic/antiholomorphic basis 2-form dz_j ^ dzbar_k in real coordinates.
inline PolyForm dz_dzbar(int dim, int j, int k, cplx c = 1.0) {
    PolyForm f(dim);
    const int hj = 2 * j, ak = 2 * k + 1;
    f[(1u << hj) | (1u << ak)] = (hj < ak ? 1.0 : -1.0) * c;
    return to_real_basis(f);
}

} // namespace fixtures
