#include "dolbeault/calculus.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace dolbeault {

void FDConfig::validate() const {
    if (!(step > 0.0) || !std::isfinite(step))
        throw Error("finite-difference step must be positive, got " + std::to_string(step));
    if (order != 2 && order != 4)
        throw Error("finite-difference order must be 2 or 4, got " + std::to_string(order));
}

double effective_step(const FDConfig& cfg, const Point& p, int dir) {
    const Eigen::Index re = dir - dir % 2;
    double r2 = p[re] * p[re];
    if (re + 1 < p.size())
        r2 += p[re + 1] * p[re + 1];
    return cfg.step * std::max(1.0, std::sqrt(r2));
}

StencilTaps stencil_taps(const FDConfig& cfg) {
    cfg.validate();
    StencilTaps base;
    if (cfg.order == 2) {
        base.taps[0] = {1.0, 0.5};
        base.taps[1] = {-1.0, -0.5};
        base.count = 2;
    } else {
        // mirrored taps stay adjacent so that constants cancel exactly
        base.taps[0] = {1.0, 8.0 / 12.0};
        base.taps[1] = {-1.0, -8.0 / 12.0};
        base.taps[2] = {2.0, -1.0 / 12.0};
        base.taps[3] = {-2.0, 1.0 / 12.0};
        base.count = 4;
    }
    if (!cfg.richardson)
        return base;

    // (2^p D_{h/2} - D_h) / (2^p - 1); a tap at offset o/2 with step h/2
    // contributes weight 2w per unit h.
    const double gain = std::pow(2.0, cfg.order);
    StencilTaps out;
    for (const auto& [o, w] : base)
        out.taps[out.count++] = {0.5 * o, gain * 2.0 * w / (gain - 1.0)};
    for (const auto& [o, w] : base)
        out.taps[out.count++] = {o, -w / (gain - 1.0)};
    return out;
}

ChartDomain ChartDomain::whole_space() {
    return {[](const Point& p) { return p.allFinite(); }, "whole chart R^2n"};
}

ChartDomain ChartDomain::punctured(double radius) {
    return {[radius](const Point& p) { return p.allFinite() && p.norm() > radius; },
            "|z| > " + std::to_string(radius)};
}

PolyForm wedge_dx(int m, const PolyForm& f) {
    PolyForm out(f.dim());
    const std::uint32_t bit = 1u << m;
    for (std::uint32_t mask = 0; mask < f.size(); ++mask) {
        if ((mask & bit) || f[mask] == cplx{})
            continue;
        const int below = std::popcount(mask & (bit - 1));
        out[mask | bit] += (below % 2 ? -1.0 : 1.0) * f[mask];
    }
    return out;
}

PolyForm d(const FormField& field, const Point& p, const FDConfig& cfg, const ChartDomain& domain) {
    const int dim = static_cast<int>(p.size());
    PolyForm out(dim);
    for (int m = 0; m < dim; ++m)
        out += wedge_dx(m, partial(field, p, m, cfg, domain));
    out.prune();
    return out;
}

namespace {

CVec complex_partials(const ScalarField& f, const Point& p, const FDConfig& cfg,
                      const ChartDomain& domain, double sign) {
    const int n = static_cast<int>(p.size()) / 2;
    CVec out(n);
    for (int j = 0; j < n; ++j) {
        const cplx dx = partial(f, p, 2 * j, cfg, domain);
        const cplx dy = partial(f, p, 2 * j + 1, cfg, domain);
        out[j] = 0.5 * (dx + sign * kI * dy);
    }
    return out;
}

} // namespace

CVec del_holo(const ScalarField& f, const Point& p, const FDConfig& cfg, const ChartDomain& domain) {
    return complex_partials(f, p, cfg, domain, -1.0);
}

CVec del_anti(const ScalarField& f, const Point& p, const FDConfig& cfg, const ChartDomain& domain) {
    return complex_partials(f, p, cfg, domain, 1.0);
}

} // namespace dolbeault
