#pragma once

#include <array>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dolbeault/exterior.hpp"
#include "dolbeault/types.hpp"

namespace dolbeault {

/// Central finite-difference settings.
///
/// The effective step along a real coordinate of z_j is step * max(1, |z_j|),
/// so that stencils keep a fixed relative resolution in each complex
/// coordinate on charts reaching far from the origin.
struct FDConfig {
    double step = 1e-3;
    int order = 4; ///< 2 or 4
    bool richardson = false;

    void validate() const;
};

double effective_step(const FDConfig& cfg, const Point& p, int dir);

/// Offsets (in units of the effective step) and weights of a first-derivative
/// stencil: f'(p) ~ sum_i w_i f(p + o_i h e) / h.
struct StencilTaps {
    std::array<std::pair<double, double>, 8> taps{};
    int count = 0;

    const std::pair<double, double>* begin() const { return taps.data(); }
    const std::pair<double, double>* end() const { return taps.data() + count; }
};

StencilTaps stencil_taps(const FDConfig& cfg);

/// Open set on which fields may be evaluated.
struct ChartDomain {
    std::function<bool(const Point&)> contains;
    std::string description;

    static ChartDomain whole_space();
    /// R^2n minus the closed ball of the given radius around the origin.
    static ChartDomain punctured(double radius);
};

using ScalarField = std::function<cplx(const Point&)>;
using FormField = std::function<PolyForm(const Point&)>;

/// Partial derivative along real coordinate `dir` of any field whose values
/// form a vector space (T * double, T + T).
template <class F>
auto partial(F&& f, const Point& p, int dir, const FDConfig& cfg, const ChartDomain& domain)
    -> std::decay_t<decltype(f(p))> {
    using T = std::decay_t<decltype(f(p))>;
    const double h = effective_step(cfg, p, dir);
    const auto taps = stencil_taps(cfg);
    T acc{};
    bool first = true;
    Point q = p;
    for (const auto& [offset, weight] : taps) {
        q = p;
        q[dir] += offset * h;
        if (!domain.contains(q))
            throw DomainError("finite-difference stencil point " + format_point(q) +
                              " leaves the chart domain (" + domain.description + ")");
        T value = f(q);
        if (first) {
            acc = value * (weight / h);
            first = false;
        } else {
            acc = acc + value * (weight / h);
        }
    }
    return acc;
}

/// Exterior derivative: (d alpha) = sum_M dx^M ^ d_M alpha.
PolyForm d(const FormField& field, const Point& p, const FDConfig& cfg, const ChartDomain& domain);

/// dx^M ^ f for 0-based M.
PolyForm wedge_dx(int m, const PolyForm& f);

/// Holomorphic partials d_j = (d_x - i d_y) / 2 of the j-th complex pair.
CVec del_holo(const ScalarField& f, const Point& p, const FDConfig& cfg, const ChartDomain& domain);
/// Antiholomorphic partials d_jbar = (d_x + i d_y) / 2.
CVec del_anti(const ScalarField& f, const Point& p, const FDConfig& cfg, const ChartDomain& domain);

} // namespace dolbeault
