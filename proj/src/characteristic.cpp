#include "dolbeault/characteristic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace dolbeault {

const char* to_string(IndexFormula f) {
    switch (f) {
    case IndexFormula::KahlerAS:
        return "KahlerAS";
    case IndexFormula::BismutSKT:
        return "BismutSKT";
    case IndexFormula::UnwoundSmilga:
        return "UnwoundSmilga";
    case IndexFormula::ToddHRR:
        return "ToddHRR";
    }
    return "?";
}

IndexFormula formula_from_string(const std::string& name) {
    std::string s = name;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "kahleras" || s == "kahler" || s == "as")
        return IndexFormula::KahlerAS;
    if (s == "bismutskt" || s == "bismut" || s == "skt")
        return IndexFormula::BismutSKT;
    if (s == "unwoundsmilga" || s == "smilga" || s == "unwound")
        return IndexFormula::UnwoundSmilga;
    if (s == "toddhrr" || s == "todd" || s == "hrr")
        return IndexFormula::ToddHRR;
    throw Error("unknown index formula '" + name + "' (expected kahler, bismut, smilga or todd)");
}

cplx oriented_top(const PolyForm& f) {
    const int n = f.dim() / 2;
    return std::pow(kOrientationSign, n) * top_component(f);
}

PolyForm TwistSpec::field(const Point& p, int dim) const {
    if (!active())
        return PolyForm(dim);
    PolyForm g = generator(p);
    if (g.dim() != dim)
        throw DimensionError("twist generator returned a form on R^" + std::to_string(g.dim()));
    return g * static_cast<double>(k);
}

PolyForm aroof_factor(const MatrixPolyForm& r) {
    MatrixPolyForm g = r;
    g *= 1.0 / (4.0 * kPi);
    const int order = r.dim() / 2 + 1;
    return exp_even(trace_log(g, ScalarSeries::sinc(order)) * -0.5);
}

PolyForm todd_class(const MatrixPolyForm& r_hol, double mixed_residual) {
    if (mixed_residual > kToddMixedTolerance) {
        std::ostringstream msg;
        msg << "Todd class needs a connection without mixed curvature components; measured "
            << mixed_residual << " > " << kToddMixedTolerance;
        throw PreconditionError(msg.str());
    }
    MatrixPolyForm m = r_hol;
    m *= kI / (2.0 * kPi);
    return trlog_apply(m, ScalarSeries::todd(r_hol.dim() / 2 + 1));
}

DensityEvaluator::DensityEvaluator(GeometryEngine engine, TwistSpec twist, DensityOptions options)
    : engine_(std::move(engine)), twist_(std::move(twist)), options_(std::move(options)) {
    if (options_.todd_connection == ConnectionChoice::LeviCivita)
        throw PreconditionError("Todd class needs a connection preserving the complex structure");
}

unsigned DensityEvaluator::connections_needed(unsigned formulas) const {
    unsigned bits = 0;
    if (formulas & (formula_bit(IndexFormula::KahlerAS) | formula_bit(IndexFormula::UnwoundSmilga)))
        bits |= connection_bit(ConnectionChoice::LeviCivita);
    if (formulas & formula_bit(IndexFormula::BismutSKT))
        bits |= connection_bit(ConnectionChoice::Bismut);
    if (formulas & formula_bit(IndexFormula::ToddHRR))
        bits |= connection_bit(options_.todd_connection);
    return bits;
}

std::array<PolyForm, kNumFormulas> DensityEvaluator::densities(unsigned formulas, const Point& p) const {
    const int dim = engine_.dim();
    const CurvatureData cv = engine_.curvature_data(p, connections_needed(formulas));

    const PolyForm twist = twist_.field(p, dim) * (1.0 / (2.0 * kPi));
    PolyForm f0 = cv.f0;
    if (options_.f0_shift)
        f0 += options_.f0_shift(p);
    const PolyForm f0_over_2pi = f0 * (1.0 / (2.0 * kPi));

    std::array<PolyForm, kNumFormulas> out;
    PolyForm aroof_lc;
    if (formulas & (formula_bit(IndexFormula::KahlerAS) | formula_bit(IndexFormula::UnwoundSmilga)))
        aroof_lc = aroof_factor(cv.real_matrix(ConnectionChoice::LeviCivita));

    if (formulas & formula_bit(IndexFormula::KahlerAS))
        out[0] = wedge(exp_even(twist + f0_over_2pi), aroof_lc);
    if (formulas & formula_bit(IndexFormula::BismutSKT))
        out[1] = wedge(exp_even(twist + f0_over_2pi), aroof_factor(cv.real_matrix(ConnectionChoice::Bismut)));
    if (formulas & formula_bit(IndexFormula::UnwoundSmilga))
        out[2] = wedge(exp_even(twist + cv.f0_over_2pi_real), aroof_lc);
    if (formulas & formula_bit(IndexFormula::ToddHRR)) {
        const auto c = options_.todd_connection;
        out[3] = wedge(exp_even(twist), todd_class(cv.holomorphic_block(c), cv.mixed_block_residual(c)));
    }
    return out;
}

PolyForm DensityEvaluator::density(IndexFormula f, const Point& p) const {
    return densities(formula_bit(f), p)[static_cast<std::size_t>(f)];
}

double formula_precondition_residual(IndexFormula f, const HermitianMetricField& metric,
                                     std::span<const Point> samples, const FDConfig& cfg) {
    double worst = 0.0;
    for (const Point& p : samples) {
        if (f == IndexFormula::KahlerAS)
            worst = std::max(worst, kahler_defect(metric, p, cfg));
        else if (f == IndexFormula::BismutSKT)
            worst = std::max(worst, skt_residual(metric, p, cfg));
    }
    return worst;
}

void require_formula(IndexFormula f, const HermitianMetricField& metric, std::span<const Point> samples,
                     const FDConfig& cfg) {
    const double r = formula_precondition_residual(f, metric, samples, cfg);
    if (r > kPreconditionTolerance) {
        std::ostringstream msg;
        msg << to_string(f) << " does not apply to this metric: "
            << (f == IndexFormula::KahlerAS ? "max |d omega| = " : "max |d dbar-part(d omega)| = ") << r
            << " > " << kPreconditionTolerance;
        throw PreconditionError(msg.str());
    }
}

} // namespace dolbeault
