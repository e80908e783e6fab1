#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dolbeault/exterior.hpp"
#include "dolbeault/geometry.hpp"

namespace dolbeault {

enum class IndexFormula {
    KahlerAS,      ///< e^{(F'+F0)/2pi} Ahat(R_LC); Kaehler metrics only
    BismutSKT,     ///< e^{(F'+F0)/2pi} Ahat(R_Bismut); SKT metrics only
    UnwoundSmilga, ///< e^{F'/2pi} exp{(1/16pi) I d d ln det g} Ahat(R_LC)
    ToddHRR,       ///< e^{F'/2pi} Td(R_hol)
};
inline constexpr int kNumFormulas = 4;
inline constexpr std::array<IndexFormula, kNumFormulas> kAllFormulas{
    IndexFormula::KahlerAS, IndexFormula::BismutSKT, IndexFormula::UnwoundSmilga, IndexFormula::ToddHRR};

const char* to_string(IndexFormula f);
/// Accepts the enum names (any case) and the short aliases kahler, bismut,
/// smilga, todd.
IndexFormula formula_from_string(const std::string& name);
inline constexpr unsigned formula_bit(IndexFormula f) { return 1u << static_cast<unsigned>(f); }
inline constexpr unsigned kAllFormulaBits = 0xFu;

/// Orientation convention. With the potential A0 = (i/4){-d, dbar} ln det h
/// every curvature 2-form comes out with the sign opposite to the usual Chern
/// form for dx ^ dy > 0: the raw CP^1 integral of F0/2pi is -1. Integrals of
/// top forms are therefore taken with orientation kOrientationSign^n times
/// dx1 ^ dy1 ^ ... ^ dxn ^ dyn, which makes the untwisted CP^1 index +1.
inline constexpr double kOrientationSign = -1.0;

/// Top coefficient with the calibrated orientation.
cplx oriented_top(const PolyForm& f);

/// Twisting gauge field F' = k * generator, where the generator is a closed
/// 2-form with unit charge under the calibrated orientation.
struct TwistSpec {
    int k = 0;
    std::function<PolyForm(const Point&)> generator;

    bool active() const { return k != 0 && static_cast<bool>(generator); }
    PolyForm field(const Point& p, int dim) const;
};

/// det^{-1/2}[sin(R/4pi) / (R/4pi)] for a real-frame curvature matrix.
PolyForm aroof_factor(const MatrixPolyForm& r);

/// Mixed-block magnitude above which the Todd class is refused.
inline constexpr double kToddMixedTolerance = 1e-4;

/// det f(M) with M = i R_hol / 2pi and f(x) = x / (1 - e^{-x}). Throws
/// PreconditionError when the connection's mixed curvature residual exceeds
/// kToddMixedTolerance.
PolyForm todd_class(const MatrixPolyForm& r_hol, double mixed_residual = 0.0);

struct DensityOptions {
    /// Connection whose holomorphic block feeds the Todd class.
    ConnectionChoice todd_connection = ConnectionChoice::Bismut;
    /// Extra exact 2-form added to F0 (gauge shift A0 -> A0 + B gives dB).
    std::function<PolyForm(const Point&)> f0_shift;
};

/// Pointwise index densities for one metric and twist.
class DensityEvaluator {
  public:
    DensityEvaluator(GeometryEngine engine, TwistSpec twist = {}, DensityOptions options = {});

    const GeometryEngine& engine() const { return engine_; }
    const TwistSpec& twist() const { return twist_; }

    /// Densities for every formula in `formulas`, sharing one curvature
    /// evaluation; other slots are left empty.
    std::array<PolyForm, kNumFormulas> densities(unsigned formulas, const Point& p) const;
    PolyForm density(IndexFormula f, const Point& p) const;

    unsigned connections_needed(unsigned formulas) const;

  private:
    GeometryEngine engine_;
    TwistSpec twist_;
    DensityOptions options_;
};

/// Residual that decides whether a formula applies to a metric: max |d omega|
/// for KahlerAS, the SKT residual for BismutSKT, 0 otherwise.
double formula_precondition_residual(IndexFormula f, const HermitianMetricField& metric,
                                     std::span<const Point> samples, const FDConfig& cfg);
inline constexpr double kPreconditionTolerance = 1e-6;
/// Throws PreconditionError quoting the measured residual.
void require_formula(IndexFormula f, const HermitianMetricField& metric, std::span<const Point> samples,
                     const FDConfig& cfg);

} // namespace dolbeault
