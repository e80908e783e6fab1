#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dolbeault/characteristic.hpp"
#include "dolbeault/dsl.hpp"
#include "dolbeault/geometry.hpp"
#include "dolbeault/quadrature.hpp"

namespace dolbeault {

enum class ChartKind {
    /// Per-coordinate polar chart of C^n: r = t/(1-t), theta = 2 pi u.
    ComplexPlane,
    /// Unit cube [0,1]^2n with periodic metric.
    Torus,
    /// Shell 1 <= |z| < 2: z = 2^rho sigma(angles).
    HopfShell,
};

const char* to_string(ChartKind c);
ChartKind chart_from_string(const std::string& name);

ChartParam make_chart(ChartKind kind, int n);
/// Chart domain on which the metric of a manifold with this chart is evaluated.
ChartDomain chart_domain(ChartKind kind);

struct ManifoldFlags {
    bool kahler = false;
    bool skt = false;
    double kahler_residual = 0.0; ///< max |d omega| over the sample points
    double skt_residual = 0.0;
    int samples = 0;
};

/// Flag residuals measured at `samples` chart points drawn from a fixed seed.
ManifoldFlags measure_flags(const HermitianMetricField& metric, const ChartParam& chart, int samples = 8,
                            std::uint64_t seed = 7, const FDConfig& cfg = {});

/// Deterministic pseudo-random chart points, avoiding the outer 2% of the cube.
std::vector<Point> sample_chart_points(const ChartParam& chart, int count, std::uint64_t seed);

struct ManifoldSpec {
    std::string name;
    int n = 1;
    ChartKind chart_kind = ChartKind::ComplexPlane;
    HermitianMetricField metric;
    ChartParam chart;
    /// Unit-charge generator of the twisting field; empty when unsupported.
    std::function<PolyForm(const Point&)> twist_generator;
    int k = 0;
    std::optional<int> expected_index;
    ManifoldFlags flags;
    std::string description;

    TwistSpec twist() const { return {k, twist_generator}; }
};

struct BuiltinParams {
    int k = 0;
};

std::vector<std::string> builtin_names();
/// cp1, cp2, torus2, torus4, hopf2, hopf3. Twists are accepted on cp1, cp2
/// and torus2.
ManifoldSpec builtin(const std::string& name, const BuiltinParams& params = {});

/// Fubini-Study metric on the affine chart of CP^n.
HermitianMetricField fubini_study_metric(int n);
/// h = delta / (zbar z) on C^n minus the origin.
HermitianMetricField hopf_metric(int n);
HermitianMetricField flat_metric(int n);

/// -i d dbar ln(1 + |z|^2): unit-charge generator on CP^n.
PolyForm fubini_study_generator(const Point& p, int n);
/// kOrientationSign * 2 pi dx ^ dy on the unit torus cell of T^2.
PolyForm torus_generator(const Point& p);

// ---------------------------------------------------------------------------
// Metric DSL

/// Metric field from DSL text. Missing off-diagonal entries mirror the
/// conjugate of their partner; Hermiticity of explicit pairs and
/// positive-definiteness are sampled at 100 chart points.
HermitianMetricField parse_metric(std::string_view text);
/// Full manifold from DSL text with its `@` manifest:
/// @name, @n, @chart (plane | torus | hopf), @twist, @expected_index.
ManifoldSpec manifold_from_dsl(std::string_view text, std::optional<int> k_override = std::nullopt);

inline constexpr int kDslSamplePoints = 100;

// ---------------------------------------------------------------------------
// Hopf checks

/// -(1/2) Delta_Dol f = -(det h)^{-1} dbar_k (det h h^{kbar j} d_j f) on
/// functions; second derivatives by nested differences.
cplx dolbeault_laplacian0(const HermitianMetricField& metric, const ScalarField& f, const Point& p,
                          const FDConfig& cfg = {});

struct HopfIdentityReport {
    double ff = 0.0;        ///< max |F ^ F| component
    double rr = 0.0;        ///< max |(R ^ R)_A^B| component, Levi-Civita
    double ff_scale = 0.0;  ///< max |F|^2
    double rr_scale = 0.0;  ///< max |R|^2
    double ff_relative() const { return ff_scale > 0.0 ? ff / ff_scale : ff; }
    double rr_relative() const { return rr_scale > 0.0 ? rr / rr_scale : rr; }
};

HopfIdentityReport hopf_identities(const GeometryEngine& engine, const Point& p);

/// A_{j...} conj(A_{k...}) h^{kbar j}... for a (p,0)-form written in the
/// complex coframe. Throws PreconditionError on other components.
double form_norm(const PolyForm& a_complex, const CMat& h);

/// max |4 h(2w) - h(w)|: the line element at w and 2w agree.
double hopf_identification_residual(const HermitianMetricField& metric, const Point& w);

// ---------------------------------------------------------------------------
// Deformations

/// h_t = h (1 + t phi) for a positive regular function phi on the manifold.
struct Deformation {
    std::string description;
    std::function<double(const Point&)> phi;
};

/// Regular conformal deformation used by the check suite; empty for the torus.
std::optional<Deformation> default_deformation(const ManifoldSpec& spec);

HermitianMetricField deformed_metric(const HermitianMetricField& metric, const Deformation& def, double t);

struct DeformationPoint {
    double t = 0.0;
    IntegralResult result;
};

/// Index along the t grid for one formula.
std::vector<DeformationPoint> deformation_probe(const ManifoldSpec& spec, const Deformation& def,
                                                std::span<const double> ts, IndexFormula formula,
                                                const QuadratureConfig& cfg, const FDConfig& fd = {});

} // namespace dolbeault
