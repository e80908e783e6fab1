#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dolbeault/characteristic.hpp"
#include "dolbeault/types.hpp"

namespace dolbeault {

enum class QuadratureMethod { GaussTensor, QmcSobol, MonteCarlo };

const char* to_string(QuadratureMethod m);
QuadratureMethod method_from_string(const std::string& name);

/// Parameterization phi: [0,1]^dim -> chart of (almost all of) a manifold.
struct ChartParam {
    int dim = 0;
    std::function<Point(const Point& u)> map;
    /// |det D phi(u)|; when empty it is computed by central differences of map.
    std::function<double(const Point& u)> jacobian;
    double fd_step = 1e-6;
    std::string description;

    Point operator()(const Point& u) const { return map(u); }
    double volume_factor(const Point& u) const;
};

struct QuadratureConfig {
    QuadratureMethod method = QuadratureMethod::GaussTensor;
    /// Gauss: nodes per dimension; QMC/MC: total sample count.
    std::uint64_t budget = 64;
    /// Target error estimate; 0 disables the check.
    double tolerance = 0.0;
    std::uint64_t seed = 1;
    /// Randomized replicates for QMC (digital shifts) and batches for MC.
    int replicates = 16;
    /// Worker threads; 0 reads DOLBEAULT_THREADS or uses the hardware count.
    int threads = 0;
};

struct TracePoint {
    std::uint64_t evaluations = 0;
    double value = 0.0;
};

struct IntegralResult {
    double value = 0.0;
    /// Gauss: |I_N - I_{N/2}|; QMC/MC: 3 standard errors over replicates.
    double error = 0.0;
    double std_error = 0.0;
    std::uint64_t evaluations = 0;
    bool tolerance_met = true;
    QuadratureMethod method = QuadratureMethod::GaussTensor;
    std::uint64_t seed = 0;
    std::vector<TracePoint> trace;
};

/// Integrands receive the chart point and write `count` values.
using MultiIntegrand = std::function<void(const Point& x, std::span<double> out)>;

/// Gauss-Legendre nodes and weights on [0, 1].
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
GaussRule gauss_legendre(int n);

int resolve_threads(int requested);

/// Integrates `count` functions at once over the parameterized chart:
/// sum of f(phi(u)) |det D phi(u)| du.
std::vector<IntegralResult> integrate(const MultiIntegrand& f, int count, const ChartParam& chart,
                                      const QuadratureConfig& cfg);
IntegralResult integrate(const std::function<double(const Point&)>& f, const ChartParam& chart,
                         const QuadratureConfig& cfg);

/// Oriented top components of the selected index densities, integrated.
/// Result slots follow IndexFormula order; unselected slots stay default.
std::vector<IntegralResult> integrate_index(const DensityEvaluator& densities, unsigned formulas,
                                            const ChartParam& chart, const QuadratureConfig& cfg);

/// One integration per budget level.
std::vector<std::vector<IntegralResult>> convergence_study(const MultiIntegrand& f, int count,
                                                           const ChartParam& chart, QuadratureConfig cfg,
                                                           std::span<const std::uint64_t> levels);

} // namespace dolbeault
