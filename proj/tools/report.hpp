#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dolbeault/catalog.hpp"

namespace dolbeault::cli {

using Json = nlohmann::ordered_json;

/// Exit codes shared by every verb.
inline constexpr int kExitPass = 0;
inline constexpr int kExitTolerance = 1;
inline constexpr int kExitUsage = 2;

/// Serializes with floats printed as %.17g; keys keep insertion order.
std::string dump(const Json& j, int indent = 2);

struct Residual {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    /// Informational rows are reported but do not decide the exit code.
    bool enforced = true;
    bool passed() const { return !enforced || value <= tolerance; }
};

struct SuiteReport {
    std::string suite;
    int points = 0;
    std::uint64_t seed = 0;
    std::vector<Residual> residuals;
    bool passed() const;
};

std::vector<std::string> suite_names();

struct SuiteOptions {
    int points = 50;
    std::uint64_t seed = 1;
    FDConfig fd;
    /// Overrides every enforced tolerance when set.
    std::optional<double> tolerance;
    /// Quadrature used by the deformation suite.
    QuadratureConfig quadrature;
};

/// Throws PreconditionError when the suite does not apply to the manifold.
SuiteReport run_suite(const ManifoldSpec& spec, const std::string& suite, const SuiteOptions& options);

struct FormulaOutcome {
    IndexFormula formula = IndexFormula::ToddHRR;
    IntegralResult result;
    long nearest = 0;
    double deviation = 0.0;
    bool passed = true;
};

struct SkippedFormula {
    IndexFormula formula = IndexFormula::ToddHRR;
    std::string reason;
};

struct IndexRequest {
    unsigned formulas = kAllFormulaBits;
    /// Explicitly requested formulas fail on unmet preconditions; `all`
    /// skips them instead.
    bool explicit_formulas = false;
    bool force = false;
    QuadratureConfig quadrature;
    FDConfig fd;
    double tolerance = 1e-4;
};

struct IndexReport {
    std::vector<FormulaOutcome> outcomes;
    std::vector<SkippedFormula> skipped;
    double kahler_residual = 0.0;
    double skt_residual = 0.0;
    bool passed() const;
};

IndexReport run_index(const ManifoldSpec& spec, const IndexRequest& request);

/// Formula list: `all` or comma-separated names and aliases.
unsigned parse_formulas(const std::string& text);

/// Default quadrature for a manifold: Gauss for real dimension <= 4, QMC above.
QuadratureConfig default_quadrature(const ManifoldSpec& spec, bool slow);
double default_index_tolerance(const ManifoldSpec& spec);

Json manifold_json(const ManifoldSpec& spec);
Json quadrature_json(const QuadratureConfig& cfg);
Json fd_json(const FDConfig& fd);
Json result_json(const IntegralResult& r);
Json environment_json(const QuadratureConfig& cfg);
Json suite_json(const SuiteReport& report);
Json index_json(const ManifoldSpec& spec, const IndexRequest& request, const IndexReport& report);

} // namespace dolbeault::cli
