#include "dolbeault/quadrature.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <boost/random/sobol.hpp>

namespace dolbeault {

namespace {

// Neumaier-compensated running sum.
struct CompensatedSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double x) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            carry += (sum - t) + x;
        else
            carry += (x - t) + sum;
        sum = t;
    }
    double value() const { return sum + carry; }
};

/// Produces consecutive sample points (and weights) starting at a given index.
using Sampler = std::function<void(Point& u, double& weight)>;
using SamplerFactory = std::function<Sampler(std::uint64_t first_index)>;

/// Sums weight * |det D phi| * f(phi(u)) over indices [0, total) in fixed-size
/// chunks. Chunk results are combined in chunk order, so the outcome does not
/// depend on the thread count.
std::vector<double> chunked_sum(std::uint64_t total, std::uint64_t chunk, int count, const SamplerFactory& sampler_at,
                                const MultiIntegrand& f, const ChartParam& chart, int threads) {
    const std::uint64_t chunks = (total + chunk - 1) / chunk;
    std::vector<std::vector<double>> partial(chunks, std::vector<double>(static_cast<std::size_t>(count), 0.0));
    std::atomic<std::uint64_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto worker = [&] {
        std::vector<double> values(static_cast<std::size_t>(count));
        std::vector<CompensatedSum> sums(static_cast<std::size_t>(count));
        Point u(chart.dim);
        for (;;) {
            const std::uint64_t c = next.fetch_add(1);
            if (c >= chunks || failed.load())
                return;
            try {
                std::fill(sums.begin(), sums.end(), CompensatedSum{});
                const std::uint64_t end = std::min(total, (c + 1) * chunk);
                const Sampler next_point = sampler_at(c * chunk);
                for (std::uint64_t i = c * chunk; i < end; ++i) {
                    double weight = 1.0;
                    next_point(u, weight);
                    const Point x = chart(u);
                    const double w = weight * chart.volume_factor(u);
                    f(x, values);
                    for (int k = 0; k < count; ++k) {
                        const double v = values[static_cast<std::size_t>(k)];
                        if (!std::isfinite(v) || !std::isfinite(w)) {
                            std::ostringstream msg;
                            msg << "non-finite integrand at x = " << format_point(x)
                                << " (u = " << format_point(u) << ")";
                            throw IntegrationError(msg.str());
                        }
                        sums[static_cast<std::size_t>(k)].add(w * v);
                    }
                }
                for (int k = 0; k < count; ++k)
                    partial[c][static_cast<std::size_t>(k)] = sums[static_cast<std::size_t>(k)].value();
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error)
                    error = std::current_exception();
                failed = true;
                return;
            }
        }
    };

    const int nthreads = static_cast<int>(std::min<std::uint64_t>(static_cast<std::uint64_t>(std::max(1, threads)), chunks));
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nthreads; ++t)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }
    if (error)
        std::rethrow_exception(error);

    std::vector<double> out(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        CompensatedSum s;
        for (const auto& p : partial)
            s.add(p[static_cast<std::size_t>(k)]);
        out[static_cast<std::size_t>(k)] = s.value();
    }
    return out;
}

std::vector<double> gauss_level(const MultiIntegrand& f, int count, const ChartParam& chart, int n, int threads) {
    const GaussRule rule = gauss_legendre(n);
    const int dim = chart.dim;
    std::uint64_t total = 1;
    for (int m = 0; m < dim; ++m)
        total *= static_cast<std::uint64_t>(n);
    const SamplerFactory sampler_at = [&](std::uint64_t first) -> Sampler {
        return [&, index = first](Point& u, double& weight) mutable {
            std::uint64_t rest = index++;
            weight = 1.0;
            for (int m = dim - 1; m >= 0; --m) {
                const auto i = static_cast<std::size_t>(rest % static_cast<std::uint64_t>(n));
                rest /= static_cast<std::uint64_t>(n);
                u[m] = rule.nodes[i];
                weight *= rule.weights[i];
            }
        };
    };
    return chunked_sum(total, 1024, count, sampler_at, f, chart, threads);
}

double to_unit(std::uint64_t bits) {
    constexpr double kScale = 1.0 / 9007199254740992.0; // 2^-53
    const double u = static_cast<double>(bits >> 11) * kScale;
    return std::clamp(u, 0.5 * kScale, 1.0 - kScale);
}

struct ReplicateStats {
    std::vector<double> value, std_error;
};

ReplicateStats replicate_stats(const std::vector<std::vector<double>>& means, int count) {
    const auto r = static_cast<double>(means.size());
    ReplicateStats s;
    for (int k = 0; k < count; ++k) {
        CompensatedSum sum;
        for (const auto& m : means)
            sum.add(m[static_cast<std::size_t>(k)]);
        const double mean = sum.value() / r;
        double var = 0.0;
        for (const auto& m : means) {
            const double dlt = m[static_cast<std::size_t>(k)] - mean;
            var += dlt * dlt;
        }
        var = means.size() > 1 ? var / (r - 1.0) : 0.0;
        s.value.push_back(mean);
        s.std_error.push_back(std::sqrt(var / r));
    }
    return s;
}

std::vector<IntegralResult> randomized(const MultiIntegrand& f, int count, const ChartParam& chart,
                                       const QuadratureConfig& cfg, int threads) {
    const int dim = chart.dim;
    const int reps = std::max(2, cfg.replicates);
    const std::uint64_t per = cfg.budget / static_cast<std::uint64_t>(reps);
    if (per == 0)
        throw IntegrationError("budget " + std::to_string(cfg.budget) + " is smaller than the " +
                               std::to_string(reps) + " randomized replicates");
    const double inv = 1.0 / static_cast<double>(per);
    std::mt19937_64 shift_rng(cfg.seed);

    std::vector<std::vector<double>> means;
    std::vector<std::vector<TracePoint>> traces(static_cast<std::size_t>(count));
    for (int r = 0; r < reps; ++r) {
        std::vector<double> sums;
        if (cfg.method == QuadratureMethod::QmcSobol) {
            std::array<std::uint64_t, kMaxRealDim> shift{};
            for (int m = 0; m < dim; ++m)
                shift[static_cast<std::size_t>(m)] = shift_rng();
            using Sobol = boost::random::sobol_engine<std::uint64_t, 64>;
            const SamplerFactory sampler_at = [&, shift](std::uint64_t first) -> Sampler {
                auto engine = std::make_shared<Sobol>(static_cast<std::size_t>(dim));
                engine->discard(first * static_cast<std::uint64_t>(dim));
                return [engine, shift, dim, inv](Point& u, double& weight) {
                    for (int m = 0; m < dim; ++m)
                        u[m] = to_unit((*engine)() ^ shift[static_cast<std::size_t>(m)]);
                    weight = inv;
                };
            };
            sums = chunked_sum(per, 4096, count, sampler_at, f, chart, threads);
        } else {
            const std::uint64_t chunk = 4096;
            const std::uint64_t base = cfg.seed;
            const SamplerFactory sampler_at = [&, r](std::uint64_t first) -> Sampler {
                std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                                  static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(first / chunk)};
                auto rng = std::make_shared<std::mt19937_64>(seq);
                return [rng, dim, inv](Point& u, double& weight) {
                    for (int m = 0; m < dim; ++m)
                        u[m] = to_unit((*rng)());
                    weight = inv;
                };
            };
            sums = chunked_sum(per, chunk, count, sampler_at, f, chart, threads);
        }
        means.push_back(sums);
        const auto running = replicate_stats(means, count);
        for (int k = 0; k < count; ++k)
            traces[static_cast<std::size_t>(k)].push_back(
                {static_cast<std::uint64_t>(r + 1) * per, running.value[static_cast<std::size_t>(k)]});
    }

    const auto stats = replicate_stats(means, count);
    std::vector<IntegralResult> out(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        auto& res = out[static_cast<std::size_t>(k)];
        res.value = stats.value[static_cast<std::size_t>(k)];
        res.std_error = stats.std_error[static_cast<std::size_t>(k)];
        res.error = 3.0 * res.std_error;
        res.evaluations = per * static_cast<std::uint64_t>(reps);
        res.method = cfg.method;
        res.seed = cfg.seed;
        res.trace = std::move(traces[static_cast<std::size_t>(k)]);
    }
    return out;
}

} // namespace

const char* to_string(QuadratureMethod m) {
    switch (m) {
    case QuadratureMethod::GaussTensor:
        return "gauss_tensor";
    case QuadratureMethod::QmcSobol:
        return "qmc_sobol";
    case QuadratureMethod::MonteCarlo:
        return "mc";
    }
    return "?";
}

QuadratureMethod method_from_string(const std::string& name) {
    if (name == "gauss_tensor" || name == "gauss")
        return QuadratureMethod::GaussTensor;
    if (name == "qmc_sobol" || name == "qmc" || name == "sobol")
        return QuadratureMethod::QmcSobol;
    if (name == "mc" || name == "monte_carlo")
        return QuadratureMethod::MonteCarlo;
    throw Error("unknown quadrature method '" + name + "' (expected gauss, qmc or mc)");
}

double ChartParam::volume_factor(const Point& u) const {
    if (jacobian)
        return jacobian(u);
    RMat jac(dim, dim);
    for (int m = 0; m < dim; ++m) {
        Point up = u, dn = u;
        up[m] += fd_step;
        dn[m] -= fd_step;
        jac.col(m) = (map(up) - map(dn)) / (2.0 * fd_step);
    }
    return std::abs(jac.determinant());
}

GaussRule gauss_legendre(int n) {
    if (n < 1)
        throw Error("Gauss-Legendre rule needs at least one node");
    GaussRule rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1)
                p0 = 1.0;
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16)
                break;
        }
        {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1)
                p0 = 1.0;
            dp = n * (x * p1 - p0) / (x * x - 1.0);
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        const auto lo = static_cast<std::size_t>(i), hi = static_cast<std::size_t>(n - 1 - i);
        rule.nodes[lo] = 0.5 * (1.0 - x);
        rule.nodes[hi] = 0.5 * (1.0 + x);
        rule.weights[lo] = 0.5 * w;
        rule.weights[hi] = 0.5 * w;
    }
    return rule;
}

int resolve_threads(int requested) {
    if (requested > 0)
        return requested;
    if (const char* env = std::getenv("DOLBEAULT_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0)
            return v;
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::vector<IntegralResult> integrate(const MultiIntegrand& f, int count, const ChartParam& chart,
                                      const QuadratureConfig& cfg) {
    if (chart.dim < 1 || chart.dim > kMaxRealDim)
        throw DimensionError("chart dimension " + std::to_string(chart.dim) + " unsupported");
    const int threads = resolve_threads(cfg.threads);
    std::vector<IntegralResult> out;

    if (cfg.method == QuadratureMethod::GaussTensor) {
        const int n = static_cast<int>(cfg.budget);
        if (n < 2)
            throw IntegrationError("Gauss budget must be at least 2 nodes per dimension");
        const int coarse = n / 2;
        const auto lo = gauss_level(f, count, chart, coarse, threads);
        const auto hi = gauss_level(f, count, chart, n, threads);
        const auto pow_dim = [&](int k) {
            std::uint64_t v = 1;
            for (int m = 0; m < chart.dim; ++m)
                v *= static_cast<std::uint64_t>(k);
            return v;
        };
        for (int k = 0; k < count; ++k) {
            IntegralResult r;
            r.value = hi[static_cast<std::size_t>(k)];
            r.error = std::abs(hi[static_cast<std::size_t>(k)] - lo[static_cast<std::size_t>(k)]);
            r.evaluations = pow_dim(coarse) + pow_dim(n);
            r.method = cfg.method;
            r.seed = cfg.seed;
            r.trace = {{pow_dim(coarse), lo[static_cast<std::size_t>(k)]},
                       {pow_dim(coarse) + pow_dim(n), hi[static_cast<std::size_t>(k)]}};
            out.push_back(std::move(r));
        }
    } else {
        out = randomized(f, count, chart, cfg, threads);
    }
    for (auto& r : out)
        r.tolerance_met = cfg.tolerance <= 0.0 || r.error <= cfg.tolerance;
    return out;
}

IntegralResult integrate(const std::function<double(const Point&)>& f, const ChartParam& chart,
                         const QuadratureConfig& cfg) {
    const MultiIntegrand g = [&](const Point& x, std::span<double> out) { out[0] = f(x); };
    return integrate(g, 1, chart, cfg).front();
}

std::vector<IntegralResult> integrate_index(const DensityEvaluator& densities, unsigned formulas,
                                            const ChartParam& chart, const QuadratureConfig& cfg) {
    std::vector<int> slots;
    for (int k = 0; k < kNumFormulas; ++k)
        if (formulas & (1u << k))
            slots.push_back(k);
    const MultiIntegrand f = [&](const Point& x, std::span<double> out) {
        const auto d = densities.densities(formulas, x);
        for (std::size_t i = 0; i < slots.size(); ++i)
            out[i] = oriented_top(d[static_cast<std::size_t>(slots[i])]).real();
    };
    const auto res = integrate(f, static_cast<int>(slots.size()), chart, cfg);
    std::vector<IntegralResult> out(kNumFormulas);
    for (std::size_t i = 0; i < slots.size(); ++i)
        out[static_cast<std::size_t>(slots[i])] = res[i];
    return out;
}

std::vector<std::vector<IntegralResult>> convergence_study(const MultiIntegrand& f, int count,
                                                           const ChartParam& chart, QuadratureConfig cfg,
                                                           std::span<const std::uint64_t> levels) {
    std::vector<std::vector<IntegralResult>> table;
    for (std::uint64_t level : levels) {
        cfg.budget = level;
        table.push_back(integrate(f, count, chart, cfg));
    }
    return table;
}

} // namespace dolbeault
