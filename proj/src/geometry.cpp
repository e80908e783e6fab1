#include "dolbeault/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace dolbeault {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;

// x + iy -> [[x, -y], [y, x]] blockwise; a ring homomorphism.
RMat realify(const CMat& c) {
    RMat r(2 * c.rows(), 2 * c.cols());
    for (Eigen::Index a = 0; a < c.rows(); ++a) {
        for (Eigen::Index j = 0; j < c.cols(); ++j) {
            const cplx v = c(a, j);
            r(2 * a, 2 * j) = v.real();
            r(2 * a, 2 * j + 1) = -v.imag();
            r(2 * a + 1, 2 * j) = v.imag();
            r(2 * a + 1, 2 * j + 1) = v.real();
        }
    }
    return r;
}

const CMat& coordinate_map_cached(int n) {
    static const std::array<CMat, kMaxComplexDim + 1> maps = [] {
        std::array<CMat, kMaxComplexDim + 1> out;
        for (int k = 0; k <= kMaxComplexDim; ++k)
            out[static_cast<std::size_t>(k)] = complex_coordinate_map(k);
        return out;
    }();
    return maps[static_cast<std::size_t>(n)];
}

const CMat& coordinate_map_inverse_cached(int n) {
    static const std::array<CMat, kMaxComplexDim + 1> maps = [] {
        std::array<CMat, kMaxComplexDim + 1> out;
        for (int k = 0; k <= kMaxComplexDim; ++k)
            out[static_cast<std::size_t>(k)] = k ? CMat(complex_coordinate_map(k).inverse()) : CMat();
        return out;
    }();
    return maps[static_cast<std::size_t>(n)];
}

// Holomorphic derivative d_k h from real-direction derivatives.
CMat holo_derivative(const std::array<CMat, kMaxRealDim>& dh, int k) {
    return 0.5 * (dh[2 * k] - kI * dh[2 * k + 1]);
}

Tensor3 torsion_from_holo(const CTensor3& c_holo, int n) {
    // c_holo(j, k, l) = C_{j k lbar}; fill all index placements of the
    // totally antisymmetric tensor in the (z, zbar) coordinate basis.
    const int dim = 2 * n;
    CTensor3 full(dim);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) {
                const cplx v = c_holo(j, k, l);
                const int lb = n + l;
                full(j, k, lb) = v;
                full(k, j, lb) = -v;
                full(j, lb, k) = -v;
                full(lb, j, k) = v;
                full(k, lb, j) = v;
                full(lb, k, j) = -v;
                const cplx vc = std::conj(v);
                const int jb = n + j, kb = n + k;
                full(jb, kb, l) = vc;
                full(kb, jb, l) = -vc;
                full(jb, l, kb) = -vc;
                full(l, jb, kb) = vc;
                full(kb, l, jb) = vc;
                full(l, kb, jb) = -vc;
            }
    // Each real index M = 2j + s meets only the complex indices j and n + j,
    // with weights T(j, M) and T(n + j, M). The result is totally
    // antisymmetric, so only Q < M < N is transformed.
    const CMat& t = coordinate_map_cached(n);
    std::array<std::array<cplx, 2>, kMaxRealDim> wt;
    std::array<std::array<int, 2>, kMaxRealDim> idx;
    for (int q = 0; q < dim; ++q) {
        idx[q] = {q / 2, n + q / 2};
        wt[q] = {t(q / 2, q), t(n + q / 2, q)};
    }
    Tensor3 out(dim);
    for (int q = 0; q < dim; ++q)
        for (int m = q + 1; m < dim; ++m)
            for (int nn = m + 1; nn < dim; ++nn) {
                cplx v{};
                for (int x = 0; x < 2; ++x)
                    for (int y = 0; y < 2; ++y) {
                        const cplx wxy = wt[q][x] * wt[m][y];
                        for (int z = 0; z < 2; ++z)
                            v += wxy * wt[nn][z] * full(idx[q][x], idx[m][y], idx[nn][z]);
                    }
                const double r = v.real();
                out(q, m, nn) = r;
                out(m, nn, q) = r;
                out(nn, q, m) = r;
                out(m, q, nn) = -r;
                out(q, nn, m) = -r;
                out(nn, m, q) = -r;
            }
    return out;
}

Tensor3 chern_from_metric(const CMat& hinv, const std::array<CMat, kMaxRealDim>& dh, int n) {
    // Gamma^q_{nm} = sum_p hinv(p, q) d_n h(m, p) and its conjugate.
    const int dim = 2 * n;
    CTensor3 gc(dim);
    for (int dn = 0; dn < n; ++dn) {
        const CMat dnh = holo_derivative(dh, dn);
        for (int q = 0; q < n; ++q)
            for (int m = 0; m < n; ++m) {
                cplx v{};
                for (int p = 0; p < n; ++p)
                    v += hinv(p, q) * dnh(m, p);
                gc(q, dn, m) = v;
                gc(n + q, n + dn, n + m) = std::conj(v);
            }
    }
    const CMat& t = coordinate_map_cached(n);
    const CMat& tinv = coordinate_map_inverse_cached(n);
    // lower indices to real coordinates, then raise the upper one
    CTensor3 lowered(dim);
    for (int a = 0; a < dim; ++a)
        for (int m = 0; m < dim; ++m)
            for (int nn = 0; nn < dim; ++nn) {
                cplx v{};
                for (int b = 0; b < dim; ++b) {
                    if (t(b, m) == cplx{})
                        continue;
                    for (int c = 0; c < dim; ++c)
                        if (t(c, nn) != cplx{})
                            v += gc(a, b, c) * t(b, m) * t(c, nn);
                }
                lowered(a, m, nn) = v;
            }
    Tensor3 out(dim);
    for (int p = 0; p < dim; ++p)
        for (int m = 0; m < dim; ++m)
            for (int nn = 0; nn < dim; ++nn) {
                cplx v{};
                for (int a = 0; a < dim; ++a)
                    v += tinv(p, a) * lowered(a, m, nn);
                out(p, m, nn) = v.real();
            }
    return out;
}

Tensor3 add_contorsion(const Tensor3& gamma, const RMat& ginv, const Tensor3& c, double factor) {
    const int dim = gamma.dim();
    Tensor3 out = gamma;
    for (int p = 0; p < dim; ++p)
        for (int q = 0; q < dim; ++q) {
            const double w = factor * ginv(p, q);
            if (w == 0.0)
                continue;
            for (int m = 0; m < dim; ++m)
                for (int nn = 0; nn < dim; ++nn)
                    out(p, m, nn) += w * c(q, m, nn);
        }
    return out;
}

// Omega_M = coframe (d_M frame + gamma_M frame), gamma_M(N, K) = gamma^N_{MK}.
std::array<RMat, kMaxRealDim> spin_from(const ConnectionData& cd, const Tensor3& gamma) {
    const int dim = cd.dim;
    const RMat& frame = cd.sample.frame;
    const RMat& coframe = cd.sample.coframe;
    std::array<RMat, kMaxRealDim> out;
    double inner[kMaxRealDim][kMaxRealDim];
    for (int m = 0; m < dim; ++m) {
        const RMat& dframe = cd.dframe[m];
        for (int nn = 0; nn < dim; ++nn)
            for (int b = 0; b < dim; ++b) {
                double v = dframe(nn, b);
                for (int k = 0; k < dim; ++k)
                    v += gamma(nn, m, k) * frame(k, b);
                inner[nn][b] = v;
            }
        RMat& o = out[m];
        o.resize(dim, dim);
        for (int a = 0; a < dim; ++a)
            for (int b = 0; b < dim; ++b) {
                double v = 0.0;
                for (int nn = 0; nn < dim; ++nn)
                    v += coframe(a, nn) * inner[nn][b];
                o(a, b) = v;
            }
    }
    return out;
}

} // namespace

const char* to_string(ConnectionChoice c) {
    switch (c) {
    case ConnectionChoice::LeviCivita:
        return "levi-civita";
    case ConnectionChoice::Bismut:
        return "bismut";
    case ConnectionChoice::Chern:
        return "chern";
    case ConnectionChoice::BismutReversed:
        return "bismut-reversed";
    }
    return "?";
}

ConnectionChoice connection_from_string(const std::string& name) {
    if (name == "levi-civita" || name == "lc")
        return ConnectionChoice::LeviCivita;
    if (name == "bismut")
        return ConnectionChoice::Bismut;
    if (name == "chern")
        return ConnectionChoice::Chern;
    if (name == "bismut-reversed")
        return ConnectionChoice::BismutReversed;
    throw Error("unknown connection '" + name + "'");
}

RMat metric_from_hermitian(const CMat& h) {
    const Eigen::Index n = h.rows();
    RMat g(2 * n, 2 * n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < n; ++k) {
            const cplx v = h(j, k);
            g(2 * j, 2 * k) = 2.0 * v.real();
            g(2 * j + 1, 2 * k + 1) = 2.0 * v.real();
            g(2 * j, 2 * k + 1) = 2.0 * v.imag();
            g(2 * j + 1, 2 * k) = -2.0 * v.imag();
        }
    return g;
}

RMat complex_structure_matrix(int n) {
    RMat j = RMat::Zero(2 * n, 2 * n);
    for (int k = 0; k < n; ++k) {
        j(2 * k + 1, 2 * k) = 1.0;
        j(2 * k, 2 * k + 1) = -1.0;
    }
    return j;
}

RMat lowered_complex_structure(const RealStructure& rs) {
    return rs.complex_structure.transpose() * rs.g;
}

void validate_hermitian(const CMat& h, const Point& p) {
    if (h.rows() != h.cols())
        throw MetricError("metric matrix is not square at " + format_point(p));
    if (!h.allFinite())
        throw MetricError("metric is not finite at " + format_point(p));
    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
    if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw MetricError("metric is not Hermitian at " + format_point(p));
    Eigen::LLT<CMat> llt(h);
    if (llt.info() != Eigen::Success)
        throw MetricError("metric is not positive-definite at " + format_point(p));
}

RealStructure assemble_real(const HermitianMetricField& metric, const Point& p) {
    const CMat h = metric.h(p);
    validate_hermitian(h, p);
    return {metric_from_hermitian(h), complex_structure_matrix(metric.n)};
}

CMat vielbein(const CMat& h, const Point& p) {
    Eigen::LLT<CMat> llt(h);
    if (llt.info() != Eigen::Success)
        throw MetricError("vielbein: Cholesky factorization failed at " + format_point(p));
    return CMat(llt.matrixL()).transpose();
}

RMat real_coframe(const CMat& v) { return kSqrt2 * realify(v); }

CMat complex_coordinate_map(int n) {
    CMat t = CMat::Zero(2 * n, 2 * n);
    for (int j = 0; j < n; ++j) {
        t(j, 2 * j) = 1.0;
        t(j, 2 * j + 1) = kI;
        t(n + j, 2 * j) = 1.0;
        t(n + j, 2 * j + 1) = -kI;
    }
    return t;
}

CTensor3 christoffel_to_complex(const Tensor3& gamma) {
    const int dim = gamma.dim();
    const int n = dim / 2;
    const CMat& t = coordinate_map_cached(n);
    const CMat& tinv = coordinate_map_inverse_cached(n);
    CTensor3 out(dim);
    for (int a = 0; a < dim; ++a)
        for (int b = 0; b < dim; ++b)
            for (int c = 0; c < dim; ++c) {
                cplx v{};
                for (int p = 0; p < dim; ++p) {
                    if (t(a, p) == cplx{})
                        continue;
                    for (int m = 0; m < dim; ++m) {
                        if (tinv(m, b) == cplx{})
                            continue;
                        for (int nn = 0; nn < dim; ++nn)
                            v += t(a, p) * gamma(p, m, nn) * tinv(m, b) * tinv(nn, c);
                    }
                }
                out(a, b, c) = v;
            }
    return out;
}

int pair_index(int m, int n, int dim) { return m * dim - m * (m + 1) / 2 + (n - m - 1); }

Tensor3 ConnectionData::connection(ConnectionChoice c) const {
    switch (c) {
    case ConnectionChoice::LeviCivita:
        return christoffel;
    case ConnectionChoice::Bismut:
        return add_contorsion(christoffel, ginv, torsion, 0.5);
    case ConnectionChoice::BismutReversed:
        return add_contorsion(christoffel, ginv, torsion, -0.5);
    case ConnectionChoice::Chern:
        return chern;
    }
    throw Error("unknown connection choice");
}

GeometryEngine::GeometryEngine(HermitianMetricField metric, FDConfig fd)
    : metric_(std::move(metric)), fd_(fd) {
    fd_.validate();
    if (metric_.n < 1 || metric_.n > kMaxComplexDim)
        throw DimensionError("complex dimension " + std::to_string(metric_.n) + " outside [1, " +
                             std::to_string(kMaxComplexDim) + "]");
    if (!metric_.h)
        throw MetricError("metric field has no evaluator");
}

void GeometryEngine::set_frame_rotation(std::function<CMat(const Point&)> rotation) {
    rotation_ = std::move(rotation);
}

void GeometryEngine::check_point(const Point& p) const {
    if (p.size() != dim())
        throw DimensionError("point has " + std::to_string(p.size()) + " coordinates, chart needs " +
                             std::to_string(dim()));
    if (!metric_.domain.contains(p))
        throw DomainError("point " + format_point(p) + " outside the chart domain (" +
                          metric_.domain.description + ")");
}

MetricSample GeometryEngine::sample(const Point& p) const {
    check_point(p);
    MetricSample s;
    s.h = metric_.h(p);
    if (s.h.rows() != n() || s.h.cols() != n())
        throw MetricError("metric evaluator returned a " + std::to_string(s.h.rows()) + "x" +
                          std::to_string(s.h.cols()) + " matrix, expected " + std::to_string(n()));
    if (!s.h.allFinite())
        throw MetricError("metric is not finite at " + format_point(p));
    const int nc = n();
    const double scale = std::max(1.0, s.h.cwiseAbs2().maxCoeff());
    if ((s.h - s.h.adjoint()).cwiseAbs2().maxCoeff() > 1e-24 * scale)
        throw MetricError("metric is not Hermitian at " + format_point(p));

    // h = L L^H with positive diagonal, and L^{-1}, by hand for n <= 3
    CMat l = CMat::Zero(nc, nc);
    for (int j = 0; j < nc; ++j) {
        double diag = s.h(j, j).real();
        for (int k = 0; k < j; ++k)
            diag -= std::norm(l(j, k));
        if (!(diag > 0.0))
            throw MetricError("metric is not positive-definite at " + format_point(p));
        l(j, j) = std::sqrt(diag);
        for (int i = j + 1; i < nc; ++i) {
            cplx v = s.h(i, j);
            for (int k = 0; k < j; ++k)
                v -= l(i, k) * std::conj(l(j, k));
            l(i, j) = v / l(j, j).real();
        }
    }
    CMat linv = CMat::Zero(nc, nc);
    for (int j = 0; j < nc; ++j) {
        linv(j, j) = 1.0 / l(j, j).real();
        for (int i = j + 1; i < nc; ++i) {
            cplx v = 0.0;
            for (int k = j; k < i; ++k)
                v -= l(i, k) * linv(k, j);
            linv(i, j) = v / l(i, i).real();
        }
    }

    s.hinv = linv.adjoint() * linv;
    s.g = metric_from_hermitian(s.h);
    CMat v = l.transpose();
    CMat vinv = linv.transpose();
    if (rotation_) {
        const CMat u = rotation_(p);
        v = u * v;
        vinv = vinv * u.adjoint();
    }
    s.vielbein = v;
    s.coframe = kSqrt2 * realify(v);
    s.frame = realify(vinv) / kSqrt2;
    return s;
}

GeometryEngine::Offsets GeometryEngine::steps_at(const Point& p) const {
    Offsets steps{};
    for (int m = 0; m < dim(); ++m)
        steps[static_cast<std::size_t>(m)] = effective_step(fd_, p, m);
    return steps;
}

Point GeometryEngine::stencil_point(const Point& p, const Offsets& offsets, const Offsets& steps) const {
    Point q = p;
    for (int m = 0; m < dim(); ++m)
        q[m] += offsets[static_cast<std::size_t>(m)] * steps[static_cast<std::size_t>(m)];
    if (!metric_.domain.contains(q))
        throw DomainError("finite-difference stencil point " + format_point(q) + " leaves the chart domain (" +
                          metric_.domain.description + ")");
    return q;
}

ConnectionData GeometryEngine::connection_data(const Point& p, unsigned choices) const {
    const Offsets steps = steps_at(p);
    MetricSample neighbor;
    return connection_from(sample(p), choices, steps, true, [&](int dir, double offset) -> const MetricSample& {
        Offsets o{};
        o[static_cast<std::size_t>(dir)] = offset;
        neighbor = sample(stencil_point(p, o, steps));
        return neighbor;
    });
}

ConnectionData GeometryEngine::connection_from(MetricSample center, unsigned choices, const Offsets& steps, bool full,
                                               const NeighborFn& neighbor) const {
    const int D = dim();
    const int nc = n();
    ConnectionData cd;
    cd.dim = D;
    cd.sample = std::move(center);
    cd.ginv = 0.5 * realify(CMat(cd.sample.hinv.conjugate()));

    const auto taps = stencil_taps(fd_);
    for (int dir = 0; dir < D; ++dir) {
        cd.dh[dir] = CMat::Zero(nc, nc);
        cd.dframe[dir] = RMat::Zero(D, D);
        if (full)
            cd.dcoframe[dir] = RMat::Zero(D, D);
        for (const auto& [offset, weight] : taps) {
            const MetricSample& sq = neighbor(dir, offset);
            const double w = weight / steps[static_cast<std::size_t>(dir)];
            cd.dh[dir] += w * sq.h;
            cd.dframe[dir] += w * sq.frame;
            if (full)
                cd.dcoframe[dir] += w * sq.coframe;
        }
        cd.dg[dir] = metric_from_hermitian(cd.dh[dir]);
    }

    cd.christoffel = Tensor3(D);
    for (int pp = 0; pp < D; ++pp)
        for (int m = 0; m < D; ++m)
            for (int nn = m; nn < D; ++nn) {
                double v = 0.0;
                for (int q = 0; q < D; ++q)
                    v += cd.ginv(pp, q) * (cd.dg[m](q, nn) + cd.dg[nn](q, m) - cd.dg[q](m, nn));
                cd.christoffel(pp, m, nn) = 0.5 * v;
                cd.christoffel(pp, nn, m) = 0.5 * v;
            }

    cd.torsion = torsion_from_holo(torsion_components_holo(cd), nc);
    if (choices & connection_bit(ConnectionChoice::Chern))
        cd.chern = chern_from_metric(cd.sample.hinv, cd.dh, nc);

    for (int c = 0; c < kNumConnections; ++c) {
        const auto choice = static_cast<ConnectionChoice>(c);
        if (!(choices & connection_bit(choice)))
            continue;
        cd.omega[c] = spin_from(cd, cd.connection(choice));
        cd.computed |= connection_bit(choice);
    }

    // d_M ln det h = tr(h^{-1} d_M h); A0 = (1/2) Im(d_m phi dz^m)
    std::array<double, kMaxRealDim> dphi{};
    for (int m = 0; m < D; ++m)
        dphi[m] = (cd.sample.hinv * cd.dh[m]).trace().real();
    for (int j = 0; j < nc; ++j) {
        cd.a0[2 * j] = -0.25 * dphi[2 * j + 1];
        cd.a0[2 * j + 1] = 0.25 * dphi[2 * j];
    }
    const RMat jmat = complex_structure_matrix(nc);
    std::array<double, kMaxRealDim> dlogg{};
    for (int m = 0; m < D; ++m)
        dlogg[m] = (cd.ginv * cd.dg[m]).trace();
    for (int m = 0; m < D; ++m) {
        double v = 0.0;
        for (int pp = 0; pp < D; ++pp)
            v += jmat(pp, m) * dlogg[pp];
        cd.beta[m] = v;
    }
    return cd;
}

CurvatureData GeometryEngine::curvature_data(const Point& p, unsigned choices) const {
    const int D = dim();
    CurvatureData out;
    out.dim = D;

    // d_omega[c][dir][M] = d_dir Omega_M
    std::array<std::array<std::array<RMat, kMaxRealDim>, kMaxRealDim>, kNumConnections> d_omega;
    std::array<std::array<double, kMaxRealDim>, kMaxRealDim> d_a0{};
    std::array<std::array<double, kMaxRealDim>, kMaxRealDim> d_beta{};

    // Nested stencils share points; samples are memoized by their offset
    // vector, with one step for both levels.
    const auto taps = stencil_taps(fd_);
    const Offsets steps = steps_at(p);
    // The buffers are reused across calls on a thread: a fresh memo per
    // point makes the allocator return and re-fault the pages every time.
    thread_local std::unordered_map<std::uint64_t, std::size_t> memo_index;
    thread_local std::vector<MetricSample> memo;
    memo_index.clear();
    memo.clear();
    memo.reserve(512);
    auto at = [&](const Offsets& o) -> const MetricSample& {
        std::uint64_t key = 0;
        for (double x : o)
            key = key * 64 + static_cast<std::uint64_t>(4.0 * x + 32.5);
        auto [it, inserted] = memo_index.try_emplace(key, memo.size());
        if (inserted) {
            try {
                memo.push_back(sample(stencil_point(p, o, steps)));
            } catch (...) {
                memo_index.erase(it);
                throw;
            }
        }
        // references stay valid only until the next insertion
        return memo[it->second];
    };
    auto connection_at = [&](const Offsets& outer) {
        const bool full = outer == Offsets{};
        return connection_from(at(outer), choices, steps, full, [&](int d2, double o2) -> const MetricSample& {
            Offsets inner = outer;
            inner[static_cast<std::size_t>(d2)] += o2;
            return at(inner);
        });
    };
    out.first = connection_at(Offsets{});
    out.computed = out.first.computed;
    for (int c = 0; c < kNumConnections; ++c)
        if (out.computed & (1u << c))
            for (int dir = 0; dir < D; ++dir)
                for (int m = 0; m < D; ++m)
                    d_omega[c][dir][m] = RMat::Zero(D, D);

    for (int dir = 0; dir < D; ++dir) {
        for (const auto& [offset, weight] : taps) {
            Offsets outer{};
            outer[static_cast<std::size_t>(dir)] = offset;
            const ConnectionData cq = connection_at(outer);
            const double w = weight / steps[static_cast<std::size_t>(dir)];
            for (int c = 0; c < kNumConnections; ++c)
                if (out.computed & (1u << c))
                    for (int m = 0; m < D; ++m)
                        d_omega[c][dir][m] += w * cq.omega[c][m];
            for (int m = 0; m < D; ++m) {
                d_a0[dir][m] += w * cq.a0[m];
                d_beta[dir][m] += w * cq.beta[m];
            }
        }
    }

    for (int c = 0; c < kNumConnections; ++c) {
        if (!(out.computed & (1u << c)))
            continue;
        const auto& om = out.first.omega[c];
        for (int m = 0; m < D; ++m)
            for (int nn = m + 1; nn < D; ++nn)
                out.curvature[c][pair_index(m, nn, D)] =
                    d_omega[c][m][nn] - d_omega[c][nn][m] + om[m] * om[nn] - om[nn] * om[m];
    }
    out.f0 = two_form(D, [&](int m, int nn) { return cplx(d_a0[m][nn] - d_a0[nn][m]); });
    out.f0_over_2pi_real = two_form(
        D, [&](int m, int nn) { return cplx((d_beta[nn][m] - d_beta[m][nn]) / (16.0 * kPi)); });
    return out;
}

MatrixPolyForm CurvatureData::real_matrix(ConnectionChoice c) const {
    const int ci = static_cast<int>(c);
    if (!(computed & (1u << ci)))
        throw Error(std::string("curvature for ") + to_string(c) + " was not computed");
    MatrixPolyForm out(dim, dim);
    for (int a = 0; a < dim; ++a)
        for (int b = 0; b < dim; ++b)
            out(a, b) = two_form(dim, [&](int m, int nn) {
                return cplx(curvature[ci][pair_index(m, nn, dim)](a, b));
            });
    return out;
}

MatrixPolyForm CurvatureData::holomorphic_block(ConnectionChoice c) const {
    const int ci = static_cast<int>(c);
    if (!(computed & (1u << ci)))
        throw Error(std::string("curvature for ") + to_string(c) + " was not computed");
    const int n = dim / 2;
    MatrixPolyForm out(n, dim);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            out(a, b) = two_form(dim, [&](int m, int nn) {
                const RMat& r = curvature[ci][pair_index(m, nn, dim)];
                return 0.5 * cplx(r(2 * a, 2 * b) + r(2 * a + 1, 2 * b + 1),
                                  r(2 * a, 2 * b + 1) - r(2 * a + 1, 2 * b));
            });
    return out;
}

double CurvatureData::mixed_block_residual(ConnectionChoice c) const {
    const int ci = static_cast<int>(c);
    if (!(computed & (1u << ci)))
        throw Error(std::string("curvature for ") + to_string(c) + " was not computed");
    const int n = dim / 2;
    double worst = 0.0;
    for (int m = 0; m < dim; ++m)
        for (int nn = m + 1; nn < dim; ++nn) {
            const RMat& r = curvature[ci][pair_index(m, nn, dim)];
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) {
                    const cplx v = 0.5 * cplx(r(2 * a, 2 * b) - r(2 * a + 1, 2 * b + 1),
                                              -(r(2 * a, 2 * b + 1) + r(2 * a + 1, 2 * b)));
                    worst = std::max(worst, std::abs(v));
                }
        }
    return worst;
}

// ---------------------------------------------------------------------------

Tensor3 christoffel(const HermitianMetricField& metric, const Point& p, const FDConfig& cfg) {
    return GeometryEngine(metric, cfg).connection_data(p, 0).christoffel;
}

CTensor3 torsion_components_holo(const ConnectionData& data) {
    const int n = data.dim / 2;
    CTensor3 c(n);
    std::array<CMat, kMaxComplexDim> dk;
    for (int k = 0; k < n; ++k)
        dk[k] = holo_derivative(data.dh, k);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l)
                c(j, k, l) = dk[k](j, l) - dk[j](k, l);
    return c;
}

Tensor3 contorsion_holo(const HermitianMetricField& metric, const Point& p, const FDConfig& cfg) {
    return GeometryEngine(metric, cfg).connection_data(p, 0).torsion;
}

Tensor3 contorsion_real(const RealStructure& rs, const std::array<RMat, kMaxRealDim>& dg,
                        const Tensor3& gamma) {
    const int dim = static_cast<int>(rs.g.rows());
    const RMat& jm = rs.complex_structure; // jm(N, M) = I_M^N
    const RMat il = lowered_complex_structure(rs);
    // w(P, R, T) = nabla_P I_{RT}
    Tensor3 w(dim);
    for (int pp = 0; pp < dim; ++pp) {
        const RMat dil = jm.transpose() * dg[pp];
        for (int r = 0; r < dim; ++r)
            for (int t = 0; t < dim; ++t) {
                double v = dil(r, t);
                for (int k = 0; k < dim; ++k)
                    v -= gamma(k, pp, r) * il(k, t) + gamma(k, pp, t) * il(r, k);
                w(pp, r, t) = v;
            }
    }
    Tensor3 s(dim);
    for (int pp = 0; pp < dim; ++pp)
        for (int r = 0; r < dim; ++r)
            for (int t = 0; t < dim; ++t)
                s(pp, r, t) = w(pp, r, t) + w(r, t, pp) + w(t, pp, r);
    // contract with I_Q^P I_M^R I_N^T, one index at a time
    Tensor3 a(dim), b(dim), c(dim);
    for (int q = 0; q < dim; ++q)
        for (int pp = 0; pp < dim; ++pp) {
            const double iq = jm(pp, q);
            if (iq == 0.0)
                continue;
            for (int r = 0; r < dim; ++r)
                for (int t = 0; t < dim; ++t)
                    a(q, r, t) += iq * s(pp, r, t);
        }
    for (int q = 0; q < dim; ++q)
        for (int m = 0; m < dim; ++m)
            for (int r = 0; r < dim; ++r) {
                const double im = jm(r, m);
                if (im == 0.0)
                    continue;
                for (int t = 0; t < dim; ++t)
                    b(q, m, t) += im * a(q, r, t);
            }
    for (int q = 0; q < dim; ++q)
        for (int m = 0; m < dim; ++m)
            for (int nn = 0; nn < dim; ++nn)
                for (int t = 0; t < dim; ++t) {
                    const double in = jm(t, nn);
                    if (in != 0.0)
                        c(q, m, nn) += in * b(q, m, t);
                }
    return c;
}

Tensor3 connection(ConnectionChoice choice, const HermitianMetricField& metric, const Point& p,
                   const FDConfig& cfg) {
    return GeometryEngine(metric, cfg).connection_data(p, connection_bit(choice)).connection(choice);
}

std::array<RMat, kMaxRealDim> spin_connection(ConnectionChoice choice, const HermitianMetricField& metric,
                                              const Point& p, const FDConfig& cfg) {
    const auto cd = GeometryEngine(metric, cfg).connection_data(p, connection_bit(choice));
    return cd.omega[static_cast<int>(choice)];
}

Curvature curvature(ConnectionChoice choice, const HermitianMetricField& metric, const Point& p,
                    const FDConfig& cfg) {
    const auto cd = GeometryEngine(metric, cfg).curvature_data(p, connection_bit(choice));
    return {cd.real_matrix(choice), cd.holomorphic_block(choice), cd.mixed_block_residual(choice)};
}

DetBundle det_bundle(const HermitianMetricField& metric, const Point& p, const FDConfig& cfg) {
    const GeometryEngine engine(metric, cfg);
    const int dim = engine.dim();
    auto a0_field = [&](const Point& q) {
        const auto cd = engine.connection_data(q, 0);
        PolyForm a(dim);
        for (int m = 0; m < dim; ++m)
            a[1u << m] = cd.a0[m];
        return a;
    };
    return {a0_field(p), d(a0_field, p, cfg, metric.domain)};
}

PolyForm kahler_form(const HermitianMetricField& metric, const Point& p) {
    const CMat h = metric.h(p);
    validate_hermitian(h, p);
    const int dim = metric.real_dim();
    PolyForm cf(dim);
    for (int j = 0; j < metric.n; ++j)
        for (int k = 0; k < metric.n; ++k) {
            const int hj = 2 * j, ak = 2 * k + 1;
            const std::uint32_t mask = (1u << hj) | (1u << ak);
            cf[mask] += (hj < ak ? 1.0 : -1.0) * h(j, k);
        }
    return to_real_basis(cf);
}

double kahler_defect(const HermitianMetricField& metric, const Point& p, const FDConfig& cfg) {
    return d([&](const Point& q) { return kahler_form(metric, q); }, p, cfg, metric.domain).max_abs();
}

double skt_residual(const HermitianMetricField& metric, const Point& p, const FDConfig& cfg) {
    auto omega = [&](const Point& q) { return kahler_form(metric, q); };
    auto dbar_omega = [&](const Point& q) {
        const PolyForm dw = d(omega, q, cfg, metric.domain);
        return to_real_basis(bidegree_part(to_complex_basis(dw), 1, 2));
    };
    return d(dbar_omega, p, cfg, metric.domain).max_abs();
}

double metric_compatibility_residual(const ConnectionData& data, ConnectionChoice c) {
    const int dim = data.dim;
    const Tensor3 gamma = data.connection(c);
    const RMat& g = data.sample.g;
    double worst = 0.0;
    for (int pp = 0; pp < dim; ++pp)
        for (int m = 0; m < dim; ++m)
            for (int nn = 0; nn < dim; ++nn) {
                double v = data.dg[pp](m, nn);
                for (int k = 0; k < dim; ++k)
                    v -= gamma(k, pp, m) * g(k, nn) + gamma(k, pp, nn) * g(m, k);
                worst = std::max(worst, std::abs(v));
            }
    return worst;
}

double complex_structure_residual(const ConnectionData& data, ConnectionChoice c) {
    const int dim = data.dim;
    const Tensor3 gamma = data.connection(c);
    const RMat jm = complex_structure_matrix(dim / 2); // I_M^N = jm(N, M)
    double worst = 0.0;
    for (int pp = 0; pp < dim; ++pp)
        for (int m = 0; m < dim; ++m)
            for (int nn = 0; nn < dim; ++nn) {
                double v = 0.0;
                for (int k = 0; k < dim; ++k)
                    v += -gamma(k, pp, m) * jm(nn, k) + gamma(nn, pp, k) * jm(k, m);
                worst = std::max(worst, std::abs(v));
            }
    return worst;
}

double torsion_antisymmetry_residual(const Tensor3& c) {
    const int dim = c.dim();
    double worst = 0.0;
    for (int a = 0; a < dim; ++a)
        for (int b = 0; b < dim; ++b)
            for (int e = 0; e < dim; ++e) {
                const double v = c(a, b, e);
                worst = std::max({worst, std::abs(v + c(b, a, e)), std::abs(v + c(a, e, b)),
                                  std::abs(v + c(e, b, a))});
            }
    return worst;
}

double maurer_cartan_residual(const ConnectionData& data) {
    const int dim = data.dim;
    const int lc = static_cast<int>(ConnectionChoice::LeviCivita);
    if (!(data.computed & (1u << lc)))
        throw Error("maurer_cartan_residual needs the Levi-Civita spin connection");
    const auto& om = data.omega[lc];
    const RMat& th = data.sample.coframe;
    double worst = 0.0;
    for (int a = 0; a < dim; ++a)
        for (int m = 0; m < dim; ++m)
            for (int nn = m + 1; nn < dim; ++nn) {
                double v = data.dcoframe[m](a, nn) - data.dcoframe[nn](a, m);
                for (int b = 0; b < dim; ++b)
                    v += om[m](a, b) * th(b, nn) - om[nn](a, b) * th(b, m);
                worst = std::max(worst, std::abs(v));
            }
    return worst;
}

double bianchi_residual(const GeometryEngine& engine, const Point& p, ConnectionChoice c) {
    const int dim = engine.dim();
    const unsigned bit = connection_bit(c);
    const CurvatureData at_p = engine.curvature_data(p, bit);
    const MatrixPolyForm r = at_p.real_matrix(c);

    auto curvature_field = [&](const Point& q) { return engine.curvature_data(q, bit).real_matrix(c); };
    // dR entrywise: sum_dir dx^dir ^ d_dir R
    MatrixPolyForm dr(dim, dim);
    for (int dir = 0; dir < dim; ++dir) {
        const FDConfig& cfg = engine.fd();
        const double step = effective_step(cfg, p, dir);
        MatrixPolyForm deriv(dim, dim);
        for (const auto& [offset, weight] : stencil_taps(cfg)) {
            Point q = p;
            q[dir] += offset * step;
            const MatrixPolyForm rq = curvature_field(q);
            for (int a = 0; a < dim; ++a)
                for (int b = 0; b < dim; ++b)
                    deriv(a, b) += rq(a, b) * (weight / step);
        }
        for (int a = 0; a < dim; ++a)
            for (int b = 0; b < dim; ++b)
                dr(a, b) += wedge_dx(dir, deriv(a, b));
    }

    const auto& om = at_p.first.omega[static_cast<int>(c)];
    std::vector<PolyForm> omega_forms(static_cast<std::size_t>(dim * dim), PolyForm(dim));
    for (int a = 0; a < dim; ++a)
        for (int b = 0; b < dim; ++b)
            for (int m = 0; m < dim; ++m)
                omega_forms[static_cast<std::size_t>(a * dim + b)][1u << m] = om[m](a, b);
    auto omf = [&](int a, int b) -> const PolyForm& {
        return omega_forms[static_cast<std::size_t>(a * dim + b)];
    };

    double worst = 0.0;
    for (int a = 0; a < dim; ++a)
        for (int b = 0; b < dim; ++b) {
            PolyForm v = dr(a, b);
            for (int k = 0; k < dim; ++k) {
                v -= wedge(r(a, k), omf(k, b));
                v += wedge(omf(a, k), r(k, b));
            }
            worst = std::max(worst, v.max_abs());
        }
    return worst;
}

std::vector<double> riemann_coordinate(const CurvatureData& data, ConnectionChoice c) {
    const int dim = data.dim;
    const int ci = static_cast<int>(c);
    if (!(data.computed & (1u << ci)))
        throw Error(std::string("curvature for ") + to_string(c) + " was not computed");
    const RMat& th = data.first.sample.coframe;
    std::vector<double> r(static_cast<std::size_t>(dim * dim * dim * dim), 0.0);
    auto at = [&](int pp, int q, int m, int nn) -> double& {
        return r[static_cast<std::size_t>(((pp * dim + q) * dim + m) * dim + nn)];
    };
    for (int m = 0; m < dim; ++m)
        for (int nn = m + 1; nn < dim; ++nn) {
            const RMat coord = th.transpose() * data.curvature[ci][pair_index(m, nn, dim)] * th;
            for (int pp = 0; pp < dim; ++pp)
                for (int q = 0; q < dim; ++q) {
                    at(pp, q, m, nn) = coord(pp, q);
                    at(pp, q, nn, m) = -coord(pp, q);
                }
        }
    return r;
}

PolyForm torsion_exterior_derivative(const GeometryEngine& engine, const Point& p) {
    const int dim = engine.dim();
    auto three_form = [&](const Point& q) {
        const Tensor3 c = engine.connection_data(q, 0).torsion;
        PolyForm f(dim);
        for (int a = 0; a < dim; ++a)
            for (int b = a + 1; b < dim; ++b)
                for (int e = b + 1; e < dim; ++e)
                    f[(1u << a) | (1u << b) | (1u << e)] = c(a, b, e);
        return f;
    };
    return d(three_form, p, engine.fd(), engine.metric().domain);
}

namespace {

double pair_symmetry_residual(const GeometryEngine& engine, const Point& p, bool closure_term) {
    const unsigned bits = connection_bit(ConnectionChoice::Bismut) | connection_bit(ConnectionChoice::BismutReversed);
    const CurvatureData cd = engine.curvature_data(p, bits);
    const auto plus = riemann_coordinate(cd, ConnectionChoice::Bismut);
    const auto minus = riemann_coordinate(cd, ConnectionChoice::BismutReversed);
    const int dim = engine.dim();
    const PolyForm dc = closure_term ? torsion_exterior_derivative(engine, p) : PolyForm(dim);
    auto idx = [dim](int a, int b, int c, int e) {
        return static_cast<std::size_t>(((a * dim + b) * dim + c) * dim + e);
    };
    double worst = 0.0;
    for (int a = 0; a < dim; ++a)
        for (int b = 0; b < dim; ++b)
            for (int c = 0; c < dim; ++c)
                for (int e = 0; e < dim; ++e) {
                    double v = plus[idx(a, b, c, e)] - minus[idx(c, e, a, b)];
                    if (closure_term)
                        v += 0.5 * dc.coeff({a + 1, b + 1, c + 1, e + 1}).real();
                    worst = std::max(worst, std::abs(v));
                }
    return worst;
}

} // namespace

double riemann_torsion_symmetry_check(const GeometryEngine& engine, const Point& p) {
    return pair_symmetry_residual(engine, p, false);
}

double riemann_pair_closure_residual(const GeometryEngine& engine, const Point& p) {
    return pair_symmetry_residual(engine, p, true);
}

} // namespace dolbeault
