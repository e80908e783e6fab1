#pragma once

#include <array>
#include <functional>
#include <string>

#include "dolbeault/calculus.hpp"
#include "dolbeault/exterior.hpp"
#include "dolbeault/types.hpp"

namespace dolbeault {

/// Point -> h_{j kbar}, an n x n Hermitian positive-definite matrix.
/// The line element is ds^2 = 2 h_{j kbar} dz^j dzbar^k.
struct HermitianMetricField {
    int n = 1;
    std::function<CMat(const Point&)> h;
    ChartDomain domain = ChartDomain::whole_space();

    int real_dim() const { return 2 * n; }
};

enum class ConnectionChoice {
    LeviCivita,
    Bismut,
    Chern,
    /// Levi-Civita minus the Bismut contorsion (torsion -C); used by the
    /// pair-symmetry identity R(C) vs R(-C).
    BismutReversed,
};
inline constexpr int kNumConnections = 4;

const char* to_string(ConnectionChoice c);
ConnectionChoice connection_from_string(const std::string& name);

inline constexpr unsigned connection_bit(ConnectionChoice c) { return 1u << static_cast<unsigned>(c); }
inline constexpr unsigned kStandardConnections = connection_bit(ConnectionChoice::LeviCivita) |
                                                 connection_bit(ConnectionChoice::Bismut) |
                                                 connection_bit(ConnectionChoice::Chern);
inline constexpr unsigned kAllConnections = kStandardConnections | connection_bit(ConnectionChoice::BismutReversed);

/// Rank-3 array over real (or complex-coordinate) indices, t(a, b, c).
template <class T>
class Tensor3T {
  public:
    Tensor3T() = default;
    explicit Tensor3T(int dim) : dim_(dim) { v_.fill(T{}); }

    int dim() const { return dim_; }
    T& operator()(int a, int b, int c) { return v_[static_cast<std::size_t>((a * dim_ + b) * dim_ + c)]; }
    T operator()(int a, int b, int c) const {
        return v_[static_cast<std::size_t>((a * dim_ + b) * dim_ + c)];
    }

  private:
    int dim_ = 0;
    std::array<T, kMaxRealDim * kMaxRealDim * kMaxRealDim> v_{};
};
using Tensor3 = Tensor3T<double>;
using CTensor3 = Tensor3T<cplx>;

// ---------------------------------------------------------------------------
// Pointwise algebra

struct RealStructure {
    RMat g; ///< g_{MN}
    /// Complex structure as an endomorphism of tangent vectors,
    /// J(N, M) = I_M^N; J d/dx_j = d/dy_j.
    RMat complex_structure;
};

/// Real form of ds^2 = 2 h dz dzbar.
RMat metric_from_hermitian(const CMat& h);
RMat complex_structure_matrix(int n);
/// I_{MN} = I_M^P g_{PN}.
RMat lowered_complex_structure(const RealStructure& rs);

/// Checks Hermiticity and positive-definiteness; throws MetricError naming p.
void validate_hermitian(const CMat& h, const Point& p);

RealStructure assemble_real(const HermitianMetricField& metric, const Point& p);

/// Complex vielbein V(a, j) = e^a_j with h_{j kbar} = sum_a e^a_j conj(e^a_k),
/// taken from the lower-triangular Cholesky factor L (h = L L^dagger,
/// V = L^T), so it has a positive real diagonal.
CMat vielbein(const CMat& h, const Point& p);

/// Real orthonormal coframe e^A_M assembled from the complex vielbein:
/// E^{2a} = sqrt2 Re theta^a, E^{2a+1} = sqrt2 Im theta^a with
/// theta^a = e^a_j dz^j.
RMat real_coframe(const CMat& vielbein);

/// Complex coordinates w = (z^1..z^n, zbar^1..zbar^n) as w^alpha = T(alpha, M) x^M.
CMat complex_coordinate_map(int n);
/// Gamma^alpha_{beta gamma} from real-coordinate Gamma^P_{MN}.
CTensor3 christoffel_to_complex(const Tensor3& gamma);

// ---------------------------------------------------------------------------
// Per-point evaluation engine

/// Zeroth-order data at one point.
struct MetricSample {
    CMat h;
    CMat hinv;
    RMat g;
    CMat vielbein;
    RMat coframe; ///< e^A_M, row A
    RMat frame;   ///< e_A^M as column A (inverse of the coframe)
};

/// One derivative of the metric: connections, torsion and spin connections.
struct ConnectionData {
    int dim = 0;
    MetricSample sample;
    RMat ginv;
    std::array<CMat, kMaxRealDim> dh;       ///< d_M h
    std::array<RMat, kMaxRealDim> dg;       ///< d_M g
    std::array<RMat, kMaxRealDim> dframe;   ///< d_M e_A^N
    std::array<RMat, kMaxRealDim> dcoframe; ///< d_M e^A_N
    Tensor3 christoffel;                    ///< Levi-Civita Gamma^P_{MN}
    Tensor3 torsion;                        ///< C_{QMN} from the holomorphic formula
    Tensor3 chern;                          ///< Chern Gamma^P_{MN}
    unsigned computed = 0;
    /// omega[c][M](A, B) = Omega_{M, A}^B for connection c.
    std::array<std::array<RMat, kMaxRealDim>, kNumConnections> omega;
    /// A0_M, the determinant-bundle potential (i/4){-d_m, d_mbar} ln det h.
    std::array<double, kMaxRealDim> a0{};
    /// I_M^P d_P ln det g.
    std::array<double, kMaxRealDim> beta{};

    Tensor3 connection(ConnectionChoice c) const;
};

/// Two derivatives: curvature 2-forms and the determinant-bundle field strength.
struct CurvatureData {
    int dim = 0;
    ConnectionData first;
    unsigned computed = 0;
    /// curvature[c][pair](A, B): coefficient of dx^M ^ dx^N (M < N) in R_A^B.
    std::array<std::array<RMat, kMaxRealDim * (kMaxRealDim - 1) / 2>, kNumConnections> curvature;
    PolyForm f0;           ///< d A0
    PolyForm f0_over_2pi_real; ///< (1/16pi) I_M^P d_N d_P ln det g dx^M ^ dx^N

    /// Real-frame 2n x 2n curvature matrix.
    MatrixPolyForm real_matrix(ConnectionChoice c) const;
    /// n x n unitary block R_a^b, normalized so that a Kaehler metric has
    /// F0 = (i/2) R_a^a; acts on eps_b = (e_2b + i e_2b+1) / sqrt2 as
    /// R(eps_b) = eps_a R_a^b.
    MatrixPolyForm holomorphic_block(ConnectionChoice c) const;
    /// max |R_a^{bbar}| over components.
    double mixed_block_residual(ConnectionChoice c) const;
};

int pair_index(int m, int n, int dim);

class GeometryEngine {
  public:
    explicit GeometryEngine(HermitianMetricField metric, FDConfig fd = {});

    /// Replaces e by U(p) e for a unitary U; used to test frame invariance.
    void set_frame_rotation(std::function<CMat(const Point&)> rotation);

    const HermitianMetricField& metric() const { return metric_; }
    const FDConfig& fd() const { return fd_; }
    int n() const { return metric_.n; }
    int dim() const { return 2 * metric_.n; }

    MetricSample sample(const Point& p) const;
    ConnectionData connection_data(const Point& p, unsigned choices = kStandardConnections) const;
    CurvatureData curvature_data(const Point& p, unsigned choices = kStandardConnections) const;

  private:
    using Offsets = std::array<double, kMaxRealDim>;
    using NeighborFn = std::function<const MetricSample&(int dir, double offset)>;

    void check_point(const Point& p) const;
    Offsets steps_at(const Point& p) const;
    Point stencil_point(const Point& p, const Offsets& offsets, const Offsets& steps) const;
    /// `full` also differentiates the coframe (needed for Maurer-Cartan).
    ConnectionData connection_from(MetricSample center, unsigned choices, const Offsets& steps, bool full,
                                   const NeighborFn& neighbor) const;

    HermitianMetricField metric_;
    FDConfig fd_;
    std::function<CMat(const Point&)> rotation_;
};

// ---------------------------------------------------------------------------
// Operations

Tensor3 christoffel(const HermitianMetricField& metric, const Point& p, const FDConfig& cfg);

/// c(j, k, l) = C_{j k lbar} = d_k h_{j lbar} - d_j h_{k lbar}.
CTensor3 torsion_components_holo(const ConnectionData& data);
/// Totally antisymmetric C_{QMN} in real coordinates from C_{j k lbar}.
Tensor3 contorsion_holo(const HermitianMetricField& metric, const Point& p, const FDConfig& cfg);
/// C_{QMN} = I_Q^P I_M^R I_N^T (nabla_P I_RT + nabla_R I_TP + nabla_T I_PR)
/// with the Levi-Civita connection.
Tensor3 contorsion_real(const RealStructure& rs, const std::array<RMat, kMaxRealDim>& dg,
                        const Tensor3& christoffel);

Tensor3 connection(ConnectionChoice choice, const HermitianMetricField& metric, const Point& p,
                   const FDConfig& cfg);

/// Omega_M(A, B) for each real direction M.
std::array<RMat, kMaxRealDim> spin_connection(ConnectionChoice choice, const HermitianMetricField& metric,
                                              const Point& p, const FDConfig& cfg);

struct Curvature {
    MatrixPolyForm real;        ///< 2n x 2n, real frame
    MatrixPolyForm holomorphic; ///< n x n holomorphic block
    double mixed_residual = 0.0;
};
Curvature curvature(ConnectionChoice choice, const HermitianMetricField& metric, const Point& p,
                    const FDConfig& cfg);

struct DetBundle {
    PolyForm a0; ///< 1-form
    PolyForm f0; ///< d a0
};
DetBundle det_bundle(const HermitianMetricField& metric, const Point& p, const FDConfig& cfg);

/// omega = h_{j kbar} dz^j ^ dzbar^k in the real basis.
PolyForm kahler_form(const HermitianMetricField& metric, const Point& p);
/// max |d omega| coefficient.
double kahler_defect(const HermitianMetricField& metric, const Point& p, const FDConfig& cfg);
/// max |d d-bar omega| coefficient, computed as d of the (1,2) part of d omega.
double skt_residual(const HermitianMetricField& metric, const Point& p, const FDConfig& cfg);

// Residuals of identities. All are maxima of absolute component values.

/// nabla g for the chosen connection.
double metric_compatibility_residual(const ConnectionData& data, ConnectionChoice c);
/// nabla I for the chosen connection.
double complex_structure_residual(const ConnectionData& data, ConnectionChoice c);
/// Symmetric-part components of C_{QMN} in every index pair.
double torsion_antisymmetry_residual(const Tensor3& c);
/// de^A + Omega_A^B ^ e^B for Levi-Civita.
double maurer_cartan_residual(const ConnectionData& data);
/// dR - R ^ Omega + Omega ^ R for the chosen connection.
double bianchi_residual(const GeometryEngine& engine, const Point& p, ConnectionChoice c);
/// max |R_{MNPQ}(C) - R_{PQMN}(-C)| with R built from Bismut curvatures.
/// The difference equals -(1/2)(dC)_{MNPQ}, so it vanishes when the torsion
/// 3-form is closed (Kaehler and SKT metrics).
double riemann_torsion_symmetry_check(const GeometryEngine& engine, const Point& p);
/// The same difference with (1/2) dC added back; vanishes for every metric.
double riemann_pair_closure_residual(const GeometryEngine& engine, const Point& p);
/// d of the torsion 3-form (1/3!) C_{QMN} dx^Q ^ dx^M ^ dx^N.
PolyForm torsion_exterior_derivative(const GeometryEngine& engine, const Point& p);
/// Coordinate Riemann tensor R_{PQMN} = e^A_P e^B_Q R_{MN}(A, B), flattened.
std::vector<double> riemann_coordinate(const CurvatureData& data, ConnectionChoice c);

} // namespace dolbeault
