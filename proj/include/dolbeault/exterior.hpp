#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

#include "dolbeault/types.hpp"

namespace dolbeault {

/// Pointwise inhomogeneous differential form on R^dim with complex
/// coefficients.
///
/// Basis elements dx^{M1} ^ ... ^ dx^{Mk} with M1 < ... < Mk are addressed by
/// the bitmask sum(1 << (Mi - 1)); the mask is the sorted index tuple. A zero
/// coefficient means the element is absent. Storage is dense over all 2^dim
/// elements, which caps dim at kMaxRealDim.
class PolyForm {
  public:
    static constexpr int kCapacity = 1 << kMaxRealDim;
    /// Coefficients with |c| below this fraction of the largest one are
    /// dropped after products and derivatives.
    static constexpr double kPruneRelative = 1e-14;

    PolyForm() { c_[0] = 0.0; }
    explicit PolyForm(int dim);
    PolyForm(const PolyForm& o) : dim_(o.dim_) { std::copy_n(o.c_.data(), o.size(), c_.data()); }
    PolyForm& operator=(const PolyForm& o) {
        dim_ = o.dim_;
        std::copy_n(o.c_.data(), o.size(), c_.data());
        return *this;
    }

    static PolyForm scalar(int dim, cplx value);
    /// c * dx^{i1} ^ dx^{i2} ^ ... for 1-based indices in any order. The
    /// tuple is sorted with the permutation sign; repeated indices give 0.
    static PolyForm basis(int dim, std::initializer_list<int> indices, cplx c = 1.0);
    static PolyForm basis(int dim, std::span<const int> indices, cplx c = 1.0);

    int dim() const { return dim_; }
    std::uint32_t size() const { return 1u << dim_; }
    std::uint32_t top_mask() const { return size() - 1; }

    cplx operator[](std::uint32_t mask) const { return c_[mask]; }
    cplx& operator[](std::uint32_t mask) { return c_[mask]; }

    /// Coefficient of the basis element named by 1-based indices (any order,
    /// sign applied).
    cplx coeff(std::initializer_list<int> indices) const;

    PolyForm degree_part(int k) const;
    bool is_zero() const;
    bool has_odd_part(double rel_tol = kPruneRelative) const;
    int max_degree() const;
    double max_abs() const;
    double max_abs_imag() const;

    /// Sorted 1-based index tuples with their coefficients, for printing.
    std::vector<std::pair<std::vector<int>, cplx>> terms() const;

    /// Zeroes coefficients at or below rel times the largest of the same degree.
    void prune(double rel = kPruneRelative);

    PolyForm& operator+=(const PolyForm& o);
    PolyForm& operator-=(const PolyForm& o);
    PolyForm& operator*=(cplx s);
    PolyForm operator-() const;

    friend PolyForm operator+(PolyForm a, const PolyForm& b) { return a += b; }
    friend PolyForm operator-(PolyForm a, const PolyForm& b) { return a -= b; }
    friend PolyForm operator*(PolyForm a, cplx s) { return a *= s; }
    friend PolyForm operator*(cplx s, PolyForm a) { return a *= s; }
    friend PolyForm operator*(PolyForm a, double s) { return a *= cplx(s); }
    friend PolyForm operator*(double s, PolyForm a) { return a *= cplx(s); }

  private:
    int dim_ = 0;
    /// Only the first size() slots are live.
    std::array<cplx, kCapacity> c_;
};

/// Sign of moving the indices of mask b past those of mask a when
/// concatenating a-tuple then b-tuple into sorted order. Masks must be
/// disjoint.
int merge_sign(std::uint32_t a, std::uint32_t b);

PolyForm wedge(const PolyForm& a, const PolyForm& b);

/// Sum_{k <= dim/2} f^k / k!, with a degree-0 part factored out as exp(f0).
/// Throws on odd-degree input.
PolyForm exp_even(const PolyForm& f);

/// Coefficient of dx^1 ^ ... ^ dx^dim.
cplx top_component(const PolyForm& f);

/// Two-form sum_{M<N} coeff(M, N) dx^M ^ dx^N (0-based M, N).
template <class F>
PolyForm two_form(int dim, F&& coeff) {
    PolyForm out(dim);
    for (int m = 0; m < dim; ++m)
        for (int n = m + 1; n < dim; ++n)
            out[(1u << m) | (1u << n)] = coeff(m, n);
    return out;
}

/// Re-expresses a form in a new coframe. Row M of `old_in_new` holds the
/// old basis 1-form dx^M written in the new basis.
PolyForm change_basis(const PolyForm& f, const CMat& old_in_new);

/// Complex coframe (dz1, dzb1, dz2, dzb2, ...) in interleaved slots.
PolyForm to_complex_basis(const PolyForm& real_form);
PolyForm to_real_basis(const PolyForm& complex_form);
/// Keeps the (p, q) part of a form written in the complex coframe.
PolyForm bidegree_part(const PolyForm& complex_form, int p, int q);

/// Square matrix of even-degree forms, e.g. a curvature matrix.
class MatrixPolyForm {
  public:
    MatrixPolyForm() = default;
    MatrixPolyForm(int size, int dim);

    int size() const { return size_; }
    int dim() const { return dim_; }

    PolyForm& operator()(int a, int b) { return e_[static_cast<std::size_t>(a * size_ + b)]; }
    const PolyForm& operator()(int a, int b) const {
        return e_[static_cast<std::size_t>(a * size_ + b)];
    }

    CMat degree0() const;
    bool all_even(double rel_tol = PolyForm::kPruneRelative) const;
    double max_abs() const;

    MatrixPolyForm& operator*=(cplx s);

  private:
    int size_ = 0;
    int dim_ = 0;
    std::vector<PolyForm> e_;
};

/// Matrix product with wedge as the entry product.
MatrixPolyForm operator*(const MatrixPolyForm& a, const MatrixPolyForm& b);
MatrixPolyForm operator+(const MatrixPolyForm& a, const MatrixPolyForm& b);
MatrixPolyForm operator-(const MatrixPolyForm& a, const MatrixPolyForm& b);
PolyForm trace(const MatrixPolyForm& m);
/// tr(a * b) without forming the full product.
PolyForm trace_of_product(const MatrixPolyForm& a, const MatrixPolyForm& b);

/// Truncated formal power series c_0 + c_1 x + ... + c_K x^K.
class ScalarSeries {
  public:
    ScalarSeries() = default;
    explicit ScalarSeries(std::vector<cplx> coeffs);

    int order() const { return static_cast<int>(c_.size()) - 1; }
    cplx operator[](int k) const { return k < static_cast<int>(c_.size()) ? c_[k] : cplx{}; }
    const std::vector<cplx>& coeffs() const { return c_; }

    /// x / (1 - e^{-x}) = 1 + x/2 + x^2/12 - x^4/720 + ...
    static ScalarSeries todd(int order);
    /// sin(x) / x
    static ScalarSeries sinc(int order);

  private:
    std::vector<cplx> c_;
};

ScalarSeries series_mul(const ScalarSeries& a, const ScalarSeries& b);
ScalarSeries series_reciprocal(const ScalarSeries& a);
/// log(a) for a(0) = 1.
ScalarSeries series_log(const ScalarSeries& a);
/// exp(a) for a(0) = 0.
ScalarSeries series_exp(const ScalarSeries& a);

/// Sum_k (log s)_k tr(M^k), truncated at the form dimension. M must have a
/// vanishing degree-0 part, so M^k lives in degree >= 2k.
PolyForm trace_log(const MatrixPolyForm& m, const ScalarSeries& s);
/// det s(M) computed as exp(tr log s(M)).
PolyForm trlog_apply(const MatrixPolyForm& m, const ScalarSeries& s);

} // namespace dolbeault
