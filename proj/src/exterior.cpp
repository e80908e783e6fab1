#include "dolbeault/exterior.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

namespace dolbeault {

namespace {

using SignTable = std::array<std::array<std::int8_t, PolyForm::kCapacity>, PolyForm::kCapacity>;

SignTable build_sign_table() {
    SignTable t{};
    for (std::uint32_t a = 0; a < PolyForm::kCapacity; ++a) {
        for (std::uint32_t b = 0; b < PolyForm::kCapacity; ++b) {
            if (a & b) {
                t[a][b] = 0;
                continue;
            }
            int inversions = 0;
            for (std::uint32_t rest = b; rest; rest &= rest - 1) {
                const std::uint32_t q = static_cast<std::uint32_t>(std::countr_zero(rest));
                inversions += std::popcount(a >> (q + 1));
            }
            t[a][b] = (inversions % 2) ? -1 : 1;
        }
    }
    return t;
}

const SignTable& sign_table() {
    static const SignTable table = build_sign_table();
    return table;
}

void check_dim(int dim) {
    if (dim < 0 || dim > kMaxRealDim)
        throw DimensionError("form dimension " + std::to_string(dim) + " outside [0, " +
                             std::to_string(kMaxRealDim) + "]");
}

void check_same_dim(const PolyForm& a, const PolyForm& b) {
    if (a.dim() != b.dim())
        throw DimensionError("form dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                             std::to_string(b.dim()));
}

// Sorts 1-based indices into a mask; returns sign 0 on a repeat.
std::pair<std::uint32_t, int> sort_indices(int dim, std::span<const int> indices) {
    std::uint32_t mask = 0;
    int sign = 1;
    for (int idx : indices) {
        if (idx < 1 || idx > dim)
            throw DimensionError("form index " + std::to_string(idx) + " outside [1, " +
                                 std::to_string(dim) + "]");
        const std::uint32_t bit = 1u << (idx - 1);
        if (mask & bit)
            return {0, 0};
        // the new index moves left past every already-placed larger index
        if (std::popcount(mask >> idx) % 2)
            sign = -sign;
        mask |= bit;
    }
    return {mask, sign};
}

} // namespace

std::string format_point(const Point& p) {
    std::ostringstream os;
    os.precision(17);
    os << "(";
    for (Eigen::Index i = 0; i < p.size(); ++i)
        os << (i ? ", " : "") << p[i];
    os << ")";
    return os.str();
}

PolyForm::PolyForm(int dim) : dim_(dim) {
    check_dim(dim);
    std::fill_n(c_.data(), size(), cplx{});
}

PolyForm PolyForm::scalar(int dim, cplx value) {
    PolyForm f(dim);
    f.c_[0] = value;
    return f;
}

PolyForm PolyForm::basis(int dim, std::initializer_list<int> indices, cplx c) {
    return basis(dim, std::span<const int>(indices.begin(), indices.size()), c);
}

PolyForm PolyForm::basis(int dim, std::span<const int> indices, cplx c) {
    PolyForm f(dim);
    auto [mask, sign] = sort_indices(dim, indices);
    if (sign != 0)
        f.c_[mask] = static_cast<double>(sign) * c;
    return f;
}

cplx PolyForm::coeff(std::initializer_list<int> indices) const {
    auto [mask, sign] = sort_indices(dim_, std::span<const int>(indices.begin(), indices.size()));
    if (sign == 0)
        return 0.0;
    return static_cast<double>(sign) * c_[mask];
}

PolyForm PolyForm::degree_part(int k) const {
    PolyForm out(dim_);
    for (std::uint32_t m = 0; m < size(); ++m)
        if (std::popcount(m) == k)
            out.c_[m] = c_[m];
    return out;
}

bool PolyForm::is_zero() const {
    for (std::uint32_t m = 0; m < size(); ++m)
        if (c_[m] != cplx{})
            return false;
    return true;
}

bool PolyForm::has_odd_part(double rel_tol) const {
    const double thr = rel_tol * max_abs();
    for (std::uint32_t m = 0; m < size(); ++m)
        if ((std::popcount(m) % 2) && std::abs(c_[m]) > thr)
            return true;
    return false;
}

int PolyForm::max_degree() const {
    int deg = -1;
    for (std::uint32_t m = 0; m < size(); ++m)
        if (c_[m] != cplx{})
            deg = std::max(deg, std::popcount(m));
    return deg;
}

double PolyForm::max_abs() const {
    double v = 0.0;
    for (std::uint32_t m = 0; m < size(); ++m)
        v = std::max(v, std::norm(c_[m]));
    return std::sqrt(v);
}

double PolyForm::max_abs_imag() const {
    double v = 0.0;
    for (std::uint32_t m = 0; m < size(); ++m)
        v = std::max(v, std::abs(c_[m].imag()));
    return v;
}

std::vector<std::pair<std::vector<int>, cplx>> PolyForm::terms() const {
    std::vector<std::pair<std::vector<int>, cplx>> out;
    for (std::uint32_t m = 0; m < size(); ++m) {
        if (c_[m] == cplx{})
            continue;
        std::vector<int> idx;
        for (int b = 0; b < dim_; ++b)
            if (m & (1u << b))
                idx.push_back(b + 1);
        out.emplace_back(std::move(idx), c_[m]);
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.first.size() < b.first.size();
    });
    return out;
}

void PolyForm::prune(double rel) {
    std::array<double, kMaxRealDim + 1> scale{};
    for (std::uint32_t m = 0; m < size(); ++m) {
        double& s = scale[static_cast<std::size_t>(std::popcount(m))];
        s = std::max(s, std::norm(c_[m]));
    }
    for (double& s : scale)
        s *= rel * rel;
    for (std::uint32_t m = 0; m < size(); ++m)
        if (std::norm(c_[m]) <= scale[static_cast<std::size_t>(std::popcount(m))])
            c_[m] = 0.0;
}

PolyForm& PolyForm::operator+=(const PolyForm& o) {
    check_same_dim(*this, o);
    for (std::uint32_t m = 0; m < size(); ++m)
        c_[m] += o.c_[m];
    return *this;
}

PolyForm& PolyForm::operator-=(const PolyForm& o) {
    check_same_dim(*this, o);
    for (std::uint32_t m = 0; m < size(); ++m)
        c_[m] -= o.c_[m];
    return *this;
}

PolyForm& PolyForm::operator*=(cplx s) {
    for (std::uint32_t m = 0; m < size(); ++m)
        c_[m] *= s;
    return *this;
}

PolyForm PolyForm::operator-() const {
    PolyForm out = *this;
    out *= -1.0;
    return out;
}

int merge_sign(std::uint32_t a, std::uint32_t b) { return sign_table()[a][b]; }

PolyForm wedge(const PolyForm& a, const PolyForm& b) {
    check_same_dim(a, b);
    const auto& signs = sign_table();
    const std::uint32_t n = a.size();

    // Each output element sums over splits {s, m \ s}; both orders of a split
    // are combined before accumulation so that wedge(a, b) and wedge(b, a)
    // round identically.
    PolyForm out(a.dim());
    for (std::uint32_t m = 0; m < n; ++m) {
        cplx acc{};
        for (std::uint32_t s = m;; s = (s - 1) & m) {
            const std::uint32_t c = m ^ s;
            if (s <= c) {
                cplx pair{};
                if (a[s] != cplx{} && b[c] != cplx{})
                    pair += static_cast<double>(signs[s][c]) * (a[s] * b[c]);
                if (s != c && a[c] != cplx{} && b[s] != cplx{})
                    pair += static_cast<double>(signs[c][s]) * (a[c] * b[s]);
                acc += pair;
            }
            if (s == 0)
                break;
        }
        out[m] = acc;
    }
    out.prune();
    return out;
}

PolyForm exp_even(const PolyForm& f) {
    if (f.has_odd_part())
        throw DimensionError("exp_even: input has odd-degree components");
    const cplx f0 = f[0];
    PolyForm nil = f;
    nil[0] = 0.0;

    PolyForm result = PolyForm::scalar(f.dim(), 1.0);
    PolyForm term = result;
    for (int k = 1; 2 * k <= f.dim(); ++k) {
        term = wedge(term, nil) * (1.0 / k);
        if (term.is_zero())
            break;
        result += term;
    }
    if (f0 != cplx{})
        result *= std::exp(f0);
    return result;
}

cplx top_component(const PolyForm& f) { return f[f.top_mask()]; }

PolyForm change_basis(const PolyForm& f, const CMat& old_in_new) {
    const int dim = f.dim();
    if (old_in_new.rows() != dim || old_in_new.cols() != dim)
        throw DimensionError("change_basis: matrix size does not match form dimension");

    std::array<PolyForm, kMaxRealDim> images;
    for (int m = 0; m < dim; ++m) {
        images[m] = PolyForm(dim);
        for (int a = 0; a < dim; ++a)
            images[m][1u << a] = old_in_new(m, a);
    }
    // image of each basis element, built from its lowest index upward
    std::array<PolyForm, PolyForm::kCapacity> elem;
    elem[0] = PolyForm::scalar(dim, 1.0);
    PolyForm out(dim);
    out[0] = f[0];
    for (std::uint32_t mask = 1; mask < f.size(); ++mask) {
        const int low = std::countr_zero(mask);
        elem[mask] = wedge(images[low], elem[mask & (mask - 1)]);
        if (f[mask] != cplx{})
            out += elem[mask] * f[mask];
    }
    out.prune();
    return out;
}

namespace {

CMat real_in_complex(int dim) {
    // dx = (dz + dzb) / 2, dy = (dz - dzb) / (2i)
    CMat m = CMat::Zero(dim, dim);
    for (int j = 0; 2 * j < dim; ++j) {
        m(2 * j, 2 * j) = 0.5;
        m(2 * j, 2 * j + 1) = 0.5;
        m(2 * j + 1, 2 * j) = -0.5 * kI;
        m(2 * j + 1, 2 * j + 1) = 0.5 * kI;
    }
    return m;
}

CMat complex_in_real(int dim) {
    CMat m = CMat::Zero(dim, dim);
    for (int j = 0; 2 * j < dim; ++j) {
        m(2 * j, 2 * j) = 1.0;
        m(2 * j, 2 * j + 1) = kI;
        m(2 * j + 1, 2 * j) = 1.0;
        m(2 * j + 1, 2 * j + 1) = -kI;
    }
    return m;
}

} // namespace

PolyForm to_complex_basis(const PolyForm& real_form) {
    return change_basis(real_form, real_in_complex(real_form.dim()));
}

PolyForm to_real_basis(const PolyForm& complex_form) {
    return change_basis(complex_form, complex_in_real(complex_form.dim()));
}

PolyForm bidegree_part(const PolyForm& complex_form, int p, int q) {
    std::uint32_t holo = 0;
    for (int b = 0; b < complex_form.dim(); b += 2)
        holo |= 1u << b;
    PolyForm out(complex_form.dim());
    for (std::uint32_t m = 0; m < complex_form.size(); ++m)
        if (std::popcount(m & holo) == p && std::popcount(m & ~holo) == q)
            out[m] = complex_form[m];
    return out;
}

MatrixPolyForm::MatrixPolyForm(int size, int dim)
    : size_(size), dim_(dim), e_(static_cast<std::size_t>(size * size), PolyForm(dim)) {}

CMat MatrixPolyForm::degree0() const {
    CMat m(size_, size_);
    for (int a = 0; a < size_; ++a)
        for (int b = 0; b < size_; ++b)
            m(a, b) = (*this)(a, b)[0];
    return m;
}

bool MatrixPolyForm::all_even(double rel_tol) const {
    return std::none_of(e_.begin(), e_.end(),
                        [&](const PolyForm& f) { return f.has_odd_part(rel_tol); });
}

double MatrixPolyForm::max_abs() const {
    double v = 0.0;
    for (const auto& f : e_)
        v = std::max(v, f.max_abs());
    return v;
}

MatrixPolyForm& MatrixPolyForm::operator*=(cplx s) {
    for (auto& f : e_)
        f *= s;
    return *this;
}

namespace {
void check_square_pair(const MatrixPolyForm& a, const MatrixPolyForm& b) {
    if (a.size() != b.size() || a.dim() != b.dim())
        throw DimensionError("matrix form size mismatch");
}
} // namespace

MatrixPolyForm operator*(const MatrixPolyForm& a, const MatrixPolyForm& b) {
    check_square_pair(a, b);
    const int k = a.size();
    MatrixPolyForm out(k, a.dim());
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            for (int c = 0; c < k; ++c)
                out(i, j) += wedge(a(i, c), b(c, j));
    return out;
}

MatrixPolyForm operator+(const MatrixPolyForm& a, const MatrixPolyForm& b) {
    check_square_pair(a, b);
    MatrixPolyForm out = a;
    for (int i = 0; i < a.size(); ++i)
        for (int j = 0; j < a.size(); ++j)
            out(i, j) += b(i, j);
    return out;
}

MatrixPolyForm operator-(const MatrixPolyForm& a, const MatrixPolyForm& b) {
    check_square_pair(a, b);
    MatrixPolyForm out = a;
    for (int i = 0; i < a.size(); ++i)
        for (int j = 0; j < a.size(); ++j)
            out(i, j) -= b(i, j);
    return out;
}

PolyForm trace(const MatrixPolyForm& m) {
    PolyForm out(m.dim());
    for (int i = 0; i < m.size(); ++i)
        out += m(i, i);
    return out;
}

PolyForm trace_of_product(const MatrixPolyForm& a, const MatrixPolyForm& b) {
    check_square_pair(a, b);
    PolyForm out(a.dim());
    for (int i = 0; i < a.size(); ++i)
        for (int c = 0; c < a.size(); ++c)
            out += wedge(a(i, c), b(c, i));
    return out;
}

ScalarSeries::ScalarSeries(std::vector<cplx> coeffs) : c_(std::move(coeffs)) {}

ScalarSeries series_mul(const ScalarSeries& a, const ScalarSeries& b) {
    const int k = std::min(a.order(), b.order());
    std::vector<cplx> c(static_cast<std::size_t>(k + 1));
    for (int i = 0; i <= k; ++i)
        for (int j = 0; i + j <= k; ++j)
            c[i + j] += a[i] * b[j];
    return ScalarSeries(std::move(c));
}

ScalarSeries series_reciprocal(const ScalarSeries& a) {
    if (a.order() < 0 || a[0] == cplx{})
        throw Error("series_reciprocal: constant term is zero");
    const int k = a.order();
    std::vector<cplx> r(static_cast<std::size_t>(k + 1));
    r[0] = 1.0 / a[0];
    for (int m = 1; m <= k; ++m) {
        cplx s{};
        for (int j = 1; j <= m; ++j)
            s += a[j] * r[m - j];
        r[m] = -s / a[0];
    }
    return ScalarSeries(std::move(r));
}

ScalarSeries series_log(const ScalarSeries& a) {
    if (a.order() < 0 || std::abs(a[0] - 1.0) > 1e-15)
        throw Error("series_log: constant term must be 1");
    // (log a)' = a' / a
    const int k = a.order();
    const ScalarSeries inv = series_reciprocal(a);
    std::vector<cplx> l(static_cast<std::size_t>(k + 1));
    for (int m = 1; m <= k; ++m) {
        // coefficient of x^(m-1) in a' * inv
        cplx s{};
        for (int j = 1; j <= m; ++j)
            s += static_cast<double>(j) * a[j] * inv[m - j];
        l[m] = s / static_cast<double>(m);
    }
    return ScalarSeries(std::move(l));
}

ScalarSeries series_exp(const ScalarSeries& a) {
    if (a.order() < 0 || a[0] != cplx{})
        throw Error("series_exp: constant term must be 0");
    // e' = a' e
    const int k = a.order();
    std::vector<cplx> e(static_cast<std::size_t>(k + 1));
    e[0] = 1.0;
    for (int m = 1; m <= k; ++m) {
        cplx s{};
        for (int j = 1; j <= m; ++j)
            s += static_cast<double>(j) * a[j] * e[m - j];
        e[m] = s / static_cast<double>(m);
    }
    return ScalarSeries(std::move(e));
}

ScalarSeries ScalarSeries::todd(int order) {
    // (1 - e^{-x}) / x = sum_k (-1)^k x^k / (k+1)!
    std::vector<cplx> c(static_cast<std::size_t>(order + 1));
    double fact = 1.0;
    for (int k = 0; k <= order; ++k) {
        fact *= (k + 1);
        c[k] = ((k % 2) ? -1.0 : 1.0) / fact;
    }
    return series_reciprocal(ScalarSeries(std::move(c)));
}

ScalarSeries ScalarSeries::sinc(int order) {
    std::vector<cplx> c(static_cast<std::size_t>(order + 1));
    double fact = 1.0; // (2k+1)!
    for (int k = 0; 2 * k <= order; ++k) {
        if (k > 0)
            fact *= (2 * k) * (2 * k + 1);
        c[2 * k] = ((k % 2) ? -1.0 : 1.0) / fact;
    }
    return ScalarSeries(std::move(c));
}

PolyForm trace_log(const MatrixPolyForm& m, const ScalarSeries& s) {
    const int dim = m.dim();
    const int kmax = dim / 2;
    if (s.order() < kmax)
        throw Error("trace_log: series of order " + std::to_string(s.order()) +
                    " is too short for form dimension " + std::to_string(dim));
    if (!m.all_even())
        throw DimensionError("trace_log: matrix entries must have even degree");
    const CMat m0 = m.degree0();
    const double scale = std::max(1.0, m.max_abs());
    if (m0.size() > 0 && m0.cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw Error("trace_log: degree-0 part of the matrix is nonzero");

    std::vector<cplx> trimmed(s.coeffs().begin(), s.coeffs().begin() + kmax + 1);
    const ScalarSeries logs = series_log(ScalarSeries(std::move(trimmed)));

    PolyForm out(dim);
    if (kmax == 0)
        return out;
    out += trace(m) * logs[1];
    MatrixPolyForm power = m;
    for (int k = 2; k <= kmax; ++k) {
        if (logs[k] != cplx{})
            out += trace_of_product(power, m) * logs[k];
        if (k < kmax)
            power = power * m;
    }
    out.prune();
    return out;
}

PolyForm trlog_apply(const MatrixPolyForm& m, const ScalarSeries& s) {
    return exp_even(trace_log(m, s));
}

} // namespace dolbeault
