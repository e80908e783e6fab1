#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dolbeault {

using cplx = std::complex<double>;

/// Largest supported complex dimension. Forms are stored densely over
/// 2^(2n) basis elements, so n = 3 (64 coefficients) is the ceiling.
inline constexpr int kMaxComplexDim = 3;
inline constexpr int kMaxRealDim = 2 * kMaxComplexDim;

/// Real chart coordinates ordered (Re z1, Im z1, ..., Re zn, Im zn).
using Point = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxRealDim, 1>;
using RMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxRealDim, kMaxRealDim>;
using CMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxRealDim, kMaxRealDim>;
using CVec = Eigen::Matrix<cplx, Eigen::Dynamic, 1, 0, kMaxRealDim, 1>;

inline constexpr double kPi = 3.14159265358979323846;
inline const cplx kI{0.0, 1.0};

inline cplx z_coord(const Point& p, int j) { return {p[2 * j], p[2 * j + 1]}; }

std::string format_point(const Point& p);

/// Base for all library errors; carries a message that already names the
/// offending point or token when one exists.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
  public:
    using Error::Error;
};

/// A finite-difference stencil or sample left the chart domain.
class DomainError : public Error {
  public:
    using Error::Error;
};

/// h(p) failed to be Hermitian positive-definite.
class MetricError : public Error {
  public:
    using Error::Error;
};

/// A formula was evaluated outside its validity domain.
class PreconditionError : public Error {
  public:
    using Error::Error;
};

class IntegrationError : public Error {
  public:
    using Error::Error;
};

} // namespace dolbeault
