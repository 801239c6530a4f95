#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>

namespace pwlsf {

// Dense dynamic-size aliases, templated on scalar. double is the working
// precision everywhere; the templates exist so callers can instantiate the
// structural constructors (shift/companion matrices) at other scalars.
template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;
using Matrix = DenseMatrix<double>;
using Vector = DenseVector<double>;
using Complex = std::complex<double>;
using ComplexMatrix = DenseMatrix<Complex>;
using ComplexVector = DenseVector<Complex>;

// The two pieces of a two-piece system, named by the side of the switching
// manifold on which each applies.
enum class Side { Left, Right };

inline const char* side_name(Side s) { return s == Side::Left ? "left" : "right"; }

// A construction hypothesis does not hold for the given input (singular
// observability matrix, vanishing forcing gain, non-Hurwitz piece,
// insufficient spectral gap). The CLI maps this to exit code 2.
struct HypothesisError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical breakdown: eigensolver non-convergence, step-size underflow,
// singular solve where a regular one was required. CLI exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed configuration input. CLI exit code 4.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pwlsf
