#pragma once

#include "pwlsf/types.hpp"

#include <vector>

namespace pwlsf {

// m x m nilpotent upshift: ones on the superdiagonal, zeros elsewhere.
// The 1 x 1 case is the zero matrix.
template <typename Scalar = double>
DenseMatrix<Scalar> shift_matrix(Index m) {
  if (m < 1) throw std::invalid_argument("shift_matrix: size must be positive");
  DenseMatrix<Scalar> J = DenseMatrix<Scalar>::Zero(m, m);
  for (Index i = 0; i + 1 < m; ++i) J(i, i + 1) = Scalar(1);
  return J;
}

// Companion matrix of l^m + p(0) l^{m-1} + ... + p(m-1): the upshift with -p
// written into the first column. Its characteristic polynomial is the input.
template <typename Scalar = double>
DenseMatrix<Scalar> companion_from_coeffs(const DenseVector<Scalar>& p) {
  DenseMatrix<Scalar> C = shift_matrix<Scalar>(p.size());
  C.col(0) -= p;
  return C;
}

// Eigenvalues sorted by real part descending, then imaginary part ascending.
// pair_tol is the relative tolerance under which complex values are treated
// as conjugate pairs by downstream consumers.
struct Spectrum {
  ComplexVector values;
  double pair_tol = 1e-9;
};

// Eigenvalues of a real square matrix. The matrix is balanced (diagonal
// radix-2 similarity) before the QR iteration, so badly row/column-scaled
// inputs (small-epsilon slow blocks) are handled accurately.
Spectrum eigenvalues(const Eigen::Ref<const Matrix>& M);

struct EigenPairs {
  ComplexVector values;
  ComplexMatrix vectors;  // columns, unit norm, same order as values
  double max_residual;    // max_i ||M v_i - lambda_i v_i||
};

// Eigenvalues with eigenvectors; residuals are verified and reported.
EigenPairs eigen_pairs(const Eigen::Ref<const Matrix>& M);

// Coefficients (p1..pm) of det(lI - M) = l^m + p1 l^{m-1} + ... + pm,
// computed by expanding the eigenvalues of the balanced matrix rather than
// by a resolvent recursion; this keeps coefficient errors near rounding
// level for the moderate orders this library targets.
Vector charpoly_coeffs(const Eigen::Ref<const Matrix>& M);

// Real monic polynomial (coefficients after the leading 1) whose roots are
// the given conjugate-closed multiset. Real factors and matched conjugate
// quadratics are multiplied in real arithmetic. Throws std::invalid_argument
// when a genuinely complex root lacks a conjugate partner within rel_tol
// (relative to max(1, |root|)).
Vector poly_from_roots(const Eigen::Ref<const ComplexVector>& roots,
                       double rel_tol = 1e-9);

// Diagonal radix-2 similarity scaling equalizing row/column norms
// (eigenvalue-preserving).
Matrix balanced(Matrix M);

// Reciprocal condition number sigma_min/sigma_max in the spectral norm;
// 0 for a singular matrix.
double rcond(const Eigen::Ref<const Matrix>& M);

// Spectral-norm condition number; +inf for a singular matrix.
double cond(const Eigen::Ref<const Matrix>& M);

// Minimum-total-distance assignment of `from` onto `to` (equal sizes,
// exhaustive over permutations; sizes up to 9). Returns, per entry of
// `from`, the index of its partner in `to`.
std::vector<Index> optimal_assignment(const ComplexVector& from, const ComplexVector& to);

// Least-squares line through (x_i, y_i); used for convergence-order fits.
struct LineFit {
  double slope = 0.0, intercept = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Largest pairwise distance under the optimal assignment; a convenient
// "how far apart are these two spectra" measure.
double matched_max_distance(const ComplexVector& a, const ComplexVector& b);

}  // namespace pwlsf
