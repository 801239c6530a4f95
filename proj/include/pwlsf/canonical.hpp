#pragma once

#include "pwlsf/linalg.hpp"
#include "pwlsf/systems.hpp"

namespace pwlsf {

// Change of variables z = Q ztilde + d mu_tilde, mu = s mu_tilde taking a
// continuous two-piece PWL system to observer canonical form. Q = Psi * Phi,
// where Phi stacks the rows e1^T P_L^i (i = 0..n-1) and Psi is the unit
// lower-triangular Toeplitz matrix of the left piece's characteristic
// coefficients; d is Q c shifted down one slot and s its last entry.
struct OcfTransform {
  Matrix Psi, Phi, Q;
  Vector d;
  double s = 0.0;
  Vector p_L, p_R;  // characteristic coefficients of the two pieces
  double rcond_Phi = 0.0;
  double cond_Q = 0.0;
};

// Throws HypothesisError when the construction does not apply: Phi
// numerically singular (rcond < 1e-10) or forcing gain s below
// 1e-10 * ||Q|| * ||c||.
OcfTransform build_ocf_transform(const GeneralPwlSystem& sys);

// z' = (J - p_X e1^T) z + e_n mu, switching on z1 (which equals the original
// first coordinate).
struct OcfSystem {
  Index n = 0;
  Vector p_L, p_R;
  double mu = 0.0;
};

// Applies the transform and verifies its defining identities: each
// Q P_X Q^{-1} matches the companion matrix of p_X and the mapped forcing
// equals e_n, both to 1e-8 * max(1, cond(Q)) entrywise. Throws
// NumericalError when a residual exceeds that bound.
OcfSystem to_ocf(const GeneralPwlSystem& sys, const OcfTransform& t);

// diag(1,...,1, 1, eps, ..., eps^{n-k-1}): identity on the k fast slots,
// geometric epsilon scaling on the slow ones.
Matrix scaling_matrix(Index n, Index k, double epsilon);

struct SfocfConversion {
  SfocfSystem system;
  OcfTransform transform;
  // largest deviation of E^{-1} Q P_X Q^{-1} E from the expected sparsity
  // pattern outside the first column
  double sparsity_residual = 0.0;
};

// Two-timescale canonical form: coefficients are read off the first columns
// of E^{-1} Q P_X Q^{-1} E and the remaining entries are checked against the
// fixed pattern (unit/epsilon superdiagonals, zeros elsewhere). The forcing
// scale becomes mu = s / eps^{n-k} * mu_tilde.
SfocfConversion to_sfocf(const SlowFastPwlSystem& sys);

struct TransformIdentityReport {
  double res_shift_intertwine = 0.0;   // J Q - Q P_L - p_L e1^T
  double res_cayley_hamilton = 0.0;    // characteristic polynomial of P_L at P_L
  double res_first_row_inverse = 0.0;  // e1^T Q^{-1} - e1^T
  double res_forcing_left = 0.0;       // (1/s)(Q c - Q P_L Q^{-1} d) - e_n
  double res_forcing_right = 0.0;
  double cond_Q = 0.0;
  double rcond_Phi = 0.0;
  double tol = 0.0;       // 1e-8 * max(1, cond(Q)), applied entrywise
  double ch_scale = 0.0;  // (1 + ||P_L||)^n growth allowance for the polynomial residual
  bool pass = false;
  bool ill_conditioned = false;  // rcond(Phi) < 1e-6: residuals may be dominated by conditioning
};

TransformIdentityReport verify_transform_identities(const GeneralPwlSystem& sys,
                                                    const OcfTransform& t);

}  // namespace pwlsf
