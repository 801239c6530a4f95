#pragma once

#include "pwlsf/types.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>

namespace pwlsf {

using ParamMap = std::map<std::string, double>;

// Two-piece continuous piecewise-linear system in observer-style coordinates:
//   z' = P_L z + c mu_tilde   (z1 <= 0)
//   z' = P_R z + c mu_tilde   (z1 >= 0)
// Continuity across z1 = 0 forces P_L and P_R to differ in their first
// columns only; check_continuity verifies that.
struct GeneralPwlSystem {
  Index n = 0;
  Matrix P_L, P_R;
  Vector c;
  double mu_tilde = 0.0;
};

struct ContinuityReport {
  bool pass = false;
  double max_violation = 0.0;  // largest |P_L - P_R| entry outside column one
  Index row = -1, col = -1;    // location of the worst violation
};

ContinuityReport check_continuity(const GeneralPwlSystem& sys, double tol = 1e-12);

// Explicit two-timescale form: the first k rows evolve at rate one, the
// remaining n-k rows at rate epsilon:
//   z' = [U_X; epsilon V_X] z + [q; epsilon r] mu_tilde.
struct SlowFastPwlSystem {
  Index n = 0, k = 0;
  Matrix U_L, U_R;  // k x n
  Matrix V_L, V_R;  // (n-k) x n
  Vector q;         // k
  Vector r;         // n-k
  double epsilon = 0.0;
  double mu_tilde = 0.0;
};

GeneralPwlSystem assemble_general(const SlowFastPwlSystem& sys);

// Slow-fast observer canonical form, stored through its first-column
// coefficient vectors. a_* have length k, b_* length n-k, and both are the
// values at the stored epsilon. When an epsilon->0 rule produced the system
// (eigenvalue placement does), the limiting coefficients travel along in
// `limit0`; layer/reduced extraction falls back to the stored vectors with a
// warning flag otherwise.
struct SfocfLimits {
  Vector a_L, a_R, b_L, b_R;
};

struct SfocfSystem {
  Index n = 0, k = 0;
  Vector a_L, a_R;
  Vector b_L, b_R;
  double epsilon = 0.0;
  double mu = 0.0;
  std::optional<SfocfLimits> limit0;
};

// System matrix of the requested piece: first column
// (-a_1..-a_k, -eps b_1..-eps b_{n-k}); ones on the superdiagonal through
// row k; eps on the superdiagonal below that.
Matrix assemble_sfocf_matrix(const SfocfSystem& sys, Side side);

// Forcing vector eps * e_n * mu.
Vector sfocf_forcing(const SfocfSystem& sys);

// Two-piece piecewise-smooth system z' = f_left/right(z; params), switching
// on the sign of h(z). grad_h, when supplied, must be the (constant)
// gradient of h; it enables the coordinate straightening used to build PWL
// approximations. unfolding_param names the map entry whose variation
// unfolds the boundary equilibrium.
struct PiecewiseSmoothSystem {
  Index n = 0;
  ParamMap params;
  std::string unfolding_param;
  std::function<Vector(const Vector&, const ParamMap&)> f_left, f_right;
  std::function<double(const Vector&)> h;
  Vector grad_h;
};

// One-sided Jacobians and the unfolding direction at a boundary equilibrium.
struct BebLinearization {
  Matrix jac_left, jac_right;
  Vector beb_point;
  Vector forcing_direction;  // d f / d(unfolding parameter)
};

// Central finite differences at `point`, which must lie on h = 0 with both
// fields vanishing there (checked). step <= 0 selects
// max(1e-6, 1e-6 * ||point||).
BebLinearization linearize_at_beb(const PiecewiseSmoothSystem& sys,
                                  const Vector& point, double step = 0.0);

// PWL system in coordinates straightening the switching manifold to
// z1 = 0. The first coordinate becomes grad_h . z; the fast coordinate it
// replaces is the one with the largest |grad_h| component among the first
// k_fast (keeps the change of variables invertible and well conditioned).
// The one-sided Jacobians must differ by a rank-one update along grad_h,
// i.e. agree outside the first column after straightening, up to snap_tol;
// the agreeing columns are then averaged so downstream exact-continuity
// hypotheses hold.
GeneralPwlSystem pwl_from_linearization(const BebLinearization& lin,
                                        const Vector& grad_h, Index k_fast,
                                        double snap_tol = 1e-8);

// Same, split into the explicit two-timescale form for a given epsilon: the
// bottom n-k rows of the straightened Jacobians are divided by epsilon.
SlowFastPwlSystem slow_fast_from_linearization(const BebLinearization& lin,
                                               const Vector& grad_h, Index k_fast,
                                               double epsilon,
                                               double snap_tol = 1e-8);

}  // namespace pwlsf
