#pragma once

#include "pwlsf/canonical.hpp"
#include "pwlsf/integrate.hpp"
#include "pwlsf/systems.hpp"
#include "pwlsf/util.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pwlsf {

// Fast dynamics at epsilon = 0: x' = A_X x + e_k y1 with x1 switching and
// y1 frozen as a parameter.
struct LayerSystem {
  Index k = 0;
  Matrix A_L, A_R;    // J_k minus first-column coefficients, companion form
  Vector a_L0, a_R0;  // the coefficient vectors the matrices were built from
  // false means no epsilon -> 0 rule was stored and the finite-epsilon
  // coefficients were used as a stand-in
  bool used_stored_limits = false;
};

LayerSystem layer_system(const SfocfSystem& sys);

// Layer equilibria as a function of the slow variable y1: one ray per
// piece, x = branch_X * y1.
struct CriticalManifold {
  Index k = 0;
  Vector branch_L, branch_R;
  double det_L = 0.0, det_R = 0.0;  // a_k(0) per piece, the branch scale
  // both layer matrices Hurwitz; when true det_L, det_R must be positive
  bool hurwitz = false;

  // x on the admissible branch: left ray for y1 <= 0, right for y1 >= 0.
  Vector at(double y1) const {
    return (y1 >= 0.0 ? branch_R : branch_L) * y1;
  }
};

CriticalManifold critical_manifold(const LayerSystem& layer);

// Slow drift along the critical manifold: y' = B_X y + e_m mu, switching
// on the sign of y1.
struct ReducedSystem {
  Index m = 0;
  Matrix B_L, B_R;  // companion form, differ only in the first column
  double mu = 0.0;
};

ReducedSystem reduced_system(const SfocfSystem& sys);

// Coefficients realizing a prescribed spectrum: fast eigenvalues directly,
// slow ones scaled by epsilon. Both root sets must be conjugate-closed.
struct PlacedCoeffs {
  Vector a, b;    // finite-epsilon coefficients
  Vector a0, b0;  // their epsilon -> 0 limits
};

PlacedCoeffs place_eigenvalues(const std::vector<Complex>& fast,
                               const std::vector<Complex>& slow,
                               double epsilon);

// Two-sided wrapper producing a ready-to-run system with stored limits.
SfocfSystem place_system(Index k, const std::vector<Complex>& fast_L,
                         const std::vector<Complex>& slow_L,
                         const std::vector<Complex>& fast_R,
                         const std::vector<Complex>& slow_R, double epsilon,
                         double mu);

// How well the spectrum of the assembled matrix splits into the layer
// eigenvalues and epsilon times the reduced ones as epsilon shrinks, the
// coefficients held at their limits. Fitted log-log slopes should approach
// 1 (fast group) and 2 (slow group).
struct FactorizationCheck {
  std::vector<double> epsilons;
  std::vector<double> fast_errors, slow_errors;  // max over group and side
  double fast_slope = 0.0, slow_slope = 0.0;
  bool pairing_ambiguous = false;  // group error comparable to group gap
  bool pass = false;
};

FactorizationCheck eigen_factorization_check(
    const SfocfSystem& sys, const std::vector<double>& eps_grid,
    double slope_tol = 0.3);

// Planar linear type by trace and determinant.
struct PieceClass {
  std::string kind;  // "saddle", "node", "focus", "center", "degenerate"
  bool attracting = false;
  bool borderline = false;  // within tolerance of a type boundary
  double trace = 0.0, det = 0.0, discriminant = 0.0;
};

PieceClass classify_piece_2d(const Matrix& B, double tol = 1e-9);

struct Classification2d {
  PieceClass left, right;
  std::string prediction;
};

Classification2d classify_2d(const ReducedSystem& red, double tol = 1e-9);

// Orthonormal bases of the invariant subspaces belonging to the n-k
// smallest-magnitude eigenvalues of each piece matrix, anchored at the
// piece equilibria.
struct SlowManifoldPair {
  Matrix basis_L, basis_R;    // n x (n-k), orthonormal columns
  Vector anchor_L, anchor_R;  // piece equilibria (zero if singular piece)
  double residual_L = 0.0, residual_R = 0.0;
  double gap_L = 0.0, gap_R = 0.0;  // min |fast| / max |slow| per piece
};

SlowManifoldPair slow_manifolds(const SfocfSystem& sys, double min_gap = 5.0);

// Split the two piece spectra of a linearized boundary equilibrium into k
// fast eigenvalues and (n-k) slow ones divided by epsilon, and rebuild the
// reduced matrices the slow groups imply.
struct BebReduction {
  std::vector<Complex> fast_L, fast_R;
  std::vector<Complex> slow_L, slow_R;  // already divided by epsilon
  Matrix B_L, B_R;
};

BebReduction beb_reduction(const BebLinearization& lin, Index k,
                           double epsilon);

struct StabilityProbeConfig {
  std::vector<double> radii = {0.1, 1.0, 10.0, 100.0};
  int points_per_sphere = 200;
  double divergence = 1e6;
  uint64_t seed = 0;
};

// Empirical contraction estimate for the layer flow: orbits launched from
// spheres around H(y1) for y1 in {-1, 0, +1}, their distance to H(y1)
// fitted to an exponential envelope alpha * exp(-beta t).
struct StabilityReport {
  std::string verdict;  // "stable-evidence", "unstable-witness",
                        // "inconclusive"
  std::string reason;
  double alpha_hat = 1.0;  // >= 1 when stable-evidence
  double beta_hat = 0.0;   // > 0 when stable-evidence
  std::optional<Vector> witness;  // escaping start, with its y1 appended
  long long samples = 0;
};

StabilityReport stability_probe(const LayerSystem& layer,
                                const StabilityProbeConfig& cfg = {});

// The layer flow is positively homogeneous jointly in (x, y1). Verifies
// the two scaling identities on random draws against a bound of ten times
// the integration tolerance at the orbit's scale.
struct HomogeneityCheck {
  double worst_zero_input = 0.0;  // xi phi_t(x;0) vs phi_t(xi x;0), ratio
  double worst_slow_scaling = 0.0;  // phi_t(x;y1) vs y1 phi_t(x/y1;1)
  int draws = 0;
  bool pass = false;  // both worst ratios <= 1
};

HomogeneityCheck homogeneity_check(const LayerSystem& layer,
                                   uint64_t seed = 0, int draws = 100);

}  // namespace pwlsf
