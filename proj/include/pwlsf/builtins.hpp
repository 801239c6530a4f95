#pragma once

#include "pwlsf/integrate.hpp"
#include "pwlsf/systems.hpp"

namespace pwlsf {
namespace builtin {

// Five-variable oscillation example with three fast and two slow variables.
// Both fast triples are Hurwitz; the right slow pair is repelling, which
// combined with a left-admissible-only virtual equilibrium produces a
// bounded relaxation oscillation at moderate epsilon and divergence when
// epsilon shrinks past the canard regime.
SfocfSystem canard5d(double epsilon = 0.05, double mu = 1.0);

// A starting point on the right critical-manifold branch near the repelling
// reduced focus, with slow coordinates (0.7, -0.4).
Vector canard5d_start(const SfocfSystem& sys);

// Three-variable thermohaline circulation box model. State (x, y, m):
// fast temperature-like variable x, slow salinity-like y, slow forcing m.
//   x' = (1 - x) - eps A x |x - y|
//   y' = eps (m - y - A y |x - y|)
//   m' = eps delta (lambda0 + a x - b y)
// switching on x - y; boundary equilibrium at (1, 1, 1) when lambda0 = 0.
struct OceanParams {
  double a = 1.0;
  double b = 1.0;
  double delta = 0.01;
  double epsilon = 0.01;
  double A = 1.1;
  double lambda0 = -0.001;
};

PiecewiseSmoothSystem ocean_system(const OceanParams& params = {});

// Same fields without map lookups in the inner loop, for long sweeps.
OdeSystem ocean_ode(const OceanParams& params = {});

Vector ocean_beb_point();

// Slow-fast form carrying the closed-form limiting coefficients
// a(0) = (1), b_L(0) = (1 + A, b delta), b_R(0) = (1 - A, b delta).
SfocfSystem ocean_reduced_family(const OceanParams& params = {});

// Piece equilibrium of the full model in closed form (requires a = b):
// on the left piece x = 1 / (1 + eps A lambda0), admissible iff lambda0 >= 0;
// on the right x = 1 / (1 - eps A lambda0), admissible iff lambda0 <= 0.
struct OceanEquilibrium {
  Vector state;      // (x, y, m)
  bool admissible = false;
};

OceanEquilibrium ocean_equilibrium(const OceanParams& params, Side side);

}  // namespace builtin
}  // namespace pwlsf
