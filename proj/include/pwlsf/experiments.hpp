#pragma once

#include "pwlsf/builtins.hpp"
#include "pwlsf/integrate.hpp"
#include "pwlsf/slow_fast.hpp"

#include <functional>
#include <string>
#include <vector>

namespace pwlsf {

// The reduced slow flow as an integrable two-piece system (switches on y1).
OdeSystem reduced_ode(const ReducedSystem& red);

// Extrema of one state component after the transient. The retained window
// [window_start, window_end) is split at window_mid; converged means the
// two halves agree to 1e-6 + 1e-2 * amplitude in both extrema.
struct CycleBounds {
  double min = 0.0, max = 0.0;
  bool converged = false;
  bool diverged = false;
  double window_start = 0.0, window_mid = 0.0, window_end = 0.0;
};

CycleBounds limit_cycle_bounds(const OdeSystem& sys, const Vector& z0,
                               Index observable, const IntegratorConfig& cfg);

// One-parameter family of two-piece systems plus the equilibrium hook a
// bifurcation sweep needs. admissible_equilibria returns every equilibrium
// lying on its own piece's side of the switching manifold (weak
// inequality); boundary equilibria are reported once.
struct SystemFamily {
  std::string parameter;
  std::function<OdeSystem(double)> make;
  std::function<std::vector<Vector>(double)> admissible_equilibria;
};

// Family varying "epsilon" or "mu" with the coefficient vectors held fixed.
// Equilibria come from per-piece linear solves of the assembled matrices.
SystemFamily sfocf_family(const SfocfSystem& base, const std::string& parameter);

// Family varying one named circulation-model parameter; equilibria are the
// closed-form per-piece stationary points.
SystemFamily ocean_family(const builtin::OceanParams& base,
                          const std::string& parameter);

struct SweepPoint {
  double parameter = 0.0;
  bool has_equilibrium = false;
  Vector equilibrium;              // first admissible equilibrium
  double equilibrium_value = 0.0;  // observable component at it
  int admissible_count = 0;
  CycleBounds cycle;  // from a perturbed start at the equilibrium
  bool failed = false;
  std::string error;
};

struct SweepResult {
  std::string parameter;
  Index observable = 0;
  std::vector<SweepPoint> points;
};

// Equilibrium branch and limit-cycle bounds of the observable over the
// grid. Per-point failures are recorded and the sweep continues. Points
// run as a parallel map; the result order follows the grid.
SweepResult sweep(const SystemFamily& family, const std::vector<double>& grid,
                  Index observable, const IntegratorConfig& cfg,
                  double perturbation = 1e-3);

// Compact region in the slow variables: the image of the unit box or unit
// ball under diag(extents), an optional further linear transform, and a
// shift to center. transform of size zero means identity. A transformed
// ball is the Lyapunov ellipsoid needed by companion-form reduced systems,
// whose second field component is independent of y2 and therefore exits
// every axis-aligned box and round ball somewhere on the y2 extremes.
struct TrappingRegion {
  enum class Shape { Box, Ball };
  Shape shape = Shape::Box;
  Vector center;
  Vector extents;
  Matrix transform;
  int boundary_samples = 10000;
};

// center + (transform or I) * diag(extents) * unit shape.
Matrix region_shape_matrix(const TrappingRegion& region);
bool region_contains(const TrappingRegion& region, const Vector& y,
                     double slack = 1e-9);

struct TrappingReport {
  bool pass = false;
  // largest inner product <dy/dtau, outward unit normal> over the sampled
  // boundary; trapping requires it below -margin everywhere
  double worst_inner = 0.0;
  Vector worst_point;
  int samples = 0;
};

TrappingReport check_strong_trapping(const ReducedSystem& red,
                                     const TrappingRegion& region,
                                     double margin = 0.0);

struct InvarianceConfig {
  std::vector<double> epsilons;
  double M = 1.0;  // start tube radius, in units of epsilon
  double N = 2.0;  // containment tube radius, in units of epsilon
  int samples = 100;
  std::uint64_t seed = 0;
  double horizon_slow_units = 10.0;  // fast-time horizon = this / epsilon
  bool override_hypotheses = false;
  StabilityProbeConfig probe;  // layer stability gate
  IntegratorConfig integrator;
};

struct InvarianceEpsReport {
  double epsilon = 0.0;
  int violations = 0;
  // max over orbits of sup_t ||x - H(y1)|| / epsilon: the empirically
  // smallest containment radius that would have sufficed
  double min_admissible_N = 0.0;
  std::vector<Vector> exit_states;  // first few violating states
};

struct InvarianceReport {
  std::string hypothesis_note;
  std::vector<InvarianceEpsReport> per_eps;
  bool pass = false;  // zero violations at every epsilon
};

// Forward-invariance experiment for the tube around the critical manifold:
// states start with x exactly eps*M from H(y1) and y uniform in the
// region, and every sampled orbit point must keep ||x - H(y1)|| <= eps*N
// with y inside the region. Requires the region to be strongly trapping
// for the reduced system and the layer probe to return stable-evidence;
// set override_hypotheses to run anyway (expect escapes).
InvarianceReport invariance_experiment(const SfocfSystem& base,
                                       const TrappingRegion& region,
                                       const InvarianceConfig& cfg);

struct PerturbationReport {
  std::vector<double> epsilons;
  std::vector<double> K_hat;  // sup over starts and times of ||dphi||/(eps t)
  double ratio = 0.0;         // max/min of K_hat over the positive epsilons
  bool bounded = false;
  int comparison_times = 0;
};

// Linear-growth statistic of the defect between the finite-epsilon flow
// and the frozen-slow epsilon = 0 flow from shared starts, the
// coefficients held fixed. K_hat(0) is 0 by definition and excluded from
// the ratio.
PerturbationReport perturbation_bound_experiment(
    const SfocfSystem& base, const std::vector<Vector>& starts, double T,
    const std::vector<double>& eps_grid, double ratio_bound = 5.0,
    const IntegratorConfig& icfg = {});

struct ComparisonConfig {
  std::vector<double> epsilons;
  double slow_horizon = 5.0;
  int comparison_times = 40;
  bool override_hypotheses = false;
  StabilityProbeConfig probe;
  IntegratorConfig integrator;
};

struct ReducedVsFullReport {
  std::vector<double> epsilons;
  std::vector<double> discrepancies;  // sup-norm gap of y over slow time
  double slope = 0.0;                 // log-log fit across the grid
  std::string hypothesis_note;
};

// Slow dynamics of the full system against the reduced flow from matched
// starts on the critical manifold; the gap is expected to shrink linearly
// with epsilon. Gated on the layer stability probe like the invariance
// experiment.
ReducedVsFullReport reduced_vs_full_comparison(const SfocfSystem& base,
                                               const Vector& y0,
                                               const ComparisonConfig& cfg);

}  // namespace pwlsf
