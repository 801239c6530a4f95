#pragma once

#include "pwlsf/systems.hpp"

#include <functional>
#include <limits>
#include <vector>

namespace pwlsf {

struct IntegratorConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double max_step = 0.0;   // 0: only the horizon caps the step
  double init_step = 0.0;  // 0: choose automatically
  // relative time tolerance to which switching crossings are localized
  double event_tol = 1e-10;
  double horizon = 100.0;
  // share of the horizon consumers treat as transient (used by cycle bounds)
  double transient_fraction = 0.5;
  // state norm beyond which the orbit counts as escaped; reported, not thrown
  double divergence_norm = 1e9;
  long long max_steps = 200000000;
};

struct Event {
  double t = 0.0;
  Vector state;
  int direction = 0;  // +1: h went negative -> positive, -1: the reverse
  bool grazing = false;
};

struct Diagnostics {
  long long steps_accepted = 0;
  long long steps_rejected = 0;
  long long rhs_evals = 0;
  bool diverged = false;
  double escape_time = std::numeric_limits<double>::quiet_NaN();
  bool reached_horizon = false;
  bool stopped_by_observer = false;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  // piece active on [times[i], times[i+1]); 0 = left, 1 = right
  std::vector<int> pieces;
  std::vector<Event> events;
  Diagnostics diag;
};

// Two-piece continuous ODE as the integrator sees it: one smooth field per
// side of h = 0. Continuity of the combined field across h = 0 is assumed
// (it is what makes restarting on the other piece consistent).
struct OdeSystem {
  Index n = 0;
  std::function<void(const Vector&, Vector&)> field_left, field_right;
  std::function<double(const Vector&)> h;
};

// PWL piece pair with shared forcing, switching on the first coordinate.
OdeSystem make_ode(const Matrix& M_L, const Matrix& M_R, const Vector& f);
OdeSystem make_ode(const GeneralPwlSystem& sys);
OdeSystem make_ode(const SfocfSystem& sys);
// Parameters are captured by value at construction time.
OdeSystem make_ode(const PiecewiseSmoothSystem& sys);

// Observer signature: (t, state, active piece); return false to stop.
using Observer = std::function<bool(double, const Vector&, int)>;

// Adaptive embedded 5(4) pair with a quartic dense interpolant. Steps are
// accepted against the mixed tolerance, crossings of h = 0 are localized by
// bisection on the interpolant to cfg.event_tol relative time accuracy, and
// integration restarts on the other piece at the crossing. Tangential
// (grazing) events are flagged. The observer is called at the initial
// point, every accepted step end, and every event.
void integrate_observe(const OdeSystem& sys, const Vector& z0,
                       const IntegratorConfig& cfg, const Observer& observer,
                       Diagnostics* diag_out = nullptr,
                       std::vector<Event>* events_out = nullptr);

// Same, storing every observer point.
Trajectory integrate(const OdeSystem& sys, const Vector& z0,
                     const IntegratorConfig& cfg);

}  // namespace pwlsf
