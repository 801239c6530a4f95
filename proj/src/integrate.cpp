#include "pwlsf/integrate.hpp"

#include <algorithm>
#include <cmath>

namespace pwlsf {

OdeSystem make_ode(const Matrix& M_L, const Matrix& M_R, const Vector& f) {
  if (M_L.rows() == 0 || M_L.rows() != M_L.cols() ||
      M_R.rows() != M_R.cols() || M_R.rows() != M_L.rows() ||
      f.size() != M_L.rows())
    throw std::invalid_argument("piece dimensions disagree");
  OdeSystem ode;
  ode.n = M_L.rows();
  ode.field_left = [M_L, f](const Vector& z, Vector& out) {
    out.noalias() = M_L * z;
    out += f;
  };
  ode.field_right = [M_R, f](const Vector& z, Vector& out) {
    out.noalias() = M_R * z;
    out += f;
  };
  ode.h = [](const Vector& z) { return z(0); };
  return ode;
}

OdeSystem make_ode(const GeneralPwlSystem& sys) {
  return make_ode(sys.P_L, sys.P_R, sys.c * sys.mu_tilde);
}

OdeSystem make_ode(const SfocfSystem& sys) {
  return make_ode(assemble_sfocf_matrix(sys, Side::Left),
                  assemble_sfocf_matrix(sys, Side::Right),
                  sfocf_forcing(sys));
}

OdeSystem make_ode(const PiecewiseSmoothSystem& sys) {
  OdeSystem ode;
  ode.n = sys.n;
  const ParamMap params = sys.params;
  auto f_left = sys.f_left;
  auto f_right = sys.f_right;
  ode.field_left = [f_left, params](const Vector& z, Vector& out) {
    out = f_left(z, params);
  };
  ode.field_right = [f_right, params](const Vector& z, Vector& out) {
    out = f_right(z, params);
  };
  ode.h = sys.h;
  return ode;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double kC2 = 1.0 / 5, kC3 = 3.0 / 10, kC4 = 4.0 / 5, kC5 = 8.0 / 9;
constexpr double kA21 = 1.0 / 5;
constexpr double kA31 = 3.0 / 40, kA32 = 9.0 / 40;
constexpr double kA41 = 44.0 / 45, kA42 = -56.0 / 15, kA43 = 32.0 / 9;
constexpr double kA51 = 19372.0 / 6561, kA52 = -25360.0 / 2187,
                 kA53 = 64448.0 / 6561, kA54 = -212.0 / 729;
constexpr double kA61 = 9017.0 / 3168, kA62 = -355.0 / 33,
                 kA63 = 46732.0 / 5247, kA64 = 49.0 / 176,
                 kA65 = -5103.0 / 18656;
constexpr double kB1 = 35.0 / 384, kB3 = 500.0 / 1113, kB4 = 125.0 / 192,
                 kB5 = -2187.0 / 6784, kB6 = 11.0 / 84;
// Difference between the 5th and embedded 4th order weights.
constexpr double kE1 = 71.0 / 57600, kE3 = -71.0 / 16695, kE4 = 71.0 / 1920,
                 kE5 = -17253.0 / 339200, kE6 = 22.0 / 525, kE7 = -1.0 / 40;
// Weights of the quartic dense interpolant.
constexpr double kD1 = -12715105075.0 / 11282082432.0;
constexpr double kD3 = 87487479700.0 / 32700410799.0;
constexpr double kD4 = -10690763975.0 / 1880347072.0;
constexpr double kD5 = 701980252875.0 / 199316789632.0;
constexpr double kD6 = -1453857185.0 / 822651844.0;
constexpr double kD7 = 69997945.0 / 29380423.0;

class Stepper {
 public:
  Stepper(const OdeSystem& sys, const IntegratorConfig& cfg)
      : sys_(sys), cfg_(cfg) {
    const Index n = sys.n;
    for (Vector* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &y_, &ynew_,
                      &work_, &r1_, &r2_, &r3_, &r4_, &r5_, &uend_})
      v->resize(n);
  }

  void run(const Vector& z0, const Observer& observer, Diagnostics& diag,
           std::vector<Event>& events);

 private:
  void rhs(int piece, const Vector& z, Vector& out) {
    (piece == 0 ? sys_.field_left : sys_.field_right)(z, out);
    ++rhs_evals_;
  }

  // Signed side of the switching manifold with a dead band: values within
  // the band count as "on the manifold" and keep the current piece.
  int side_of(const Vector& z) const {
    const double v = sys_.h(z);
    const double band = 1e-13 * (1.0 + z.norm());
    if (v > band) return 1;
    if (v < -band) return -1;
    return 0;
  }

  // Dense interpolant over the last accepted step; theta in [0, 1].
  void dense(double theta, Vector& out) const {
    const double t1 = 1.0 - theta;
    out = r1_ + theta * (r2_ + t1 * (r3_ + theta * (r4_ + t1 * r5_)));
  }

  double initial_step(int piece);
  bool try_step(int piece, double h, double& err);
  void build_dense(double h);

  const OdeSystem& sys_;
  const IntegratorConfig& cfg_;
  Vector k1_, k2_, k3_, k4_, k5_, k6_, k7_;
  Vector y_, ynew_, work_;
  Vector r1_, r2_, r3_, r4_, r5_, uend_;
  double t_ = 0.0;
  long long rhs_evals_ = 0;
};

double Stepper::initial_step(int piece) {
  const double sc = cfg_.abs_tol + cfg_.rel_tol * y_.norm();
  rhs(piece, y_, k1_);
  const double d0 = y_.norm(), d1 = k1_.norm();
  double h = (d1 > 1e-10 * sc) ? 0.01 * std::max(d0, sc) / d1
                               : 1e-6 * std::max(1.0, cfg_.horizon);
  // one explicit Euler probe to bound the local curvature
  work_ = y_ + h * k1_;
  rhs(piece, work_, k2_);
  const double d2 = (k2_ - k1_).norm() / h;
  if (d2 > 1e-15)
    h = std::min(h, std::pow(0.01 / d2, 0.2));
  h = std::min(h, cfg_.horizon);
  if (cfg_.max_step > 0) h = std::min(h, cfg_.max_step);
  return h;
}

// One trial step of size h from (t_, y_) on the given piece. k1_ must hold
// the derivative at y_. Fills ynew_, k7_ and the error estimate.
bool Stepper::try_step(int piece, double h, double& err) {
  work_ = y_ + h * (kA21 * k1_);
  rhs(piece, work_, k2_);
  work_ = y_ + h * (kA31 * k1_ + kA32 * k2_);
  rhs(piece, work_, k3_);
  work_ = y_ + h * (kA41 * k1_ + kA42 * k2_ + kA43 * k3_);
  rhs(piece, work_, k4_);
  work_ = y_ + h * (kA51 * k1_ + kA52 * k2_ + kA53 * k3_ + kA54 * k4_);
  rhs(piece, work_, k5_);
  work_ = y_ + h * (kA61 * k1_ + kA62 * k2_ + kA63 * k3_ + kA64 * k4_ +
                    kA65 * k5_);
  rhs(piece, work_, k6_);
  ynew_ = y_ + h * (kB1 * k1_ + kB3 * k3_ + kB4 * k4_ + kB5 * k5_ + kB6 * k6_);
  rhs(piece, ynew_, k7_);
  work_ = h * (kE1 * k1_ + kE3 * k3_ + kE4 * k4_ + kE5 * k5_ + kE6 * k6_ +
               kE7 * k7_);
  double sum = 0.0;
  for (Index i = 0; i < sys_.n; ++i) {
    const double sc =
        cfg_.abs_tol +
        cfg_.rel_tol * std::max(std::abs(y_(i)), std::abs(ynew_(i)));
    const double q = work_(i) / sc;
    sum += q * q;
  }
  err = std::sqrt(sum / static_cast<double>(sys_.n));
  return std::isfinite(err) && err <= 1.0;
}

void Stepper::build_dense(double h) {
  r1_ = y_;
  r2_ = ynew_ - y_;
  r3_ = h * k1_ - r2_;
  r4_ = r2_ - h * k7_ - r3_;
  r5_ = h * (kD1 * k1_ + kD3 * k3_ + kD4 * k4_ + kD5 * k5_ + kD6 * k6_ +
             kD7 * k7_);
}

void Stepper::run(const Vector& z0, const Observer& observer,
                  Diagnostics& diag, std::vector<Event>& events) {
  if (z0.size() != sys_.n)
    throw std::invalid_argument("initial state has wrong dimension");
  y_ = z0;
  t_ = 0.0;
  int side = side_of(y_);
  int piece;
  if (side != 0) {
    piece = (side > 0) ? 1 : 0;
  } else {
    // On the manifold both fields agree; start on the piece the flow
    // enters, read off the directional derivative of h.
    rhs(0, y_, k1_);
    const double delta = 1e-6 * (1.0 + y_.norm()) / (1.0 + k1_.norm());
    const double dhdt =
        (sys_.h(y_ + delta * k1_) - sys_.h(y_ - delta * k1_)) / (2.0 * delta);
    piece = (dhdt > 0.0) ? 1 : 0;
  }

  if (!observer(t_, y_, piece)) {
    diag.stopped_by_observer = true;
    diag.rhs_evals = rhs_evals_;
    return;
  }

  double h = (cfg_.init_step > 0) ? cfg_.init_step : initial_step(piece);
  rhs(piece, y_, k1_);

  while (t_ < cfg_.horizon) {
    if (diag.steps_accepted + diag.steps_rejected >= cfg_.max_steps)
      throw NumericalError("step budget exhausted before the horizon");
    if (cfg_.max_step > 0) h = std::min(h, cfg_.max_step);
    bool lands_on_horizon = false;
    if (t_ + h >= cfg_.horizon) {
      h = cfg_.horizon - t_;
      lands_on_horizon = true;
    }
    if (h < 1e-14 * std::max(1.0, std::abs(t_)) && !lands_on_horizon)
      throw NumericalError("step size underflow near t = " +
                           std::to_string(t_));

    double err = 0.0;
    if (!try_step(piece, h, err)) {
      ++diag.steps_rejected;
      const double fac =
          std::isfinite(err) && err > 0.0
              ? std::max(0.2, 0.9 * std::pow(err, -0.2))
              : 0.2;
      h *= std::min(fac, 1.0);
      continue;
    }

    build_dense(h);

    // Scan the interpolant for a switching crossing inside this step.
    const double thetas[4] = {0.25, 0.5, 0.75, 1.0};
    double th_lo = 0.0;
    int sign_lo = (side != 0) ? side : 0;
    double th_hi = -1.0;
    int sign_hi = 0;
    for (double th : thetas) {
      if (th < 1.0)
        dense(th, work_);
      else
        work_ = ynew_;
      const int s = side_of(work_);
      if (s == 0) continue;
      if (sign_lo == 0) {
        // left the manifold: this sample fixes the departing side
        sign_lo = s;
        th_lo = th;
        continue;
      }
      if (s != sign_lo) {
        th_hi = th;
        sign_hi = s;
        break;
      }
      th_lo = th;
    }

    if (th_hi > 0.0) {
      // Bisect on the interpolant down to the requested time resolution.
      const double span = h;
      while ((th_hi - th_lo) * span >
             cfg_.event_tol * std::max(1.0, std::abs(t_ + th_hi * span))) {
        const double mid = 0.5 * (th_lo + th_hi);
        dense(mid, work_);
        const int s = side_of(work_);
        if (s == sign_hi)
          th_hi = mid;
        else
          th_lo = mid;  // same side as departure, or inside the band
      }
      dense(th_hi, work_);
      const Vector y_event = work_;
      const double t_event = t_ + th_hi * h;

      Event ev;
      ev.t = t_event;
      ev.state = y_event;
      ev.direction = sign_hi;
      // Grazing when the field is nearly tangent to the manifold: compare
      // the directional derivative of h along the flow with its natural
      // scale.
      rhs(sign_hi > 0 ? 1 : 0, y_event, ynew_);
      const double delta =
          1e-6 * (1.0 + y_event.norm()) / (1.0 + ynew_.norm());
      const double dhdt =
          (sys_.h(y_event + delta * ynew_) - sys_.h(y_event - delta * ynew_)) /
          (2.0 * delta);
      ev.grazing = std::abs(dhdt) < 1e-5 * (1.0 + ynew_.norm());
      events.push_back(ev);

      // Restart on the other piece at the crossing.
      t_ = t_event;
      y_ = y_event;
      side = sign_hi;
      piece = (side > 0) ? 1 : 0;
      k1_ = ynew_;  // derivative at y_event on the new piece, from above
      ++diag.steps_accepted;
      if (!observer(t_, y_, piece)) {
        diag.stopped_by_observer = true;
        break;
      }
      if (y_.norm() > cfg_.divergence_norm) {
        diag.diverged = true;
        diag.escape_time = t_;
        break;
      }
      // retry with a fraction of the truncated step
      h = std::max(0.25 * h, 1e-12 * std::max(1.0, std::abs(t_)));
      continue;
    }

    t_ = lands_on_horizon ? cfg_.horizon : t_ + h;
    y_ = ynew_;
    k1_ = k7_;
    const int s_end = side_of(y_);
    if (s_end != 0) side = s_end;
    ++diag.steps_accepted;
    if (!observer(t_, y_, piece)) {
      diag.stopped_by_observer = true;
      break;
    }
    if (y_.norm() > cfg_.divergence_norm) {
      diag.diverged = true;
      diag.escape_time = t_;
      break;
    }
    const double fac = (err > 1e-12) ? 0.9 * std::pow(err, -0.2) : 5.0;
    h *= std::clamp(fac, 0.2, 5.0);
  }

  diag.reached_horizon = t_ >= cfg_.horizon && !diag.diverged;
  diag.rhs_evals = rhs_evals_;
}

}  // namespace

void integrate_observe(const OdeSystem& sys, const Vector& z0,
                       const IntegratorConfig& cfg, const Observer& observer,
                       Diagnostics* diag_out, std::vector<Event>* events_out) {
  Diagnostics diag;
  std::vector<Event> events;
  Stepper stepper(sys, cfg);
  stepper.run(z0, observer, diag, events);
  if (diag_out) *diag_out = diag;
  if (events_out) *events_out = std::move(events);
}

Trajectory integrate(const OdeSystem& sys, const Vector& z0,
                     const IntegratorConfig& cfg) {
  Trajectory traj;
  auto record = [&traj](double t, const Vector& y, int piece) {
    traj.times.push_back(t);
    traj.states.push_back(y);
    traj.pieces.push_back(piece);
    return true;
  };
  integrate_observe(sys, z0, cfg, record, &traj.diag, &traj.events);
  return traj;
}

}  // namespace pwlsf
