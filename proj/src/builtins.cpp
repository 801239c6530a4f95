#include "pwlsf/builtins.hpp"

#include "pwlsf/slow_fast.hpp"

#include <cmath>

namespace pwlsf {
namespace builtin {

SfocfSystem canard5d(double epsilon, double mu) {
  using C = Complex;
  const std::vector<C> fast_L = {C(-0.6, 0), C(-0.2, 1), C(-0.2, -1)};
  const std::vector<C> fast_R = {C(-3, 0), C(-0.1, 5), C(-0.1, -5)};
  const std::vector<C> slow_L = {C(-3, 1), C(-3, -1)};
  const std::vector<C> slow_R = {C(1, 2), C(1, -2)};
  return place_system(3, fast_L, slow_L, fast_R, slow_R, epsilon, mu);
}

Vector canard5d_start(const SfocfSystem& sys) {
  const CriticalManifold cm = critical_manifold(layer_system(sys));
  Vector z0(sys.n);
  z0.head(sys.k) = cm.at(0.7);
  z0(sys.k) = 0.7;
  z0(sys.k + 1) = -0.4;
  return z0;
}

PiecewiseSmoothSystem ocean_system(const OceanParams& params) {
  PiecewiseSmoothSystem sys;
  sys.n = 3;
  sys.params = {{"a", params.a},         {"b", params.b},
                {"delta", params.delta}, {"epsilon", params.epsilon},
                {"A", params.A},         {"lambda0", params.lambda0}};
  sys.unfolding_param = "lambda0";
  auto field = [](const Vector& z, const ParamMap& p, double gap) {
    const double eps = p.at("epsilon"), A = p.at("A");
    Vector out(3);
    out(0) = (1.0 - z(0)) - eps * A * z(0) * gap;
    out(1) = eps * (z(2) - z(1) - A * z(1) * gap);
    out(2) = eps * p.at("delta") *
             (p.at("lambda0") + p.at("a") * z(0) - p.at("b") * z(1));
    return out;
  };
  sys.f_left = [field](const Vector& z, const ParamMap& p) {
    return field(z, p, z(1) - z(0));
  };
  sys.f_right = [field](const Vector& z, const ParamMap& p) {
    return field(z, p, z(0) - z(1));
  };
  sys.h = [](const Vector& z) { return z(0) - z(1); };
  sys.grad_h = Vector(3);
  sys.grad_h << 1.0, -1.0, 0.0;
  return sys;
}

OdeSystem ocean_ode(const OceanParams& params) {
  OdeSystem ode;
  ode.n = 3;
  const double eps = params.epsilon, A = params.A, delta = params.delta;
  const double a = params.a, b = params.b, lam = params.lambda0;
  ode.field_left = [=](const Vector& z, Vector& out) {
    const double gap = z(1) - z(0);
    out(0) = (1.0 - z(0)) - eps * A * z(0) * gap;
    out(1) = eps * (z(2) - z(1) - A * z(1) * gap);
    out(2) = eps * delta * (lam + a * z(0) - b * z(1));
  };
  ode.field_right = [=](const Vector& z, Vector& out) {
    const double gap = z(0) - z(1);
    out(0) = (1.0 - z(0)) - eps * A * z(0) * gap;
    out(1) = eps * (z(2) - z(1) - A * z(1) * gap);
    out(2) = eps * delta * (lam + a * z(0) - b * z(1));
  };
  ode.h = [](const Vector& z) { return z(0) - z(1); };
  return ode;
}

Vector ocean_beb_point() {
  Vector p(3);
  p << 1.0, 1.0, 1.0;
  return p;
}

SfocfSystem ocean_reduced_family(const OceanParams& params) {
  SfocfSystem sys;
  sys.n = 3;
  sys.k = 1;
  sys.a_L = Vector::Ones(1);
  sys.a_R = Vector::Ones(1);
  sys.b_L = Vector(2);
  sys.b_L << 1.0 + params.A, params.b * params.delta;
  sys.b_R = Vector(2);
  sys.b_R << 1.0 - params.A, params.b * params.delta;
  sys.epsilon = params.epsilon;
  sys.mu = 0.0;
  sys.limit0 = SfocfLimits{sys.a_L, sys.a_R, sys.b_L, sys.b_R};
  return sys;
}

OceanEquilibrium ocean_equilibrium(const OceanParams& params, Side side) {
  if (params.a != params.b)
    throw std::invalid_argument(
        "closed-form equilibrium needs matching drift gains a = b");
  const double ratio = params.lambda0 / params.a;
  OceanEquilibrium eq;
  eq.state = Vector(3);
  if (side == Side::Left) {
    const double x = 1.0 / (1.0 + params.epsilon * params.A * ratio);
    eq.state(0) = x;
    eq.state(1) = x + ratio;
    eq.state(2) = eq.state(1) * (1.0 + params.A * ratio);
    eq.admissible = params.lambda0 >= 0.0;
  } else {
    const double x = 1.0 / (1.0 - params.epsilon * params.A * ratio);
    eq.state(0) = x;
    eq.state(1) = x + ratio;
    eq.state(2) = eq.state(1) * (1.0 - params.A * ratio);
    eq.admissible = params.lambda0 <= 0.0;
  }
  return eq;
}

}  // namespace builtin
}  // namespace pwlsf
