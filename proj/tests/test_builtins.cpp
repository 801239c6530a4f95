#include "pwlsf/builtins.hpp"

#include "doctest.h"
#include "pwlsf/linalg.hpp"
#include "pwlsf/slow_fast.hpp"
#include "pwlsf/util.hpp"

#include <cmath>

using namespace pwlsf;
using builtin::OceanParams;

namespace {

bool spectrum_close(const ComplexVector& got, const std::vector<Complex>& want,
                    double tol) {
  if (got.size() != static_cast<Index>(want.size())) return false;
  ComplexVector w(want.size());
  for (size_t i = 0; i < want.size(); ++i) w(static_cast<Index>(i)) = want[i];
  const auto perm = optimal_assignment(got, w);
  for (Index i = 0; i < got.size(); ++i)
    if (std::abs(got(i) - w(perm[static_cast<size_t>(i)])) > tol) return false;
  return true;
}

}  // namespace

TEST_SUITE("builtins") {

TEST_CASE("oscillation example carries the placed spectra") {
  const SfocfSystem sys = builtin::canard5d(0.05, 1.0);
  CHECK(sys.n == 5);
  CHECK(sys.k == 3);
  CHECK(sys.mu == 1.0);

  const LayerSystem layer = layer_system(sys);
  CHECK(spectrum_close(eigenvalues(layer.A_L).values,
                       {Complex(-0.6, 0), Complex(-0.2, 1), Complex(-0.2, -1)},
                       1e-8));
  CHECK(spectrum_close(eigenvalues(layer.A_R).values,
                       {Complex(-3, 0), Complex(-0.1, 5), Complex(-0.1, -5)},
                       1e-8));

  // (s+3)(s^2 + 0.2 s + 25.01) expanded by hand
  REQUIRE(sys.limit0.has_value());
  CHECK(sys.limit0->a_R(0) == doctest::Approx(3.2).epsilon(1e-12));
  CHECK(sys.limit0->a_R(1) == doctest::Approx(25.61).epsilon(1e-12));
  CHECK(sys.limit0->a_R(2) == doctest::Approx(75.03).epsilon(1e-12));

  const ReducedSystem red = reduced_system(sys);
  Matrix B_L(2, 2), B_R(2, 2);
  B_L << -6.0, 1.0, -10.0, 0.0;
  B_R << 2.0, 1.0, -5.0, 0.0;
  CHECK((red.B_L - B_L).norm() <= 1e-9);
  CHECK((red.B_R - B_R).norm() <= 1e-9);
}

TEST_CASE("oscillation start state sits on the right critical branch") {
  const SfocfSystem sys = builtin::canard5d(0.05, 1.0);
  const Vector z0 = builtin::canard5d_start(sys);
  REQUIRE(z0.size() == 5);
  CHECK(z0(3) == 0.7);
  CHECK(z0(4) == -0.4);

  // layer equilibrium: A_R x + e_k y1 = 0 at y1 = 0.7
  const LayerSystem layer = layer_system(sys);
  Vector resid = layer.A_R * z0.head(3);
  resid(2) += 0.7;
  CHECK(resid.norm() <= 1e-12 * layer.A_R.norm());
}

TEST_CASE("circulation fields are continuous and vanish at the corner") {
  OceanParams params;
  params.lambda0 = 0.0;
  const PiecewiseSmoothSystem sys = builtin::ocean_system(params);
  CHECK(sys.unfolding_param == "lambda0");

  const Vector corner = builtin::ocean_beb_point();
  CHECK(sys.h(corner) == 0.0);
  CHECK(sys.f_left(corner, sys.params).norm() <= 1e-14);
  CHECK(sys.f_right(corner, sys.params).norm() <= 1e-14);

  Rng rng(42);
  for (int rep = 0; rep < 50; ++rep) {
    Vector z(3);
    for (int i = 0; i < 3; ++i) z(i) = rng.uniform(-2.0, 2.0);
    z(1) = z(0);  // on the switching plane
    const Vector fl = sys.f_left(z, sys.params);
    const Vector fr = sys.f_right(z, sys.params);
    CHECK((fl - fr).norm() <= 1e-14 * (1.0 + fl.norm()));
  }
}

TEST_CASE("circulation ode adapter matches the parameterized fields") {
  OceanParams params;
  params.A = 1.27;
  params.lambda0 = -0.003;
  params.delta = 0.02;
  const PiecewiseSmoothSystem sys = builtin::ocean_system(params);
  const OdeSystem ode = builtin::ocean_ode(params);
  REQUIRE(ode.n == 3);

  Rng rng(7);
  Vector out(3);
  for (int rep = 0; rep < 50; ++rep) {
    Vector z(3);
    for (int i = 0; i < 3; ++i) z(i) = rng.uniform(-3.0, 3.0);
    ode.field_left(z, out);
    CHECK((out - sys.f_left(z, sys.params)).norm() <= 1e-15);
    ode.field_right(z, out);
    CHECK((out - sys.f_right(z, sys.params)).norm() <= 1e-15);
    CHECK(ode.h(z) == sys.h(z));
  }
}

TEST_CASE("circulation linearization matches the hand jacobians") {
  OceanParams params;
  params.lambda0 = 0.0;
  const double eps = params.epsilon, A = params.A, delta = params.delta;
  const PiecewiseSmoothSystem sys = builtin::ocean_system(params);
  const BebLinearization lin =
      linearize_at_beb(sys, builtin::ocean_beb_point());

  Matrix JL(3, 3), JR(3, 3);
  // d/dz of the quadratic fields at (1,1,1); central differences are exact
  // there up to rounding
  JL << -1.0 + eps * A, -eps * A, 0.0,
        eps * A, eps * (-1.0 - A), eps,
        eps * delta * params.a, -eps * delta * params.b, 0.0;
  JR << -1.0 - eps * A, eps * A, 0.0,
        -eps * A, eps * (-1.0 + A), eps,
        eps * delta * params.a, -eps * delta * params.b, 0.0;
  CHECK((lin.jac_left - JL).norm() <= 1e-9);
  CHECK((lin.jac_right - JR).norm() <= 1e-9);

  Vector force(3);
  force << 0.0, 0.0, eps * delta;
  CHECK((lin.forcing_direction - force).norm() <= 1e-12);
}

TEST_CASE("circulation slow spectra at the corner equilibrium") {
  OceanParams params;
  params.lambda0 = 0.0;
  const BebLinearization lin =
      linearize_at_beb(builtin::ocean_system(params), builtin::ocean_beb_point());
  const BebReduction red = beb_reduction(lin, 1, params.epsilon);

  REQUIRE(red.fast_L.size() == 1);
  REQUIRE(red.slow_L.size() == 2);
  CHECK(red.fast_L[0].real() == doctest::Approx(-0.9889).epsilon(5e-4));
  CHECK(red.fast_R[0].real() == doctest::Approx(-1.011).epsilon(5e-4));

  // slow eigenvalues, already divided by epsilon; left pair is real
  CHECK(std::abs(red.slow_L[0] - Complex(-2.108, 0)) <= 5e-4 * 2.108);
  CHECK(std::abs(red.slow_L[1] - Complex(-0.004798, 0)) <= 5e-4 * 0.004798);
  for (const Complex& nu : red.slow_R) {
    CHECK(nu.real() == doctest::Approx(0.04402).epsilon(5e-4));
    CHECK(std::abs(nu.imag()) == doctest::Approx(0.08919).epsilon(5e-4));
  }
}

TEST_CASE("circulation equilibria satisfy the stationarity equations") {
  for (double lambda0 : {-0.02, -0.001, 0.0, 0.005, 0.03}) {
    for (double A : {0.9, 1.1, 1.3}) {
      OceanParams params;
      params.A = A;
      params.lambda0 = lambda0;
      const PiecewiseSmoothSystem sys = builtin::ocean_system(params);

      for (Side side : {Side::Left, Side::Right}) {
        const auto eq = builtin::ocean_equilibrium(params, side);
        const Vector f = side == Side::Left
                             ? sys.f_left(eq.state, sys.params)
                             : sys.f_right(eq.state, sys.params);
        CHECK(f.norm() <= 1e-13 * (1.0 + eq.state.norm()));

        const double gap = eq.state(0) - eq.state(1);
        const bool on_side = side == Side::Left ? gap <= 1e-15 : gap >= -1e-15;
        CHECK(eq.admissible == on_side);
      }
    }
  }

  OceanParams at_corner;
  at_corner.lambda0 = 0.0;
  for (Side side : {Side::Left, Side::Right}) {
    const auto eq = builtin::ocean_equilibrium(at_corner, side);
    CHECK((eq.state - builtin::ocean_beb_point()).norm() <= 1e-15);
    CHECK(eq.admissible);
  }
}

TEST_CASE("reduced family type flips from focus to node at the known gain") {
  // right-piece discriminant (A-1)^2 - 4 b delta crosses zero at A = 1.2
  OceanParams params;

  params.A = 1.19;
  auto cls = classify_2d(reduced_system(builtin::ocean_reduced_family(params)));
  CHECK(cls.right.kind == "focus");
  CHECK(!cls.right.attracting);
  CHECK(cls.left.attracting);

  params.A = 1.21;
  cls = classify_2d(reduced_system(builtin::ocean_reduced_family(params)));
  CHECK(cls.right.kind == "node");
  CHECK(!cls.right.attracting);

  params.A = 1.1;
  cls = classify_2d(reduced_system(builtin::ocean_reduced_family(params)));
  CHECK(cls.prediction ==
        "Hopf-like bifurcation creating a small amplitude oscillation");

  params.A = 1.3;
  cls = classify_2d(reduced_system(builtin::ocean_reduced_family(params)));
  CHECK(cls.prediction == "no limit cycle is created locally");
}

}  // TEST_SUITE
