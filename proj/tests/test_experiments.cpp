#include "pwlsf/experiments.hpp"

#include "doctest.h"
#include "generators.hpp"
#include "pwlsf/linalg.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

using namespace pwlsf;

namespace {

// (n,k) = (3,1) with Hurwitz scalar layers and identical attracting-focus
// reduced pieces; the right-piece equilibrium (mu/4, mu/2, mu) is the only
// admissible one for mu > 0.
SfocfSystem stable31(double epsilon, double mu) {
  SfocfSystem sys;
  sys.n = 3;
  sys.k = 1;
  sys.a_L = Vector::Ones(1);
  sys.a_R = Vector::Constant(1, 2.0);
  sys.b_L = Vector(2);
  sys.b_L << 2.0, 2.0;
  sys.b_R = Vector(2);
  sys.b_R << 4.0, 4.0;
  sys.epsilon = epsilon;
  sys.mu = mu;
  sys.limit0 = SfocfLimits{sys.a_L, sys.a_R, sys.b_L, sys.b_R};
  return sys;
}

// Lyapunov ellipse for B = [[-2,1],[-2,0]]: P solves B^T P + P B = -I.
Matrix lyapunov_P() {
  Matrix P(2, 2);
  P << 0.75, -0.5, -0.5, 0.875;
  return P;
}

TrappingRegion lyapunov_ellipse(const Vector& center, double rho) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(lyapunov_P());
  TrappingRegion region;
  region.shape = TrappingRegion::Shape::Ball;
  region.center = center;
  region.extents = Vector::Ones(2);
  region.transform = rho * es.operatorInverseSqrt();
  return region;
}

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("cycle bounds of a contraction collapse to the equilibrium") {
  Matrix M = -Matrix::Identity(2, 2);
  Vector f(2);
  f << 1.0, 2.0;  // equilibrium (1, 2)
  const OdeSystem ode = make_ode(M, M, f);
  Vector z0(2);
  z0 << 5.0, -3.0;
  IntegratorConfig cfg;
  cfg.horizon = 60.0;
  const CycleBounds cb = limit_cycle_bounds(ode, z0, 1, cfg);
  CHECK(cb.converged);
  CHECK(!cb.diverged);
  CHECK(cb.min == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(cb.max == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(cb.window_start == doctest::Approx(30.0));
}

TEST_CASE("cycle bounds recover the amplitude of a rotation") {
  Matrix M(2, 2);
  M << 0.0, 1.0, -1.0, 0.0;
  const OdeSystem ode = make_ode(M, M, Vector::Zero(2));
  Vector z0(2);
  z0 << 1.0, 0.0;
  IntegratorConfig cfg;
  cfg.horizon = 200.0;
  cfg.max_step = 0.01;  // extrema are read off the samples
  const CycleBounds cb = limit_cycle_bounds(ode, z0, 0, cfg);
  CHECK(cb.converged);
  CHECK(cb.min == doctest::Approx(-1.0).epsilon(1e-4));
  CHECK(cb.max == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("cycle bounds flag divergence") {
  Matrix M = Matrix::Identity(1, 1);
  const OdeSystem ode = make_ode(M, M, Vector::Zero(1));
  IntegratorConfig cfg;
  cfg.horizon = 100.0;
  cfg.divergence_norm = 1e6;
  const CycleBounds cb = limit_cycle_bounds(ode, Vector::Ones(1), 0, cfg);
  CHECK(cb.diverged);
  CHECK(!cb.converged);
  CHECK(std::isnan(cb.min));
}

TEST_CASE("reduced flow equals the slow rows on the critical manifold") {
  const SfocfSystem sys = stable31(0.05, 1.0);
  const CriticalManifold cm = critical_manifold(layer_system(sys));
  const ReducedSystem red = reduced_system(sys);
  const OdeSystem rode = reduced_ode(red);
  const Vector forcing = sfocf_forcing(sys);

  Rng rng(11);
  Vector out(2);
  for (int rep = 0; rep < 20; ++rep) {
    Vector y(2);
    y << rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0);
    Vector z(3);
    z.head(1) = cm.at(y(0));
    z.tail(2) = y;
    const Side side = y(0) >= 0.0 ? Side::Right : Side::Left;
    const Vector full =
        (assemble_sfocf_matrix(sys, side) * z + forcing) / sys.epsilon;
    if (side == Side::Right) rode.field_right(y, out);
    else rode.field_left(y, out);
    CHECK((full.tail(2) - out).norm() <= 1e-12 * (1.0 + out.norm()));
  }
}

TEST_CASE("reduced circulation flow carries a limit cycle") {
  builtin::OceanParams params;  // A = 1.1
  ReducedSystem red = reduced_system(builtin::ocean_reduced_family(params));
  red.mu = 1.0;
  const OdeSystem rode = reduced_ode(red);
  // equilibrium y* = (mu/beta2, beta1*mu/beta2) = (100, -10), repelling focus
  Vector z0(2);
  z0 << 90.0, -10.0;
  IntegratorConfig cfg;
  cfg.horizon = 4000.0;
  const CycleBounds cb = limit_cycle_bounds(rode, z0, 0, cfg);
  CHECK(cb.converged);
  CHECK(!cb.diverged);
  CHECK(cb.max - cb.min > 1.0);
  CHECK(cb.min < 100.0);
  CHECK(cb.max > 100.0);
}

TEST_CASE("coefficient family locates the single admissible equilibrium") {
  const SystemFamily fam = sfocf_family(stable31(0.01, 1.0), "mu");
  const auto eqs = fam.admissible_equilibria(1.0);
  REQUIRE(eqs.size() == 1);
  Vector expect(3);
  expect << 0.25, 0.5, 1.0;
  CHECK((eqs.front() - expect).norm() <= 1e-10);

  CHECK_THROWS_AS(sfocf_family(stable31(0.01, 1.0), "A"),
                  std::invalid_argument);
}

TEST_CASE("mu sweep of a stable system yields an equilibrium branch only") {
  const SystemFamily fam = sfocf_family(stable31(0.01, 1.0), "mu");
  IntegratorConfig cfg;
  cfg.horizon = 4000.0;
  const std::vector<double> grid = {0.5, 1.0, 2.0};
  const SweepResult res = sweep(fam, grid, 2, cfg);
  REQUIRE(res.points.size() == 3);
  for (const SweepPoint& pt : res.points) {
    CAPTURE(pt.parameter);
    REQUIRE(!pt.failed);
    CHECK(pt.admissible_count == 1);
    CHECK(pt.equilibrium_value == doctest::Approx(pt.parameter).epsilon(1e-9));
    CHECK(pt.cycle.converged);
    CHECK(pt.cycle.max - pt.cycle.min <= 2e-6);
    CHECK(pt.cycle.min == doctest::Approx(pt.parameter).epsilon(1e-4));
  }
}

TEST_CASE("strong trapping: contraction passes, rotation is tangent") {
  ReducedSystem contraction;
  contraction.m = 2;
  contraction.B_L = -Matrix::Identity(2, 2);
  contraction.B_R = -Matrix::Identity(2, 2);
  TrappingRegion ball;
  ball.shape = TrappingRegion::Shape::Ball;
  ball.center = Vector::Zero(2);
  ball.extents = Vector::Ones(2);
  ball.boundary_samples = 2000;
  const TrappingReport pass = check_strong_trapping(contraction, ball);
  CHECK(pass.pass);
  CHECK(pass.worst_inner == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(pass.samples == 2000);

  ReducedSystem rotation;
  rotation.m = 2;
  Matrix R(2, 2);
  R << 0.0, 1.0, -1.0, 0.0;
  rotation.B_L = R;
  rotation.B_R = R;
  const TrappingReport fail = check_strong_trapping(rotation, ball);
  CHECK(!fail.pass);
  CHECK(std::abs(fail.worst_inner) <= 1e-12);
}

TEST_CASE("boxes cannot strongly trap a companion reduced flow") {
  // dy2/dtau = -2 y1 + 1 is independent of y2, so part of the top face of
  // any box around the equilibrium (0.5, 1) points outward
  const ReducedSystem red = reduced_system(stable31(0.01, 1.0));
  TrappingRegion box;
  box.center = Vector(2);
  box.center << 0.5, 1.0;
  box.extents = Vector::Ones(2);
  const TrappingReport rep = check_strong_trapping(red, box);
  CHECK(!rep.pass);
  CHECK(rep.worst_inner > 0.1);

  const TrappingRegion ellipse = lyapunov_ellipse(box.center, 2.0);
  const Matrix P = lyapunov_P();
  const Matrix B = red.B_R;
  CHECK((B.transpose() * P + P * B + Matrix::Identity(2, 2)).norm() <= 1e-14);
  const TrappingReport ok = check_strong_trapping(red, ellipse, 0.1);
  CHECK(ok.pass);
  CHECK(ok.worst_inner < -0.1);

  CHECK(region_contains(ellipse, box.center));
  Vector far(2);
  far << 10.0, 10.0;
  CHECK(!region_contains(ellipse, far));
}

TEST_CASE("invariance holds on the stable example") {
  const SfocfSystem base = stable31(0.01, 1.0);
  Vector center(2);
  center << 0.5, 1.0;
  const TrappingRegion region = lyapunov_ellipse(center, 1.0);
  InvarianceConfig cfg;
  cfg.epsilons = {0.01, 0.005};
  cfg.M = 1.0;
  cfg.N = 12.0;
  cfg.samples = 40;
  cfg.seed = 5;
  cfg.probe.points_per_sphere = 40;
  const InvarianceReport rep = invariance_experiment(base, region, cfg);
  CHECK(rep.pass);
  CHECK(rep.hypothesis_note == "hypotheses verified");
  REQUIRE(rep.per_eps.size() == 2);
  for (const auto& er : rep.per_eps) {
    CAPTURE(er.epsilon);
    CHECK(er.violations == 0);
    CHECK(er.min_admissible_N >= cfg.M);
    CHECK(er.min_admissible_N < cfg.N);
  }
  const double n0 = rep.per_eps[0].min_admissible_N;
  const double n1 = rep.per_eps[1].min_admissible_N;
  CHECK(std::max(n0, n1) <= 2.0 * std::min(n0, n1));
}

TEST_CASE("invariance refuses a non-trapping region") {
  const SfocfSystem base = stable31(0.01, 1.0);
  TrappingRegion box;
  box.center = Vector(2);
  box.center << 0.5, 1.0;
  box.extents = Vector::Ones(2);
  InvarianceConfig cfg;
  cfg.epsilons = {0.01};
  cfg.samples = 4;
  CHECK_THROWS_AS(invariance_experiment(base, box, cfg), HypothesisError);

  cfg.override_hypotheses = true;
  cfg.probe.points_per_sphere = 20;
  const InvarianceReport rep = invariance_experiment(base, box, cfg);
  CHECK(rep.hypothesis_note != "hypotheses verified");
}

TEST_CASE("invariance with a tight tube reports exits") {
  const SfocfSystem base = stable31(0.01, 1.0);
  Vector center(2);
  center << 0.5, 1.0;
  const TrappingRegion region = lyapunov_ellipse(center, 1.0);
  InvarianceConfig cfg;
  cfg.epsilons = {0.01};
  cfg.M = 1.0;
  cfg.N = 1.2;  // too small: slow drift pushes the defect past N
  cfg.samples = 30;
  cfg.seed = 5;
  cfg.probe.points_per_sphere = 40;
  const InvarianceReport rep = invariance_experiment(base, region, cfg);
  CHECK(!rep.pass);
  REQUIRE(rep.per_eps.size() == 1);
  CHECK(rep.per_eps[0].violations > 0);
  CHECK(!rep.per_eps[0].exit_states.empty());
  CHECK(rep.per_eps[0].exit_states.front().size() == 3);
}

TEST_CASE("perturbation statistic matches the linear matrix oracle") {
  // identical pieces make the family a genuinely linear system, so the
  // defect has the closed form (e^{C(eps)t} - e^{C(0)t}) z0
  SfocfSystem sys = stable31(0.0, 0.0);
  sys.a_R = sys.a_L;
  sys.b_R = sys.b_L;
  sys.limit0 = SfocfLimits{sys.a_L, sys.a_R, sys.b_L, sys.b_R};

  std::vector<Vector> starts;
  Vector z0(3);
  z0 << 1.0, 0.5, -0.25;
  starts.push_back(z0);
  const double T = 2.0;
  const std::vector<double> grid = {0.0, 0.05, 0.1};
  const PerturbationReport rep =
      perturbation_bound_experiment(sys, starts, T, grid);

  REQUIRE(rep.epsilons.size() == 3);
  CHECK(rep.K_hat[0] == 0.0);

  SfocfSystem at0 = sys;
  at0.epsilon = 0.0;
  const Matrix C0 = assemble_sfocf_matrix(at0, Side::Left);
  for (size_t i = 1; i < grid.size(); ++i) {
    SfocfSystem ate = sys;
    ate.epsilon = grid[i];
    const Matrix Ce = assemble_sfocf_matrix(ate, Side::Left);
    double K = 0.0;
    for (int j = 1; j <= 40; ++j) {
      const double t = T * j / 40.0;
      const Vector delta =
          ((Ce * t).exp() - (C0 * t).exp()) * z0;
      K = std::max(K, delta.norm() / (grid[i] * t));
    }
    CHECK(rep.K_hat[i] == doctest::Approx(K).epsilon(1e-6));
    // variation-of-constants bound
    const Matrix D = (Ce - C0) / grid[i];
    const double bound = D.norm() * z0.norm() *
                         std::exp((C0.norm() + grid[i] * D.norm()) * T);
    CHECK(rep.K_hat[i] <= bound);
  }
  CHECK(rep.bounded);
}

TEST_CASE("perturbation statistic stays bounded on the oscillation example") {
  const SfocfSystem base = builtin::canard5d(0.05, 1.0);
  std::vector<Vector> starts;
  Vector z0 = builtin::canard5d_start(base);
  starts.push_back(z0);
  Vector shifted = z0;
  shifted(0) += 0.5;
  starts.push_back(shifted);
  const PerturbationReport rep = perturbation_bound_experiment(
      base, starts, 5.0, {0.01, 0.02, 0.05});
  CHECK(rep.bounded);
  CHECK(rep.ratio < 5.0);
  for (double k : rep.K_hat) CHECK(std::isfinite(k));
}

TEST_CASE("slow dynamics converge to the reduced flow at first order") {
  const SfocfSystem base = stable31(0.01, 1.0);
  Vector y0(2);
  y0 << 1.2, 0.4;
  ComparisonConfig cfg;
  cfg.epsilons = {0.02, 0.01, 0.005, 0.002};
  cfg.slow_horizon = 4.0;
  cfg.probe.points_per_sphere = 40;
  const ReducedVsFullReport rep = reduced_vs_full_comparison(base, y0, cfg);
  REQUIRE(rep.epsilons.size() == 4);
  for (size_t i = 1; i < rep.discrepancies.size(); ++i)
    CHECK(rep.discrepancies[i] < rep.discrepancies[i - 1]);
  CHECK(rep.slope == doctest::Approx(1.0).epsilon(0.3));
}

TEST_CASE("circulation sweep separates cycle and equilibrium regimes") {
  const SystemFamily fam = ocean_family(builtin::OceanParams{}, "lambda0");
  IntegratorConfig cfg;
  cfg.horizon = 3e5;
  const SweepResult res = sweep(fam, {-0.002, 0.0005}, 1, cfg);
  REQUIRE(res.points.size() == 2);

  const SweepPoint& cyc = res.points[0];
  REQUIRE(!cyc.failed);
  CHECK(cyc.admissible_count == 1);
  CHECK(cyc.cycle.converged);
  CHECK(cyc.cycle.min < cyc.equilibrium_value);
  CHECK(cyc.cycle.max > cyc.equilibrium_value);
  CHECK(cyc.cycle.max - cyc.cycle.min > 1e-3);

  const SweepPoint& eq = res.points[1];
  REQUIRE(!eq.failed);
  CHECK(eq.admissible_count == 1);
  CHECK(eq.cycle.converged);
  CHECK(eq.cycle.max - eq.cycle.min <= 1e-6);
  CHECK(eq.cycle.min == doctest::Approx(eq.equilibrium_value).epsilon(1e-6));
}

TEST_CASE("oscillation example is refused by the invariance hypotheses") {
  const SfocfSystem base = builtin::canard5d(0.05, 1.0);
  TrappingRegion ball;
  ball.shape = TrappingRegion::Shape::Ball;
  ball.center = Vector::Zero(2);
  ball.extents = Vector::Ones(2);
  InvarianceConfig cfg;
  cfg.epsilons = {0.05};
  cfg.samples = 4;
  CHECK_THROWS_AS(invariance_experiment(base, ball, cfg), HypothesisError);
}

}  // TEST_SUITE
