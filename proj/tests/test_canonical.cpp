#include "pwlsf/canonical.hpp"

#include "pwlsf/linalg.hpp"
#include "pwlsf/util.hpp"

#include "generators.hpp"

#include <doctest.h>

using namespace pwlsf;

namespace {

// retry until the construction hypotheses hold, mirroring how corpora are
// drawn elsewhere
GeneralPwlSystem transformable_system(Rng& rng, Index n) {
  while (true) {
    GeneralPwlSystem sys = testgen::random_continuous_system(rng, n);
    try {
      const OcfTransform t = build_ocf_transform(sys);
      if (t.rcond_Phi > 1e-6) return sys;
    } catch (const HypothesisError&) {
    }
  }
}

}  // namespace

TEST_SUITE_BEGIN("canonical");

TEST_CASE("a companion system with unit last-coordinate forcing is a fixed point") {
  Vector p(4);
  p << 0.3, -1.1, 0.7, 0.2;
  GeneralPwlSystem sys;
  sys.n = 4;
  sys.P_L = companion_from_coeffs(p);
  sys.P_R = sys.P_L;
  sys.P_R.col(0) -= Vector::Ones(4);
  sys.c = Vector::Unit(4, 3);
  sys.mu_tilde = 2.0;

  const OcfTransform t = build_ocf_transform(sys);
  CHECK((t.Q - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(t.d.cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(t.s == doctest::Approx(1.0).epsilon(1e-12));

  const OcfSystem ocf = to_ocf(sys, t);
  CHECK((ocf.p_L - p).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(ocf.mu == doctest::Approx(2.0));

  const TransformIdentityReport rep = verify_transform_identities(sys, t);
  CHECK(rep.pass);
  CHECK(rep.res_shift_intertwine <= 1e-12);
  CHECK(rep.res_forcing_left <= 1e-12);
}

TEST_CASE("random transformable systems satisfy the construction identities") {
  Rng rng(606);
  for (int rep = 0; rep < 60; ++rep) {
    const Index n = 2 + static_cast<Index>(rng.uniform() * 5.0);
    const GeneralPwlSystem sys = transformable_system(rng, n);
    const OcfTransform t = build_ocf_transform(sys);
    const TransformIdentityReport idrep = verify_transform_identities(sys, t);
    CHECK(idrep.pass);
    // canonical coefficients are the characteristic coefficients
    const OcfSystem ocf = to_ocf(sys, t);
    const Vector direct = charpoly_coeffs(sys.P_R);
    CHECK((ocf.p_R - direct).cwiseAbs().maxCoeff() <=
          1e-9 * std::max(1.0, direct.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("transform preserves each piece's spectrum") {
  Rng rng(707);
  for (int rep = 0; rep < 30; ++rep) {
    const GeneralPwlSystem sys = transformable_system(rng, 4);
    const OcfSystem ocf = to_ocf(sys, build_ocf_transform(sys));
    CHECK(matched_max_distance(
              eigenvalues(companion_from_coeffs(ocf.p_L)).values,
              eigenvalues(sys.P_L).values) <= 1e-7);
    CHECK(matched_max_distance(
              eigenvalues(companion_from_coeffs(ocf.p_R)).values,
              eigenvalues(sys.P_R).values) <= 1e-7);
  }
}

TEST_CASE("an unobservable first coordinate is rejected as untransformable") {
  GeneralPwlSystem sys;
  sys.n = 3;
  sys.P_L = Matrix::Zero(3, 3);
  sys.P_L(0, 0) = 1.0;  // first row never reaches coordinates 2,3
  sys.P_L(1, 1) = 2.0;
  sys.P_L(2, 2) = 3.0;
  sys.P_R = sys.P_L;
  sys.P_R.col(0) += Vector::Ones(3);
  sys.c = Vector::Ones(3);
  CHECK_THROWS_AS((void)build_ocf_transform(sys), HypothesisError);
}

TEST_CASE("vanishing forcing gain is rejected") {
  // c in the span of the first rows' kernel: choose c = e1 so Q c lands on
  // the first canonical coordinate and s = (Qc)_n = 0 for a companion piece
  Vector p(3);
  p << 0.5, 0.25, 0.125;
  GeneralPwlSystem sys;
  sys.n = 3;
  sys.P_L = companion_from_coeffs(p);
  sys.P_R = sys.P_L;
  sys.c = Vector::Unit(3, 0);
  CHECK_THROWS_AS((void)build_ocf_transform(sys), HypothesisError);
}

TEST_CASE("discontinuous input is refused outright") {
  Rng rng(808);
  GeneralPwlSystem sys = testgen::random_continuous_system(rng, 3);
  sys.P_R(1, 2) += 1e-3;
  CHECK_THROWS_AS((void)build_ocf_transform(sys), std::invalid_argument);
}

TEST_CASE("scaling matrix is identity on fast slots, geometric on slow ones") {
  const Matrix E = scaling_matrix(5, 2, 0.1);
  CHECK(E(0, 0) == 1.0);
  CHECK(E(1, 1) == 1.0);
  CHECK(E(2, 2) == 1.0);
  CHECK(E(3, 3) == doctest::Approx(0.1));
  CHECK(E(4, 4) == doctest::Approx(0.01));
  CHECK_THROWS_AS((void)scaling_matrix(5, 2, 0.0), std::invalid_argument);
}

TEST_CASE("two-timescale conversion: 2x2 coefficients are trace and determinant") {
  // For n = 2, k = 1 the merged characteristic coefficients are
  // (-trace, det), so a1 = -tr P_X and eps b1 = det P_X.
  Rng rng(909);
  for (int rep = 0; rep < 20; ++rep) {
    SlowFastPwlSystem sf = testgen::random_slow_fast_system(rng, 2, 1, 0.2);
    SfocfConversion conv;
    try {
      conv = to_sfocf(sf);
    } catch (const HypothesisError&) {
      continue;
    }
    const GeneralPwlSystem gen = assemble_general(sf);
    CHECK(conv.system.a_L(0) ==
          doctest::Approx(-gen.P_L.trace()).epsilon(1e-8));
    CHECK(conv.system.b_L(0) * sf.epsilon ==
          doctest::Approx(gen.P_L.determinant()).epsilon(1e-8));
    CHECK(conv.system.a_R(0) ==
          doctest::Approx(-gen.P_R.trace()).epsilon(1e-8));
  }
}

TEST_CASE("two-timescale conversion recovers scrambled canonical systems") {
  // start from known coefficients, hide them behind a random change of
  // variables that respects the two-timescale split, and recover them
  Rng rng(1010);
  int done = 0;
  while (done < 20) {
    const Index n = 3 + static_cast<Index>(rng.uniform() * 3.0);
    const Index k = 1 + static_cast<Index>(rng.uniform() * static_cast<double>(n - 1));
    const double eps = rng.uniform(0.05, 0.3);

    SfocfSystem ref;
    ref.n = n;
    ref.k = k;
    ref.a_L = testgen::random_vector(rng, k, -2.0, 2.0);
    ref.a_R = testgen::random_vector(rng, k, -2.0, 2.0);
    ref.b_L = testgen::random_vector(rng, n - k, -2.0, 2.0);
    ref.b_R = testgen::random_vector(rng, n - k, -2.0, 2.0);
    ref.epsilon = eps;
    ref.mu = 1.0;

    const Matrix C_L = assemble_sfocf_matrix(ref, Side::Left);
    const Matrix C_R = assemble_sfocf_matrix(ref, Side::Right);
    const Vector f = sfocf_forcing(ref);

    // block change of variables w = S z with S = diag(S_f, S_s) keeps rates
    // and the switching plane normal direction; S_f's first row must be e1^T
    // so w1 = z1.
    Matrix S = Matrix::Zero(n, n);
    Matrix Sf = testgen::random_matrix(rng, k, k, -1.0, 1.0) +
                2.0 * Matrix::Identity(k, k);
    Sf.row(0) = Eigen::RowVectorXd::Unit(k, 0);
    Matrix Ss = testgen::random_matrix(rng, n - k, n - k, -1.0, 1.0) +
                2.0 * Matrix::Identity(n - k, n - k);
    S.topLeftCorner(k, k) = Sf;
    S.bottomRightCorner(n - k, n - k) = Ss;
    if (cond(S) > 1e4) continue;
    const Matrix S_inv = S.inverse();

    SlowFastPwlSystem sf;
    sf.n = n;
    sf.k = k;
    sf.epsilon = eps;
    sf.mu_tilde = 1.0;
    const Matrix PL = S * C_L * S_inv;
    const Matrix PR = S * C_R * S_inv;
    sf.U_L = PL.topRows(k);
    sf.U_R = PR.topRows(k);
    sf.V_L = PL.bottomRows(n - k) / eps;
    sf.V_R = PR.bottomRows(n - k) / eps;
    const Vector fc = S * f;
    sf.q = fc.head(k);
    sf.r = fc.tail(n - k) / eps;

    // scrambling must not have broken exact continuity beyond roundoff
    GeneralPwlSystem gen = assemble_general(sf);
    if (!check_continuity(gen, 1e-9).pass) continue;
    for (Index j = 1; j < n; ++j) {
      const Vector avg = 0.5 * (gen.P_L.col(j) + gen.P_R.col(j));
      gen.P_L.col(j) = avg;
      gen.P_R.col(j) = avg;
    }
    sf.U_L = gen.P_L.topRows(k);
    sf.U_R = gen.P_R.topRows(k);
    sf.V_L = gen.P_L.bottomRows(n - k) / eps;
    sf.V_R = gen.P_R.bottomRows(n - k) / eps;

    SfocfConversion conv;
    try {
      conv = to_sfocf(sf);
    } catch (const HypothesisError&) {
      continue;
    }
    ++done;
    const double tol = 1e-6 * std::max(1.0, conv.transform.cond_Q);
    CHECK((conv.system.a_L - ref.a_L).cwiseAbs().maxCoeff() <= tol);
    CHECK((conv.system.a_R - ref.a_R).cwiseAbs().maxCoeff() <= tol);
    CHECK((conv.system.b_L - ref.b_L).cwiseAbs().maxCoeff() <= tol);
    CHECK((conv.system.b_R - ref.b_R).cwiseAbs().maxCoeff() <= tol);
    CHECK(conv.sparsity_residual <= tol);
    // mu rescaling: forcing was eps e_n mu with mu = 1
    CHECK(conv.system.mu == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("conversion refuses eps = 0") {
  Rng rng(1111);
  SlowFastPwlSystem sf = testgen::random_slow_fast_system(rng, 3, 1, 0.0);
  CHECK_THROWS_AS((void)to_sfocf(sf), std::invalid_argument);
}

TEST_SUITE_END();
