#include "pwlsf/canonical.hpp"

#include <Eigen/LU>

#include <cmath>
#include <string>

namespace pwlsf {

namespace {

// B Q^{-1} through a factorization of Q^T (no explicit inverse).
Matrix right_divide(const Matrix& B, const Eigen::PartialPivLU<Matrix>& lu_QT) {
  return lu_QT.solve(B.transpose()).transpose();
}

Matrix companion_of(const Vector& p) { return companion_from_coeffs<double>(p); }

}  // namespace

OcfTransform build_ocf_transform(const GeneralPwlSystem& sys) {
  const Index n = sys.n;
  if (n < 1) throw std::invalid_argument("build_ocf_transform: empty system");
  const ContinuityReport cont = check_continuity(sys);
  if (!cont.pass)
    throw std::invalid_argument(
        "build_ocf_transform: pieces differ outside the first column by " +
        std::to_string(cont.max_violation) + "; the system is not continuous");

  OcfTransform t;
  t.p_L = charpoly_coeffs(sys.P_L);
  t.p_R = charpoly_coeffs(sys.P_R);

  t.Phi = Matrix(n, n);
  t.Phi.row(0) = Eigen::RowVectorXd::Unit(n, 0);
  for (Index i = 1; i < n; ++i) t.Phi.row(i) = t.Phi.row(i - 1) * sys.P_L;

  t.Psi = Matrix::Identity(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < i; ++j) t.Psi(i, j) = t.p_L(i - j - 1);

  t.rcond_Phi = rcond(t.Phi);
  if (t.rcond_Phi < 1e-10)
    throw HypothesisError(
        "system not transformable by this construction: the first-row "
        "iterate matrix is numerically singular (rcond " +
        std::to_string(t.rcond_Phi) + ")");

  t.Q = t.Psi * t.Phi;
  t.cond_Q = cond(t.Q);

  const Vector Qc = t.Q * sys.c;
  t.d = Vector::Zero(n);
  t.d.tail(n - 1) = Qc.head(n - 1);  // downshift: d = J^T (Q c)
  t.s = Qc(n - 1);
  if (std::abs(t.s) < 1e-10 * t.Q.norm() * std::max(sys.c.norm(), 1e-300))
    throw HypothesisError(
        "system not transformable by this construction: the forcing gain s "
        "is numerically zero (" + std::to_string(t.s) + "), so the forcing "
        "cannot be normalized onto the last canonical coordinate");
  return t;
}

OcfSystem to_ocf(const GeneralPwlSystem& sys, const OcfTransform& t) {
  const Index n = sys.n;
  const double tol = 1e-8 * std::max(1.0, t.cond_Q);
  const Eigen::PartialPivLU<Matrix> lu_QT(t.Q.transpose().eval());

  for (Side side : {Side::Left, Side::Right}) {
    const Matrix& P = side == Side::Left ? sys.P_L : sys.P_R;
    const Vector& p = side == Side::Left ? t.p_L : t.p_R;
    const Matrix M = right_divide(t.Q * P, lu_QT);
    const double res = (M - companion_of(p)).cwiseAbs().maxCoeff();
    if (res > tol)
      throw NumericalError(std::string("to_ocf: ") + side_name(side) +
                           " piece deviates from companion form by " +
                           std::to_string(res) + " (tolerance " +
                           std::to_string(tol) + ")");
    const Vector forcing = (t.Q * sys.c - M * t.d) / t.s;
    const double fres = (forcing - Vector::Unit(n, n - 1)).cwiseAbs().maxCoeff();
    if (fres > tol)
      throw NumericalError(std::string("to_ocf: mapped forcing of the ") +
                           side_name(side) + " piece deviates from e_n by " +
                           std::to_string(fres) + " (tolerance " +
                           std::to_string(tol) + ")");
  }

  OcfSystem out;
  out.n = n;
  out.p_L = t.p_L;
  out.p_R = t.p_R;
  out.mu = t.s * sys.mu_tilde;
  return out;
}

Matrix scaling_matrix(Index n, Index k, double epsilon) {
  if (n < 2 || k < 1 || k >= n)
    throw std::invalid_argument("scaling_matrix: need n >= 2 and 0 < k < n");
  if (epsilon <= 0.0)
    throw std::invalid_argument("scaling_matrix: epsilon must be positive (no finite scaling at 0)");
  Matrix E = Matrix::Identity(n, n);
  double w = 1.0;
  for (Index i = k; i < n; ++i) {
    E(i, i) = w;
    w *= epsilon;
  }
  return E;
}

SfocfConversion to_sfocf(const SlowFastPwlSystem& sys) {
  if (sys.epsilon <= 0.0)
    throw std::invalid_argument("to_sfocf: epsilon must be positive (no finite scaling at 0)");
  const GeneralPwlSystem gen = assemble_general(sys);
  const Index n = sys.n, k = sys.k;

  SfocfConversion out;
  out.transform = build_ocf_transform(gen);
  const Eigen::PartialPivLU<Matrix> lu_QT(out.transform.Q.transpose().eval());

  SfocfSystem& sf = out.system;
  sf.n = n;
  sf.k = k;
  sf.epsilon = sys.epsilon;
  sf.a_L = Vector(k);
  sf.a_R = Vector(k);
  sf.b_L = Vector(n - k);
  sf.b_R = Vector(n - k);

  const Matrix E = scaling_matrix(n, k, sys.epsilon);
  for (Side side : {Side::Left, Side::Right}) {
    const Matrix& P = side == Side::Left ? gen.P_L : gen.P_R;
    // E^{-1} (Q P Q^{-1}) E with diagonal E applied as entry scalings
    Matrix C = right_divide(out.transform.Q * P, lu_QT);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) C(i, j) *= E(j, j) / E(i, i);

    Vector& a = side == Side::Left ? sf.a_L : sf.a_R;
    Vector& b = side == Side::Left ? sf.b_L : sf.b_R;
    for (Index i = 0; i < k; ++i) a(i) = -C(i, 0);
    for (Index j = 0; j < n - k; ++j) b(j) = -C(k + j, 0) / sys.epsilon;

    // everything outside the first column is pinned by the pattern
    double worst = 0.0;
    for (Index i = 0; i < n; ++i)
      for (Index j = 1; j < n; ++j) {
        double expected = 0.0;
        if (j == i + 1) expected = i < k ? 1.0 : sys.epsilon;
        worst = std::max(worst, std::abs(C(i, j) - expected));
      }
    out.sparsity_residual = std::max(out.sparsity_residual, worst);
  }

  const double tol = 1e-6 * std::max(1.0, out.transform.cond_Q);
  if (out.sparsity_residual > tol)
    throw NumericalError("to_sfocf: scaled canonical matrix deviates from the "
                         "two-timescale pattern by " +
                         std::to_string(out.sparsity_residual) +
                         " (tolerance " + std::to_string(tol) + ")");

  sf.mu = out.transform.s / std::pow(sys.epsilon, static_cast<double>(n - k)) *
          sys.mu_tilde;
  return out;
}

TransformIdentityReport verify_transform_identities(const GeneralPwlSystem& sys,
                                                    const OcfTransform& t) {
  const Index n = sys.n;
  TransformIdentityReport rep;
  rep.cond_Q = t.cond_Q;
  rep.rcond_Phi = t.rcond_Phi;
  rep.tol = 1e-8 * std::max(1.0, t.cond_Q);
  rep.ill_conditioned = t.rcond_Phi < 1e-6;

  const Matrix J = shift_matrix(n);
  rep.res_shift_intertwine =
      (J * t.Q - t.Q * sys.P_L - t.p_L * Eigen::RowVectorXd::Unit(n, 0))
          .cwiseAbs()
          .maxCoeff();

  // Horner evaluation of the characteristic polynomial at its own matrix
  Matrix H = sys.P_L + t.p_L(0) * Matrix::Identity(n, n);
  for (Index i = 1; i < n; ++i)
    H = H * sys.P_L + t.p_L(i) * Matrix::Identity(n, n);
  rep.res_cayley_hamilton = H.cwiseAbs().maxCoeff();
  rep.ch_scale = std::pow(1.0 + sys.P_L.norm(), static_cast<double>(n));

  const Eigen::PartialPivLU<Matrix> lu_QT(t.Q.transpose().eval());
  rep.res_first_row_inverse =
      (lu_QT.solve(Vector::Unit(n, 0)) - Vector::Unit(n, 0)).cwiseAbs().maxCoeff();

  for (Side side : {Side::Left, Side::Right}) {
    const Matrix& P = side == Side::Left ? sys.P_L : sys.P_R;
    const Matrix M = right_divide(t.Q * P, lu_QT);
    const double res =
        ((t.Q * sys.c - M * t.d) / t.s - Vector::Unit(n, n - 1)).cwiseAbs().maxCoeff();
    (side == Side::Left ? rep.res_forcing_left : rep.res_forcing_right) = res;
  }

  rep.pass = rep.res_shift_intertwine <= rep.tol &&
             rep.res_first_row_inverse <= rep.tol &&
             rep.res_forcing_left <= rep.tol && rep.res_forcing_right <= rep.tol &&
             rep.res_cayley_hamilton <= 1e-8 * rep.ch_scale * std::max(1.0, t.cond_Q);
  return rep;
}

}  // namespace pwlsf
