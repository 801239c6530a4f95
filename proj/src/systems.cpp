#include "pwlsf/systems.hpp"

#include <cmath>
#include <string>

namespace pwlsf {

namespace {

void require_system(const GeneralPwlSystem& sys) {
  if (sys.n < 1 || sys.P_L.rows() != sys.n || sys.P_L.cols() != sys.n ||
      sys.P_R.rows() != sys.n || sys.P_R.cols() != sys.n || sys.c.size() != sys.n)
    throw std::invalid_argument("general PWL system has inconsistent dimensions");
}

void require_sfocf(const SfocfSystem& sys) {
  if (sys.n < 2 || sys.k < 1 || sys.k >= sys.n)
    throw std::invalid_argument("SFOCF system needs n >= 2 and 0 < k < n");
  if (sys.a_L.size() != sys.k || sys.a_R.size() != sys.k ||
      sys.b_L.size() != sys.n - sys.k || sys.b_R.size() != sys.n - sys.k)
    throw std::invalid_argument("SFOCF coefficient vectors have wrong lengths");
}

}  // namespace

ContinuityReport check_continuity(const GeneralPwlSystem& sys, double tol) {
  require_system(sys);
  ContinuityReport rep;
  rep.pass = true;
  for (Index j = 1; j < sys.n; ++j) {
    for (Index i = 0; i < sys.n; ++i) {
      const double v = std::abs(sys.P_L(i, j) - sys.P_R(i, j));
      if (v > rep.max_violation) {
        rep.max_violation = v;
        rep.row = i;
        rep.col = j;
      }
    }
  }
  rep.pass = rep.max_violation <= tol;
  return rep;
}

GeneralPwlSystem assemble_general(const SlowFastPwlSystem& sys) {
  const Index n = sys.n, k = sys.k;
  if (n < 2 || k < 1 || k >= n)
    throw std::invalid_argument("slow-fast PWL system needs n >= 2 and 0 < k < n");
  if (sys.U_L.rows() != k || sys.U_L.cols() != n || sys.U_R.rows() != k ||
      sys.U_R.cols() != n || sys.V_L.rows() != n - k || sys.V_L.cols() != n ||
      sys.V_R.rows() != n - k || sys.V_R.cols() != n || sys.q.size() != k ||
      sys.r.size() != n - k)
    throw std::invalid_argument("slow-fast PWL system has inconsistent dimensions");
  GeneralPwlSystem out;
  out.n = n;
  out.P_L = Matrix(n, n);
  out.P_L.topRows(k) = sys.U_L;
  out.P_L.bottomRows(n - k) = sys.epsilon * sys.V_L;
  out.P_R = Matrix(n, n);
  out.P_R.topRows(k) = sys.U_R;
  out.P_R.bottomRows(n - k) = sys.epsilon * sys.V_R;
  out.c = Vector(n);
  out.c.head(k) = sys.q;
  out.c.tail(n - k) = sys.epsilon * sys.r;
  out.mu_tilde = sys.mu_tilde;
  return out;
}

Matrix assemble_sfocf_matrix(const SfocfSystem& sys, Side side) {
  require_sfocf(sys);
  const Index n = sys.n, k = sys.k;
  const Vector& a = side == Side::Left ? sys.a_L : sys.a_R;
  const Vector& b = side == Side::Left ? sys.b_L : sys.b_R;
  Matrix C = Matrix::Zero(n, n);
  for (Index i = 0; i < k; ++i) C(i, 0) = -a(i);
  for (Index j = 0; j < n - k; ++j) C(k + j, 0) = -sys.epsilon * b(j);
  // unit superdiagonal through the fast rows (the k-th row couples into the
  // first slow variable), epsilon superdiagonal below it
  for (Index i = 0; i + 1 < n; ++i) C(i, i + 1) = i < k ? 1.0 : sys.epsilon;
  return C;
}

Vector sfocf_forcing(const SfocfSystem& sys) {
  require_sfocf(sys);
  Vector f = Vector::Zero(sys.n);
  f(sys.n - 1) = sys.epsilon * sys.mu;
  return f;
}

BebLinearization linearize_at_beb(const PiecewiseSmoothSystem& sys,
                                  const Vector& point, double step) {
  if (sys.n < 1 || point.size() != sys.n)
    throw std::invalid_argument("linearize_at_beb: point dimension mismatch");
  if (!sys.f_left || !sys.f_right || !sys.h)
    throw std::invalid_argument("linearize_at_beb: system is missing evaluators");
  const double scale = point.norm();
  const double tol = 1e-6 * (1.0 + scale);
  if (std::abs(sys.h(point)) > tol)
    throw std::invalid_argument("linearize_at_beb: point is not on the switching manifold");
  if (sys.f_left(point, sys.params).norm() > tol ||
      sys.f_right(point, sys.params).norm() > tol)
    throw std::invalid_argument("linearize_at_beb: fields do not vanish at the point");

  const double hstep = step > 0.0 ? step : std::max(1e-6, 1e-6 * scale);
  BebLinearization lin;
  lin.beb_point = point;
  lin.jac_left = Matrix(sys.n, sys.n);
  lin.jac_right = Matrix(sys.n, sys.n);
  for (Index j = 0; j < sys.n; ++j) {
    Vector hi = point, lo = point;
    hi(j) += hstep;
    lo(j) -= hstep;
    lin.jac_left.col(j) =
        (sys.f_left(hi, sys.params) - sys.f_left(lo, sys.params)) / (2.0 * hstep);
    lin.jac_right.col(j) =
        (sys.f_right(hi, sys.params) - sys.f_right(lo, sys.params)) / (2.0 * hstep);
  }

  if (sys.unfolding_param.empty() || !sys.params.count(sys.unfolding_param))
    throw std::invalid_argument(
        "linearize_at_beb: unfolding parameter is not named in the parameter map");
  ParamMap up = sys.params, down = sys.params;
  const double p0 = sys.params.at(sys.unfolding_param);
  const double pstep = std::max(1e-6, 1e-6 * std::abs(p0));
  up[sys.unfolding_param] = p0 + pstep;
  down[sys.unfolding_param] = p0 - pstep;
  // the two pieces agree at the boundary equilibrium, so either evaluator
  // serves for the unfolding direction; agreement is checked
  const Vector dl = (sys.f_left(point, up) - sys.f_left(point, down)) / (2.0 * pstep);
  const Vector dr = (sys.f_right(point, up) - sys.f_right(point, down)) / (2.0 * pstep);
  if ((dl - dr).norm() > 1e-6 * (1.0 + dl.norm()))
    throw std::invalid_argument(
        "linearize_at_beb: unfolding directions of the two pieces disagree at the point");
  lin.forcing_direction = 0.5 * (dl + dr);
  return lin;
}

namespace {

// Straightening change of variables: identity with the row of the dominant
// fast grad_h component replaced by grad_h^T, then swapped into row one.
Matrix straightening_matrix(const Vector& grad_h, Index k_fast) {
  const Index n = grad_h.size();
  if (k_fast < 1 || k_fast >= n)
    throw std::invalid_argument("straightening: need 0 < k < n");
  Index pivot = 0;
  double best = -1.0;
  for (Index i = 0; i < k_fast; ++i)
    if (std::abs(grad_h(i)) > best) {
      best = std::abs(grad_h(i));
      pivot = i;
    }
  if (best <= 0.0)
    throw HypothesisError(
        "straightening: grad h has no component in the fast directions; the "
        "switching function cannot serve as the first fast coordinate");
  Matrix T = Matrix::Identity(n, n);
  T.row(pivot) = grad_h.transpose();
  if (pivot != 0) T.row(pivot).swap(T.row(0));
  return T;
}

}  // namespace

GeneralPwlSystem pwl_from_linearization(const BebLinearization& lin,
                                        const Vector& grad_h, Index k_fast,
                                        double snap_tol) {
  const Index n = lin.jac_left.rows();
  if (lin.jac_left.cols() != n || lin.jac_right.rows() != n ||
      lin.jac_right.cols() != n || grad_h.size() != n ||
      lin.forcing_direction.size() != n)
    throw std::invalid_argument("pwl_from_linearization: dimension mismatch");
  const Matrix T = straightening_matrix(grad_h, k_fast);
  const Matrix T_inv = Eigen::PartialPivLU<Matrix>(T).inverse();
  GeneralPwlSystem out;
  out.n = n;
  out.P_L = T * lin.jac_left * T_inv;
  out.P_R = T * lin.jac_right * T_inv;
  out.c = T * lin.forcing_direction;
  out.mu_tilde = 0.0;

  const ContinuityReport rep = check_continuity(out, snap_tol);
  if (!rep.pass)
    throw HypothesisError(
        "pwl_from_linearization: one-sided Jacobians do not differ by a "
        "rank-one update along grad h (worst off-column residual " +
        std::to_string(rep.max_violation) + ")");
  // snap the agreeing columns so exact-continuity hypotheses hold downstream
  for (Index j = 1; j < n; ++j) {
    const Vector avg = 0.5 * (out.P_L.col(j) + out.P_R.col(j));
    out.P_L.col(j) = avg;
    out.P_R.col(j) = avg;
  }
  return out;
}

SlowFastPwlSystem slow_fast_from_linearization(const BebLinearization& lin,
                                               const Vector& grad_h, Index k_fast,
                                               double epsilon, double snap_tol) {
  if (epsilon <= 0.0)
    throw std::invalid_argument("slow_fast_from_linearization: epsilon must be positive");
  const GeneralPwlSystem gen = pwl_from_linearization(lin, grad_h, k_fast, snap_tol);
  SlowFastPwlSystem out;
  out.n = gen.n;
  out.k = k_fast;
  out.U_L = gen.P_L.topRows(k_fast);
  out.U_R = gen.P_R.topRows(k_fast);
  out.V_L = gen.P_L.bottomRows(gen.n - k_fast) / epsilon;
  out.V_R = gen.P_R.bottomRows(gen.n - k_fast) / epsilon;
  out.q = gen.c.head(k_fast);
  out.r = gen.c.tail(gen.n - k_fast) / epsilon;
  out.epsilon = epsilon;
  out.mu_tilde = gen.mu_tilde;
  return out;
}

}  // namespace pwlsf
