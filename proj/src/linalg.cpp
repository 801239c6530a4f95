#include "pwlsf/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace pwlsf {

namespace {

void require_square(const Eigen::Ref<const Matrix>& M, const char* who) {
  if (M.rows() == 0 || M.rows() != M.cols())
    throw std::invalid_argument(std::string(who) + ": nonempty square matrix required");
  if (!M.allFinite())
    throw std::invalid_argument(std::string(who) + ": matrix has non-finite entries");
}

void sort_spectrum(ComplexVector& v) {
  std::vector<Complex> s(v.data(), v.data() + v.size());
  std::stable_sort(s.begin(), s.end(), [](const Complex& a, const Complex& b) {
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() < b.imag();
  });
  for (Index i = 0; i < v.size(); ++i) v(i) = s[static_cast<size_t>(i)];
}

}  // namespace

Matrix balanced(Matrix M) {
  const Index n = M.rows();
  bool converged = false;
  while (!converged) {
    converged = true;
    for (Index i = 0; i < n; ++i) {
      double c = 0.0, r = 0.0;
      for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(M(j, i));
        r += std::abs(M(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      const double s = c + r;
      double f = 1.0;
      while (c < r / 2.0) { c *= 2.0; r /= 2.0; f *= 2.0; }
      while (c >= r * 2.0) { c /= 2.0; r *= 2.0; f /= 2.0; }
      if (f != 1.0 && (c + r) < 0.95 * s) {
        converged = false;
        M.row(i) /= f;
        M.col(i) *= f;
      }
    }
  }
  return M;
}

Spectrum eigenvalues(const Eigen::Ref<const Matrix>& M) {
  require_square(M, "eigenvalues");
  Eigen::EigenSolver<Matrix> es(balanced(M), /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw NumericalError("eigenvalues: QR iteration did not converge on a " +
                         std::to_string(M.rows()) + "x" + std::to_string(M.cols()) +
                         " matrix (norm " + std::to_string(M.norm()) +
                         ") within the solver's iteration budget");
  Spectrum sp;
  sp.values = es.eigenvalues();
  sort_spectrum(sp.values);
  return sp;
}

EigenPairs eigen_pairs(const Eigen::Ref<const Matrix>& M) {
  require_square(M, "eigen_pairs");
  // Vectors are computed on the unbalanced matrix; the residual check below
  // validates them directly.
  Eigen::EigenSolver<Matrix> es(M, /*computeEigenvectors=*/true);
  if (es.info() != Eigen::Success)
    throw NumericalError("eigen_pairs: QR iteration did not converge on a " +
                         std::to_string(M.rows()) + "x" + std::to_string(M.cols()) +
                         " matrix within the solver's iteration budget");
  EigenPairs out;
  out.values = es.eigenvalues();
  out.vectors = es.eigenvectors();
  const ComplexMatrix Mc = M.cast<Complex>();
  double worst = 0.0;
  for (Index i = 0; i < out.values.size(); ++i) {
    out.vectors.col(i).normalize();
    worst = std::max(worst, (Mc * out.vectors.col(i) - out.values(i) * out.vectors.col(i)).norm());
  }
  out.max_residual = worst;
  return out;
}

Vector charpoly_coeffs(const Eigen::Ref<const Matrix>& M) {
  return poly_from_roots(eigenvalues(M).values);
}

Vector poly_from_roots(const Eigen::Ref<const ComplexVector>& roots, double rel_tol) {
  const Index m = roots.size();
  std::vector<Complex> rs(roots.data(), roots.data() + m);
  std::vector<bool> used(static_cast<size_t>(m), false);

  // Monic coefficients, descending powers; grown by convolution one factor
  // at a time.
  std::vector<double> poly{1.0};
  auto multiply = [&poly](const std::vector<double>& f) {
    std::vector<double> out(poly.size() + f.size() - 1, 0.0);
    for (size_t i = 0; i < poly.size(); ++i)
      for (size_t j = 0; j < f.size(); ++j) out[i + j] += poly[i] * f[j];
    poly = std::move(out);
  };

  for (Index i = 0; i < m; ++i) {
    if (used[static_cast<size_t>(i)]) continue;
    const Complex r = rs[static_cast<size_t>(i)];
    const double tol = rel_tol * std::max(1.0, std::abs(r));
    if (std::abs(r.imag()) <= tol) {
      used[static_cast<size_t>(i)] = true;
      multiply({1.0, -r.real()});
      continue;
    }
    Index best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (Index j = i + 1; j < m; ++j) {
      if (used[static_cast<size_t>(j)]) continue;
      const double d = std::abs(std::conj(r) - rs[static_cast<size_t>(j)]);
      if (d < best_dist) { best_dist = d; best = j; }
    }
    if (best < 0 || best_dist > 2.0 * tol)
      throw std::invalid_argument(
          "poly_from_roots: complex root (" + std::to_string(r.real()) + ", " +
          std::to_string(r.imag()) + "i) has no conjugate partner within tolerance");
    const Complex q = rs[static_cast<size_t>(best)];
    used[static_cast<size_t>(i)] = used[static_cast<size_t>(best)] = true;
    // Quadratic with roots r and q; imaginary parts cancel to within tol.
    multiply({1.0, -(r + q).real(), (r * q).real()});
  }

  Vector p(m);
  for (Index i = 0; i < m; ++i) p(i) = poly[static_cast<size_t>(i) + 1];
  return p;
}

double rcond(const Eigen::Ref<const Matrix>& M) {
  require_square(M, "rcond");
  Eigen::JacobiSVD<Matrix> svd(M);
  const auto& s = svd.singularValues();
  if (s(0) == 0.0) return 0.0;
  return s(s.size() - 1) / s(0);
}

double cond(const Eigen::Ref<const Matrix>& M) {
  const double rc = rcond(M);
  if (rc == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / rc;
}

std::vector<Index> optimal_assignment(const ComplexVector& from, const ComplexVector& to) {
  if (from.size() != to.size())
    throw std::invalid_argument("optimal_assignment: size mismatch");
  const Index m = from.size();
  if (m > 9)
    throw std::invalid_argument("optimal_assignment: exhaustive matching capped at size 9");
  std::vector<Index> perm(static_cast<size_t>(m));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::vector<Index> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (Index i = 0; i < m; ++i)
      cost += std::abs(from(i) - to(perm[static_cast<size_t>(i)]));
    if (cost < best_cost) { best_cost = cost; best = perm; }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double matched_max_distance(const ComplexVector& a, const ComplexVector& b) {
  const auto perm = optimal_assignment(a, b);
  double worst = 0.0;
  for (Index i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a(i) - b(perm[static_cast<size_t>(i)])));
  return worst;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_line: need at least two points");
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("fit_line: degenerate abscissae");
  LineFit fit;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  return fit;
}

}  // namespace pwlsf
