#pragma once

// Shared random-system generators for tests and the acceptance suite.

#include "pwlsf/systems.hpp"
#include "pwlsf/util.hpp"

namespace testgen {

using namespace pwlsf;

inline Matrix random_matrix(Rng& rng, Index rows, Index cols, double lo, double hi) {
  Matrix M(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) M(i, j) = rng.uniform(lo, hi);
  return M;
}

inline Vector random_vector(Rng& rng, Index n, double lo, double hi) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.uniform(lo, hi);
  return v;
}

// Continuous two-piece PWL system: pieces differ in the first column only.
inline GeneralPwlSystem random_continuous_system(Rng& rng, Index n,
                                                 double range = 1.0) {
  GeneralPwlSystem sys;
  sys.n = n;
  sys.P_L = random_matrix(rng, n, n, -range, range);
  sys.P_R = sys.P_L;
  sys.P_R.col(0) += random_vector(rng, n, -range, range);
  sys.c = random_vector(rng, n, -range, range);
  sys.mu_tilde = rng.uniform(-1.0, 1.0);
  return sys;
}

// Random explicit two-timescale system (shared U/V off-first-columns so the
// assembled pieces are continuous).
inline SlowFastPwlSystem random_slow_fast_system(Rng& rng, Index n, Index k,
                                                 double epsilon,
                                                 double range = 1.0) {
  SlowFastPwlSystem sys;
  sys.n = n;
  sys.k = k;
  sys.U_L = random_matrix(rng, k, n, -range, range);
  sys.U_R = sys.U_L;
  sys.V_L = random_matrix(rng, n - k, n, -range, range);
  sys.V_R = sys.V_L;
  for (Index i = 0; i < k; ++i) sys.U_R(i, 0) += rng.uniform(-range, range);
  for (Index i = 0; i < n - k; ++i) sys.V_R(i, 0) += rng.uniform(-range, range);
  sys.q = random_vector(rng, k, -range, range);
  sys.r = random_vector(rng, n - k, -range, range);
  sys.epsilon = epsilon;
  sys.mu_tilde = rng.uniform(-1.0, 1.0);
  return sys;
}

}  // namespace testgen
