#include "pwlsf/slow_fast.hpp"

#include "pwlsf/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>

namespace pwlsf {

namespace {

bool is_hurwitz(const Matrix& M) {
  const ComplexVector ev = eigenvalues(M).values;
  for (Index i = 0; i < ev.size(); ++i)
    if (!(ev(i).real() < 0.0)) return false;
  return true;
}

double max_real_part(const Matrix& M) {
  const ComplexVector ev = eigenvalues(M).values;
  double worst = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < ev.size(); ++i) worst = std::max(worst, ev(i).real());
  return worst;
}

// Coefficient limits the analysis runs on: the stored epsilon -> 0 values
// when available, the finite-epsilon ones otherwise.
struct Limits {
  Vector a_L, a_R, b_L, b_R;
  bool stored = false;
};

Limits coefficient_limits(const SfocfSystem& sys) {
  Limits lim;
  lim.stored = sys.limit0.has_value();
  if (lim.stored) {
    lim.a_L = sys.limit0->a_L;
    lim.a_R = sys.limit0->a_R;
    lim.b_L = sys.limit0->b_L;
    lim.b_R = sys.limit0->b_R;
  } else {
    lim.a_L = sys.a_L;
    lim.a_R = sys.a_R;
    lim.b_L = sys.b_L;
    lim.b_R = sys.b_R;
  }
  return lim;
}

}  // namespace

LayerSystem layer_system(const SfocfSystem& sys) {
  if (sys.k < 1 || sys.n <= sys.k)
    throw std::invalid_argument("layer extraction needs 1 <= k < n");
  const Limits lim = coefficient_limits(sys);
  LayerSystem layer;
  layer.k = sys.k;
  layer.used_stored_limits = lim.stored;
  layer.a_L0 = lim.a_L;
  layer.a_R0 = lim.a_R;
  layer.A_L = companion_from_coeffs(layer.a_L0);
  layer.A_R = companion_from_coeffs(layer.a_R0);
  return layer;
}

CriticalManifold critical_manifold(const LayerSystem& layer) {
  const Index k = layer.k;
  if (k < 1 || layer.a_L0.size() != k || layer.a_R0.size() != k)
    throw std::invalid_argument("layer system is incomplete");
  CriticalManifold cm;
  cm.k = k;
  cm.det_L = layer.a_L0(k - 1);
  cm.det_R = layer.a_R0(k - 1);
  const double floor_L = 1e-14 * std::max(1.0, layer.a_L0.norm());
  const double floor_R = 1e-14 * std::max(1.0, layer.a_R0.norm());
  if (std::abs(cm.det_L) < floor_L || std::abs(cm.det_R) < floor_R)
    throw HypothesisError(
        "layer matrix is singular (trailing coefficient vanishes): the "
        "branch equilibria are undefined");
  auto branch = [k](const Vector& a0) {
    Vector v(k);
    v(0) = 1.0;
    if (k > 1) v.tail(k - 1) = a0.head(k - 1);
    return Vector(v / a0(k - 1));
  };
  cm.branch_L = branch(layer.a_L0);
  cm.branch_R = branch(layer.a_R0);
  cm.hurwitz = is_hurwitz(layer.A_L) && is_hurwitz(layer.A_R);
  // With Hurwitz pieces the trailing coefficients are products of root
  // negatives and must be positive; anything else means the eigensolve and
  // the coefficients disagree.
  if (cm.hurwitz && (cm.det_L <= 0.0 || cm.det_R <= 0.0))
    throw NumericalError(
        "Hurwitz layer matrices with non-positive trailing coefficient");
  return cm;
}

ReducedSystem reduced_system(const SfocfSystem& sys) {
  if (sys.k < 1 || sys.n <= sys.k)
    throw std::invalid_argument("reduction needs 1 <= k < n");
  const Limits lim = coefficient_limits(sys);
  const double ak_L = lim.a_L(sys.k - 1);
  const double ak_R = lim.a_R(sys.k - 1);
  if (std::abs(ak_L) < 1e-14 * std::max(1.0, lim.a_L.norm()) ||
      std::abs(ak_R) < 1e-14 * std::max(1.0, lim.a_R.norm()))
    throw HypothesisError(
        "layer matrix is singular (trailing coefficient vanishes): no "
        "reduced dynamics on the critical manifold");
  ReducedSystem red;
  red.m = sys.n - sys.k;
  red.B_L = companion_from_coeffs(Vector(lim.b_L / ak_L));
  red.B_R = companion_from_coeffs(Vector(lim.b_R / ak_R));
  red.mu = sys.mu;
  return red;
}

PlacedCoeffs place_eigenvalues(const std::vector<Complex>& fast,
                               const std::vector<Complex>& slow,
                               double epsilon) {
  if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");
  if (fast.empty() || slow.empty())
    throw std::invalid_argument("both eigenvalue groups must be non-empty");
  const Index k = static_cast<Index>(fast.size());
  const Index m = static_cast<Index>(slow.size());
  ComplexVector merged(k + m);
  for (Index i = 0; i < k; ++i) merged(i) = fast[static_cast<size_t>(i)];
  for (Index j = 0; j < m; ++j)
    merged(k + j) = epsilon * slow[static_cast<size_t>(j)];
  const Vector p = poly_from_roots(merged);

  PlacedCoeffs pc;
  pc.a = p.head(k);
  pc.b.resize(m);
  double scale = 1.0;
  for (Index j = 0; j < m; ++j) {
    scale *= epsilon;
    pc.b(j) = p(k + j) / scale;
  }
  if (!pc.a.allFinite() || !pc.b.allFinite())
    throw NumericalError(
        "coefficient overflow while unscaling the slow eigenvalues");

  ComplexVector fast_v(k), slow_v(m);
  for (Index i = 0; i < k; ++i) fast_v(i) = fast[static_cast<size_t>(i)];
  for (Index j = 0; j < m; ++j) slow_v(j) = slow[static_cast<size_t>(j)];
  pc.a0 = poly_from_roots(fast_v);
  pc.b0 = pc.a0(k - 1) * poly_from_roots(slow_v);
  return pc;
}

SfocfSystem place_system(Index k, const std::vector<Complex>& fast_L,
                         const std::vector<Complex>& slow_L,
                         const std::vector<Complex>& fast_R,
                         const std::vector<Complex>& slow_R, double epsilon,
                         double mu) {
  if (fast_L.size() != fast_R.size() || slow_L.size() != slow_R.size())
    throw std::invalid_argument("the two pieces must have matching sizes");
  if (static_cast<Index>(fast_L.size()) != k)
    throw std::invalid_argument("fast group size must equal k");
  const PlacedCoeffs left = place_eigenvalues(fast_L, slow_L, epsilon);
  const PlacedCoeffs right = place_eigenvalues(fast_R, slow_R, epsilon);

  SfocfSystem sys;
  sys.n = k + static_cast<Index>(slow_L.size());
  sys.k = k;
  sys.a_L = left.a;
  sys.a_R = right.a;
  sys.b_L = left.b;
  sys.b_R = right.b;
  sys.epsilon = epsilon;
  sys.mu = mu;
  sys.limit0 = SfocfLimits{left.a0, right.a0, left.b0, right.b0};

  // Round-trip verification: the assembled matrices must carry exactly the
  // requested spectra. Exhaustive pairing caps the check at n = 9.
  if (sys.n <= 9) {
    for (Side side : {Side::Left, Side::Right}) {
      const auto& fast = (side == Side::Left) ? fast_L : fast_R;
      const auto& slow = (side == Side::Left) ? slow_L : slow_R;
      ComplexVector want(sys.n);
      for (Index i = 0; i < k; ++i) want(i) = fast[static_cast<size_t>(i)];
      for (Index j = 0; j < sys.n - k; ++j)
        want(k + j) = epsilon * slow[static_cast<size_t>(j)];
      const ComplexVector got =
          eigenvalues(assemble_sfocf_matrix(sys, side)).values;
      double norm = 0.0;
      for (Index i = 0; i < sys.n; ++i)
        norm = std::max(norm, std::abs(want(i)));
      if (matched_max_distance(want, got) > 1e-8 * std::max(1.0, norm))
        throw NumericalError(
            "placed spectrum does not round-trip through the eigensolver");
    }
  }
  return sys;
}

FactorizationCheck eigen_factorization_check(
    const SfocfSystem& sys, const std::vector<double>& eps_grid,
    double slope_tol) {
  if (eps_grid.size() < 2)
    throw std::invalid_argument("need at least two grid points to fit slopes");
  for (double e : eps_grid)
    if (e <= 0.0) throw std::invalid_argument("grid epsilons must be positive");
  if (sys.n > 9)
    throw std::invalid_argument("exhaustive eigenvalue pairing caps n at 9");

  const LayerSystem layer = layer_system(sys);
  if (!is_hurwitz(layer.A_L) || !is_hurwitz(layer.A_R))
    throw HypothesisError(
        "time-scale factorization check needs Hurwitz layer matrices");
  const ReducedSystem red = reduced_system(sys);

  const ComplexVector fast_L = eigenvalues(layer.A_L).values;
  const ComplexVector fast_R = eigenvalues(layer.A_R).values;
  const ComplexVector nu_L = eigenvalues(red.B_L).values;
  const ComplexVector nu_R = eigenvalues(red.B_R).values;

  // Hold the coefficients at their limits over the whole grid; only the
  // assembled matrix depends on epsilon.
  const Limits lim = coefficient_limits(sys);
  SfocfSystem frozen = sys;
  frozen.a_L = lim.a_L;
  frozen.a_R = lim.a_R;
  frozen.b_L = lim.b_L;
  frozen.b_R = lim.b_R;
  frozen.limit0.reset();

  FactorizationCheck out;
  out.epsilons = eps_grid;
  const Index k = sys.k, m = sys.n - sys.k;
  for (double eps : eps_grid) {
    frozen.epsilon = eps;
    double fast_err = 0.0, slow_err = 0.0;
    for (Side side : {Side::Left, Side::Right}) {
      const ComplexVector& fast = (side == Side::Left) ? fast_L : fast_R;
      const ComplexVector& nu = (side == Side::Left) ? nu_L : nu_R;
      ComplexVector predicted(sys.n);
      predicted.head(k) = fast;
      predicted.tail(m) = eps * nu;
      const ComplexVector actual =
          eigenvalues(assemble_sfocf_matrix(frozen, side)).values;
      const auto perm = optimal_assignment(predicted, actual);
      double fe = 0.0, se = 0.0;
      for (Index i = 0; i < sys.n; ++i) {
        const double d =
            std::abs(predicted(i) - actual(perm[static_cast<size_t>(i)]));
        if (i < k)
          fe = std::max(fe, d);
        else
          se = std::max(se, d);
      }
      double gap = std::numeric_limits<double>::infinity();
      for (Index i = 0; i < k; ++i)
        for (Index j = 0; j < m; ++j)
          gap = std::min(gap, std::abs(fast(i) - eps * nu(j)));
      if (fe > 0.25 * gap || se > 0.25 * gap) out.pairing_ambiguous = true;
      fast_err = std::max(fast_err, fe);
      slow_err = std::max(slow_err, se);
    }
    out.fast_errors.push_back(fast_err);
    out.slow_errors.push_back(slow_err);
  }

  std::vector<double> lx, lf, ls;
  for (size_t i = 0; i < eps_grid.size(); ++i) {
    lx.push_back(std::log(eps_grid[i]));
    lf.push_back(std::log(std::max(out.fast_errors[i], 1e-300)));
    ls.push_back(std::log(std::max(out.slow_errors[i], 1e-300)));
  }
  out.fast_slope = fit_line(lx, lf).slope;
  out.slow_slope = fit_line(lx, ls).slope;
  out.pass = std::abs(out.fast_slope - 1.0) <= slope_tol &&
             std::abs(out.slow_slope - 2.0) <= slope_tol;
  return out;
}

PieceClass classify_piece_2d(const Matrix& B, double tol) {
  if (B.rows() != 2 || B.cols() != 2)
    throw std::invalid_argument("planar classification needs a 2x2 matrix");
  PieceClass c;
  c.trace = B.trace();
  c.det = B.determinant();
  c.discriminant = c.trace * c.trace - 4.0 * c.det;
  // Thresholds scale like the quantities themselves, so the labels are
  // invariant under B -> s B for s > 0.
  const double s = B.norm();
  const double t1 = tol * s, t2 = tol * s * s;
  if (c.det < -t2) {
    c.kind = "saddle";
    return c;
  }
  if (c.det <= t2) {
    c.kind = "degenerate";
    c.borderline = true;
    c.attracting = c.trace < 0.0;
    return c;
  }
  if (std::abs(c.trace) <= t1) {
    c.kind = "center";
    c.borderline = true;
    return c;
  }
  c.attracting = c.trace < 0.0;
  if (c.discriminant < -t2) {
    c.kind = "focus";
  } else {
    c.kind = "node";
    c.borderline = c.discriminant <= t2;
  }
  return c;
}

Classification2d classify_2d(const ReducedSystem& red, double tol) {
  if (red.m != 2)
    throw std::invalid_argument(
        "reduced classification is only defined for two slow variables");
  Classification2d cls;
  cls.left = classify_piece_2d(red.B_L, tol);
  cls.right = classify_piece_2d(red.B_R, tol);
  const bool left_attracting =
      cls.left.attracting &&
      (cls.left.kind == "node" || cls.left.kind == "focus");
  if (cls.right.kind == "focus" && !cls.right.attracting && left_attracting)
    cls.prediction =
        "Hopf-like bifurcation creating a small amplitude oscillation";
  else if (cls.right.kind == "node" && !cls.right.attracting)
    cls.prediction = "no limit cycle is created locally";
  else
    cls.prediction = "no local prediction for this configuration";
  return cls;
}

namespace {

struct SplitSpectrum {
  std::vector<size_t> fast_idx, slow_idx;  // into the sorted-by-|.| order
  double gap = 0.0;
};

SplitSpectrum split_by_magnitude(const ComplexVector& values, Index k) {
  std::vector<size_t> order(static_cast<size_t>(values.size()));
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t i, size_t j) {
    return std::abs(values(static_cast<Index>(i))) >
           std::abs(values(static_cast<Index>(j)));
  });
  SplitSpectrum sp;
  for (size_t i = 0; i < order.size(); ++i)
    (static_cast<Index>(i) < k ? sp.fast_idx : sp.slow_idx).push_back(order[i]);
  const double min_fast = std::abs(values(static_cast<Index>(sp.fast_idx.back())));
  const double max_slow = std::abs(values(static_cast<Index>(sp.slow_idx.front())));
  sp.gap = (max_slow > 0.0) ? min_fast / max_slow
                            : std::numeric_limits<double>::infinity();
  return sp;
}

// Real orthonormal basis of the invariant subspace spanned by the selected
// eigenvectors; conjugate pairs contribute their real and imaginary parts.
Matrix real_basis(const EigenPairs& ep, const std::vector<size_t>& idx) {
  const Index n = ep.vectors.rows();
  std::vector<Vector> cols;
  std::vector<char> used(idx.size(), 0);
  for (size_t ii = 0; ii < idx.size(); ++ii) {
    if (used[ii]) continue;
    const Index i = static_cast<Index>(idx[ii]);
    const Complex lam = ep.values(i);
    const double scale = std::max(1.0, std::abs(lam));
    if (std::abs(lam.imag()) <= 1e-9 * scale) {
      cols.push_back(ep.vectors.col(i).real());
      used[ii] = 1;
      continue;
    }
    size_t jj = ii;
    double best = std::numeric_limits<double>::infinity();
    for (size_t cand = ii + 1; cand < idx.size(); ++cand) {
      if (used[cand]) continue;
      const double d =
          std::abs(ep.values(static_cast<Index>(idx[cand])) - std::conj(lam));
      if (d < best) {
        best = d;
        jj = cand;
      }
    }
    if (jj == ii || best > 1e-6 * scale)
      throw NumericalError("conjugate eigenvalue pair straddles the split");
    cols.push_back(ep.vectors.col(i).real());
    cols.push_back(ep.vectors.col(i).imag());
    used[ii] = used[jj] = 1;
  }
  Matrix V(n, static_cast<Index>(cols.size()));
  for (size_t c = 0; c < cols.size(); ++c)
    V.col(static_cast<Index>(c)) = cols[c];
  Eigen::HouseholderQR<Matrix> qr(V);
  return qr.householderQ() * Matrix::Identity(n, V.cols());
}

double subspace_residual(const Matrix& C, const Matrix& V) {
  const Matrix CV = C * V;
  const Matrix rest = CV - V * (V.transpose() * CV);
  return rest.norm() / std::max(1.0, C.norm());
}

}  // namespace

SlowManifoldPair slow_manifolds(const SfocfSystem& sys, double min_gap) {
  if (sys.epsilon <= 0.0)
    throw std::invalid_argument("slow manifolds need epsilon > 0");
  if (sys.k < 1 || sys.n <= sys.k)
    throw std::invalid_argument("need 1 <= k < n");
  SlowManifoldPair out;
  for (Side side : {Side::Left, Side::Right}) {
    const Matrix C = assemble_sfocf_matrix(sys, side);
    const EigenPairs ep = eigen_pairs(C);
    const SplitSpectrum sp = split_by_magnitude(ep.values, sys.k);
    if (!(sp.gap >= min_gap))
      throw HypothesisError(
          "time-scale gap too small to split the spectrum reliably");
    const Matrix V = real_basis(ep, sp.slow_idx);
    const double res = subspace_residual(C, V);
    if (res > 1e-8)
      throw NumericalError("invariant subspace residual exceeds tolerance");
    Vector anchor = Vector::Zero(sys.n);
    Eigen::FullPivLU<Matrix> lu(C);
    if (lu.isInvertible()) anchor = lu.solve(Vector(-sfocf_forcing(sys)));
    if (side == Side::Left) {
      out.basis_L = V;
      out.anchor_L = anchor;
      out.residual_L = res;
      out.gap_L = sp.gap;
    } else {
      out.basis_R = V;
      out.anchor_R = anchor;
      out.residual_R = res;
      out.gap_R = sp.gap;
    }
  }
  return out;
}

BebReduction beb_reduction(const BebLinearization& lin, Index k,
                           double epsilon) {
  if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");
  const Index n = lin.jac_left.rows();
  if (k < 1 || k >= n) throw std::invalid_argument("need 1 <= k < n");
  BebReduction out;
  for (Side side : {Side::Left, Side::Right}) {
    const Matrix& J = (side == Side::Left) ? lin.jac_left : lin.jac_right;
    const ComplexVector ev = eigenvalues(J).values;
    const SplitSpectrum sp = split_by_magnitude(ev, k);
    std::vector<Complex> fast, slow;
    for (size_t i : sp.fast_idx) fast.push_back(ev(static_cast<Index>(i)));
    for (size_t i : sp.slow_idx)
      slow.push_back(ev(static_cast<Index>(i)) / epsilon);
    ComplexVector slow_v(static_cast<Index>(slow.size()));
    for (Index i = 0; i < slow_v.size(); ++i)
      slow_v(i) = slow[static_cast<size_t>(i)];
    const Matrix B = companion_from_coeffs(poly_from_roots(slow_v));
    if (side == Side::Left) {
      out.fast_L = std::move(fast);
      out.slow_L = std::move(slow);
      out.B_L = B;
    } else {
      out.fast_R = std::move(fast);
      out.slow_R = std::move(slow);
      out.B_R = B;
    }
  }
  return out;
}

namespace {

struct OrbitLog {
  std::vector<double> t, logd;
  double d0 = 0.0;
};

}  // namespace

StabilityReport stability_probe(const LayerSystem& layer,
                                const StabilityProbeConfig& cfg) {
  StabilityReport rep;
  const double rate_L = max_real_part(layer.A_L);
  const double rate_R = max_real_part(layer.A_R);
  const double max_re = std::max(rate_L, rate_R);
  if (max_re >= 0.0) {
    rep.verdict = "inconclusive";
    rep.reason = "a layer matrix is not Hurwitz";
    return rep;
  }
  const CriticalManifold cm = critical_manifold(layer);
  const Index k = layer.k;
  const double T = 50.0 / std::abs(max_re);

  IntegratorConfig icfg;
  icfg.horizon = T;
  // distance to the branch point is monitored in the observer instead
  icfg.divergence_norm = std::numeric_limits<double>::infinity();

  struct Batch {
    double y1, radius;
    uint64_t task;
  };
  std::vector<Batch> batches;
  uint64_t task = 0;
  for (double y1 : {-1.0, 0.0, 1.0})
    for (double r : cfg.radii) batches.push_back({y1, r, task++});

  const size_t per_batch = static_cast<size_t>(cfg.points_per_sphere);
  std::vector<std::vector<OrbitLog>> logs(batches.size());
  std::vector<std::optional<Vector>> witnesses(batches.size());

  parallel_for(static_cast<Index>(batches.size()), [&](Index bi) {
    const Batch& b = batches[static_cast<size_t>(bi)];
    const Vector target = cm.at(b.y1);
    const OdeSystem ode =
        make_ode(layer.A_L, layer.A_R, Vector(Vector::Unit(k, k - 1) * b.y1));
    Rng rng(task_seed(cfg.seed, b.task));
    auto& batch_logs = logs[static_cast<size_t>(bi)];
    batch_logs.reserve(per_batch);
    // Distances below the integrator's own error scale are noise; stop
    // recording there so plateaus do not pollute the envelope fit.
    const double d_floor = 1e-6 * (1.0 + target.norm() + b.radius);
    for (size_t p = 0; p < per_batch; ++p) {
      const Vector x0 = target + b.radius * rng.sphere(k);
      OrbitLog log;
      log.d0 = b.radius;
      bool escaped = false;
      // decimate on the fly so long orbits stay within a fixed budget
      size_t stride = 1, since = 0;
      integrate_observe(
          ode, x0, icfg,
          [&](double t, const Vector& x, int) {
            const double d = (x - target).norm();
            if (d > cfg.divergence) {
              escaped = true;
              return false;
            }
            if (++since >= stride) {
              since = 0;
              log.t.push_back(t);
              log.logd.push_back(std::log(std::max(d, 1e-300)));
              if (log.t.size() >= 1024) {
                for (size_t i = 1; 2 * i < log.t.size(); ++i) {
                  log.t[i] = log.t[2 * i];
                  log.logd[i] = log.logd[2 * i];
                }
                log.t.resize(log.t.size() / 2);
                log.logd.resize(log.logd.size() / 2);
                stride *= 2;
              }
            }
            return d >= d_floor;
          });
      if (escaped) {
        if (!witnesses[static_cast<size_t>(bi)]) {
          Vector w(k + 1);
          w.head(k) = x0;
          w(k) = b.y1;
          witnesses[static_cast<size_t>(bi)] = w;
        }
        continue;
      }
      batch_logs.push_back(std::move(log));
    }
  });

  rep.samples = static_cast<long long>(batches.size() * per_batch);
  for (const auto& w : witnesses) {
    if (w) {
      rep.verdict = "unstable-witness";
      rep.reason = "an orbit left the divergence threshold";
      rep.witness = *w;
      return rep;
    }
  }

  // Weakest decay over all orbits, fitted on the second half of each.
  double beta = std::numeric_limits<double>::infinity();
  bool any_fit = false;
  for (const auto& batch_logs : logs) {
    for (const OrbitLog& log : batch_logs) {
      if (log.t.size() < 8) continue;  // collapsed to the floor immediately
      const double t_mid = 0.5 * log.t.back();
      std::vector<double> xs, ys;
      for (size_t i = 0; i < log.t.size(); ++i) {
        if (log.t[i] >= t_mid) {
          xs.push_back(log.t[i]);
          ys.push_back(log.logd[i]);
        }
      }
      if (xs.size() < 4 || xs.back() <= xs.front()) continue;
      beta = std::min(beta, -fit_line(xs, ys).slope);
      any_fit = true;
    }
  }
  // A bounded orbit that does not decay fits a near-zero slope; demand a
  // rate that is visible against the fastest time scale probed.
  const double beta_floor = 1e-3 * std::abs(max_re);
  if (!any_fit || !(beta > beta_floor) || !std::isfinite(beta)) {
    rep.verdict = "inconclusive";
    rep.reason = "no exponential decay envelope could be fitted";
    return rep;
  }
  rep.beta_hat = beta;

  double alpha = 1.0;
  for (const auto& batch_logs : logs)
    for (const OrbitLog& log : batch_logs)
      for (size_t i = 0; i < log.t.size(); ++i)
        alpha = std::max(
            alpha, std::exp(log.logd[i] + beta * log.t[i]) / log.d0);
  rep.alpha_hat = alpha;
  rep.verdict = "stable-evidence";
  rep.reason = "all sampled orbits decay inside the fitted envelope";
  return rep;
}

namespace {

// Final state after time t, plus the largest state norm seen on the way.
// Near-pure relative error control: an absolute floor in the step
// controller would break the exact commutation of the flow map with
// positive scaling.
std::pair<Vector, double> flow_to(const OdeSystem& ode, const Vector& x0,
                                  double t) {
  IntegratorConfig icfg;
  icfg.horizon = t;
  icfg.abs_tol = 1e-14;
  icfg.divergence_norm = std::numeric_limits<double>::infinity();
  Vector last = x0;
  double max_norm = x0.norm();
  integrate_observe(ode, x0, icfg, [&](double, const Vector& x, int) {
    last = x;
    max_norm = std::max(max_norm, x.norm());
    return true;
  });
  return {last, max_norm};
}

}  // namespace

HomogeneityCheck homogeneity_check(const LayerSystem& layer, uint64_t seed,
                                   int draws) {
  HomogeneityCheck hc;
  hc.draws = draws;
  const Index k = layer.k;
  Rng rng(seed);
  const double abs_tol = 1e-14;
  const double rel_tol = IntegratorConfig{}.rel_tol;

  const OdeSystem ode0 = make_ode(layer.A_L, layer.A_R, Vector::Zero(k));
  const OdeSystem ode1 =
      make_ode(layer.A_L, layer.A_R, Vector(Vector::Unit(k, k - 1)));

  for (int d = 0; d < draws; ++d) {
    const double t = rng.uniform(0.2, 3.0);
    const Vector x = rng.uniform(0.5, 2.0) * rng.sphere(k);
    const double xi = std::exp(rng.uniform(std::log(0.1), std::log(10.0)));
    const double y1 = std::exp(rng.uniform(std::log(0.1), std::log(10.0)));

    // scaling commutes with the flow when the slow input is zero
    const auto base = flow_to(ode0, x, t);
    const auto scaled = flow_to(ode0, Vector(xi * x), t);
    const double err0 = (xi * base.first - scaled.first).norm();
    const double bound0 =
        10.0 * (abs_tol * (1.0 + xi) + rel_tol * xi * base.second);
    hc.worst_zero_input = std::max(hc.worst_zero_input, err0 / bound0);

    // a positive slow input can be scaled out instead
    const OdeSystem odeY =
        make_ode(layer.A_L, layer.A_R, Vector(Vector::Unit(k, k - 1) * y1));
    const auto lhs = flow_to(odeY, x, t);
    const auto unit = flow_to(ode1, Vector(x / y1), t);
    const double err1 = (lhs.first - y1 * unit.first).norm();
    const double bound1 =
        10.0 * (abs_tol * (1.0 + y1) +
                rel_tol * std::max(lhs.second, y1 * unit.second));
    hc.worst_slow_scaling = std::max(hc.worst_slow_scaling, err1 / bound1);
  }
  hc.pass = hc.worst_zero_input <= 1.0 && hc.worst_slow_scaling <= 1.0;
  return hc;
}

}  // namespace pwlsf
