#include "pwlsf/experiments.hpp"

#include "pwlsf/linalg.hpp"
#include "pwlsf/util.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace pwlsf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Integrate to each horizon in ts (ascending, positive), reusing the final
// state; the systems are autonomous so segment continuation is exact.
std::vector<Vector> states_at(const OdeSystem& sys, const Vector& z0,
                              const std::vector<double>& ts,
                              IntegratorConfig cfg) {
  std::vector<Vector> out;
  out.reserve(ts.size());
  Vector z = z0;
  double t_prev = 0.0;
  for (double t : ts) {
    if (!(t > t_prev))
      throw std::invalid_argument("comparison times must be increasing");
    cfg.horizon = t - t_prev;
    Diagnostics diag;
    Vector last = z;
    integrate_observe(
        sys, z, cfg,
        [&](double, const Vector& s, int) {
          last = s;
          return true;
        },
        &diag, nullptr);
    if (diag.diverged)
      throw NumericalError("trajectory diverged during a matched-time run");
    z = last;
    t_prev = t;
    out.push_back(z);
  }
  return out;
}

std::vector<Vector> sfocf_equilibria(const SfocfSystem& sys) {
  std::vector<Vector> out;
  const Vector forcing = sfocf_forcing(sys);
  for (Side side : {Side::Left, Side::Right}) {
    const Matrix M = assemble_sfocf_matrix(sys, side);
    Eigen::FullPivLU<Matrix> lu(M);
    if (!lu.isInvertible()) continue;
    const Vector z = lu.solve(-forcing);
    const double slack = 1e-12 * (1.0 + z.norm());
    const bool admissible =
        side == Side::Left ? z(0) <= slack : z(0) >= -slack;
    if (!admissible) continue;
    bool duplicate = false;
    for (const auto& w : out)
      duplicate = duplicate || (w - z).norm() <= 1e-10 * (1.0 + z.norm());
    if (!duplicate) out.push_back(z);
  }
  return out;
}

builtin::OceanParams with_ocean_param(builtin::OceanParams p,
                                      const std::string& name, double v) {
  if (name == "a") p.a = v;
  else if (name == "b") p.b = v;
  else if (name == "delta") p.delta = v;
  else if (name == "epsilon") p.epsilon = v;
  else if (name == "A") p.A = v;
  else if (name == "lambda0") p.lambda0 = v;
  else throw std::invalid_argument("unknown circulation parameter: " + name);
  return p;
}

// Boundary samples of the unit shape together with outward unit normals of
// the transformed region. Deterministic: grids in one and two dimensions,
// a fixed-seed sphere sequence above that.
void for_each_boundary_sample(
    const TrappingRegion& region, const Matrix& S,
    const std::function<void(const Vector&, const Vector&)>& visit) {
  const Index m = region.center.size();
  const Matrix SinvT = S.inverse().transpose();
  auto emit = [&](const Vector& u, const Vector& unit_normal_pre) {
    Vector n = SinvT * unit_normal_pre;
    visit(region.center + S * u, n / n.norm());
  };
  const int total = std::max(region.boundary_samples, 2 * int(m));
  if (region.shape == TrappingRegion::Shape::Ball) {
    if (m == 1) {
      emit(Vector::Ones(1), Vector::Ones(1));
      emit(-Vector::Ones(1), -Vector::Ones(1));
    } else if (m == 2) {
      for (int j = 0; j < total; ++j) {
        const double th = 6.283185307179586477 * j / total;
        Vector u(2);
        u << std::cos(th), std::sin(th);
        emit(u, u);
      }
    } else {
      Rng rng(12345);
      for (int j = 0; j < total; ++j) {
        const Vector u = rng.sphere(m);
        emit(u, u);
      }
    }
    return;
  }
  // box: per-face grids (m <= 2) or per-face uniform draws
  const int faces = 2 * int(m);
  const int per_face = std::max(2, total / faces);
  Rng rng(12345);
  for (Index axis = 0; axis < m; ++axis) {
    for (double sign : {-1.0, 1.0}) {
      const Vector normal_pre = sign * Vector::Unit(m, axis);
      for (int j = 0; j < per_face; ++j) {
        Vector u(m);
        if (m == 1) {
          u(0) = sign;
          emit(u, normal_pre);
          break;
        }
        for (Index i = 0; i < m; ++i) {
          if (i == axis) { u(i) = sign; continue; }
          u(i) = m == 2 ? -1.0 + 2.0 * j / (per_face - 1)
                        : rng.uniform(-1.0, 1.0);
        }
        emit(u, normal_pre);
      }
    }
  }
}

}  // namespace

OdeSystem reduced_ode(const ReducedSystem& red) {
  if (red.m <= 0) throw std::invalid_argument("reduced system is empty");
  OdeSystem ode;
  ode.n = red.m;
  const Matrix BL = red.B_L, BR = red.B_R;
  const double mu = red.mu;
  ode.field_left = [BL, mu](const Vector& y, Vector& out) {
    out.noalias() = BL * y;
    out(out.size() - 1) += mu;
  };
  ode.field_right = [BR, mu](const Vector& y, Vector& out) {
    out.noalias() = BR * y;
    out(out.size() - 1) += mu;
  };
  ode.h = [](const Vector& y) { return y(0); };
  return ode;
}

CycleBounds limit_cycle_bounds(const OdeSystem& sys, const Vector& z0,
                               Index observable, const IntegratorConfig& cfg) {
  if (observable < 0 || observable >= sys.n)
    throw std::invalid_argument("observable index out of range");
  CycleBounds cb;
  cb.window_start = cfg.transient_fraction * cfg.horizon;
  cb.window_mid = 0.5 * (cb.window_start + cfg.horizon);
  cb.window_end = cfg.horizon;
  double lo1 = kInf, hi1 = -kInf, lo2 = kInf, hi2 = -kInf;
  Diagnostics diag;
  integrate_observe(
      sys, z0, cfg,
      [&](double t, const Vector& s, int) {
        if (t >= cb.window_start) {
          const double v = s(observable);
          if (t < cb.window_mid) {
            lo1 = std::min(lo1, v);
            hi1 = std::max(hi1, v);
          } else {
            lo2 = std::min(lo2, v);
            hi2 = std::max(hi2, v);
          }
        }
        return true;
      },
      &diag, nullptr);
  if (diag.diverged || !(lo1 <= hi1) || !(lo2 <= hi2)) {
    cb.diverged = diag.diverged;
    cb.min = cb.max = kNan;
    return cb;
  }
  cb.min = std::min(lo1, lo2);
  cb.max = std::max(hi1, hi2);
  const double tol = 1e-6 + 1e-2 * (hi2 - lo2);
  cb.converged = std::abs(lo1 - lo2) <= tol && std::abs(hi1 - hi2) <= tol;
  return cb;
}

SystemFamily sfocf_family(const SfocfSystem& base,
                          const std::string& parameter) {
  if (parameter != "epsilon" && parameter != "mu")
    throw std::invalid_argument(
        "coefficient families vary only epsilon or mu");
  const bool vary_eps = parameter == "epsilon";
  SystemFamily fam;
  fam.parameter = parameter;
  fam.make = [base, vary_eps](double v) {
    SfocfSystem sys = base;
    if (vary_eps) sys.epsilon = v; else sys.mu = v;
    return make_ode(sys);
  };
  fam.admissible_equilibria = [base, vary_eps](double v) {
    SfocfSystem sys = base;
    if (vary_eps) sys.epsilon = v; else sys.mu = v;
    return sfocf_equilibria(sys);
  };
  return fam;
}

SystemFamily ocean_family(const builtin::OceanParams& base,
                          const std::string& parameter) {
  with_ocean_param(base, parameter, 0.0);  // validate the name now
  SystemFamily fam;
  fam.parameter = parameter;
  fam.make = [base, parameter](double v) {
    return builtin::ocean_ode(with_ocean_param(base, parameter, v));
  };
  fam.admissible_equilibria = [base, parameter](double v) {
    const builtin::OceanParams p = with_ocean_param(base, parameter, v);
    std::vector<Vector> out;
    for (Side side : {Side::Left, Side::Right}) {
      const auto eq = builtin::ocean_equilibrium(p, side);
      if (!eq.admissible) continue;
      bool duplicate = false;
      for (const auto& w : out)
        duplicate =
            duplicate || (w - eq.state).norm() <= 1e-10 * (1.0 + w.norm());
      if (!duplicate) out.push_back(eq.state);
    }
    return out;
  };
  return fam;
}

SweepResult sweep(const SystemFamily& family, const std::vector<double>& grid,
                  Index observable, const IntegratorConfig& cfg,
                  double perturbation) {
  SweepResult res;
  res.parameter = family.parameter;
  res.observable = observable;
  res.points.resize(grid.size());
  parallel_for(static_cast<Index>(grid.size()), [&](Index i) {
    SweepPoint& pt = res.points[static_cast<size_t>(i)];
    pt.parameter = grid[static_cast<size_t>(i)];
    try {
      const OdeSystem ode = family.make(pt.parameter);
      const auto eqs = family.admissible_equilibria(pt.parameter);
      pt.admissible_count = static_cast<int>(eqs.size());
      if (eqs.empty()) {
        pt.failed = true;
        pt.error = "no admissible equilibrium";
        return;
      }
      pt.has_equilibrium = true;
      pt.equilibrium = eqs.front();
      pt.equilibrium_value = pt.equilibrium(observable);
      const Vector z0 =
          pt.equilibrium +
          Vector::Constant(ode.n, perturbation / std::sqrt(double(ode.n)));
      pt.cycle = limit_cycle_bounds(ode, z0, observable, cfg);
    } catch (const std::exception& e) {
      pt.failed = true;
      pt.error = e.what();
    }
  });
  return res;
}

Matrix region_shape_matrix(const TrappingRegion& region) {
  const Index m = region.center.size();
  if (m == 0 || region.extents.size() != m)
    throw std::invalid_argument("region center/extents sizes disagree");
  if ((region.extents.array() <= 0.0).any())
    throw std::invalid_argument("region extents must be positive");
  Matrix S = Matrix(region.extents.asDiagonal());
  if (region.transform.size() != 0) {
    if (region.transform.rows() != m || region.transform.cols() != m)
      throw std::invalid_argument("region transform shape mismatch");
    S = region.transform * S;
  }
  if (!Eigen::FullPivLU<Matrix>(S).isInvertible())
    throw std::invalid_argument("region has empty interior");
  return S;
}

bool region_contains(const TrappingRegion& region, const Vector& y,
                     double slack) {
  const Matrix S = region_shape_matrix(region);
  if (y.size() != region.center.size())
    throw std::invalid_argument("point dimension mismatch");
  const Vector u = S.fullPivLu().solve(y - region.center);
  return region.shape == TrappingRegion::Shape::Box
             ? u.lpNorm<Eigen::Infinity>() <= 1.0 + slack
             : u.norm() <= 1.0 + slack;
}

TrappingReport check_strong_trapping(const ReducedSystem& red,
                                     const TrappingRegion& region,
                                     double margin) {
  if (region.center.size() != red.m)
    throw std::invalid_argument("region dimension mismatch");
  const Matrix S = region_shape_matrix(region);
  TrappingReport rep;
  rep.worst_inner = -kInf;
  Vector f(red.m);
  for_each_boundary_sample(region, S, [&](const Vector& p, const Vector& n) {
    f.noalias() = (p(0) >= 0.0 ? red.B_R : red.B_L) * p;
    f(red.m - 1) += red.mu;
    const double inner = f.dot(n);
    if (inner > rep.worst_inner) {
      rep.worst_inner = inner;
      rep.worst_point = p;
    }
    ++rep.samples;
  });
  rep.pass = rep.worst_inner < -margin;
  return rep;
}

InvarianceReport invariance_experiment(const SfocfSystem& base,
                                       const TrappingRegion& region,
                                       const InvarianceConfig& cfg) {
  if (cfg.epsilons.empty())
    throw std::invalid_argument("epsilon grid is empty");
  for (double e : cfg.epsilons)
    if (!(e > 0.0)) throw std::invalid_argument("epsilons must be positive");
  if (!(cfg.M > 0.0) || !(cfg.N > 0.0) || cfg.samples <= 0)
    throw std::invalid_argument("M, N, and samples must be positive");
  const Index k = base.k, m = base.n - base.k;
  if (region.center.size() != m)
    throw std::invalid_argument("region dimension mismatch");

  const LayerSystem layer = layer_system(base);
  const CriticalManifold cm = critical_manifold(layer);
  std::string note;
  const TrappingReport trap = check_strong_trapping(reduced_system(base), region);
  if (!trap.pass) {
    std::ostringstream os;
    os << "region is not strongly trapping for the reduced flow "
          "(worst boundary inner product "
       << trap.worst_inner << ")";
    note = os.str();
  } else {
    const StabilityReport probe = stability_probe(layer, cfg.probe);
    if (probe.verdict != "stable-evidence")
      note = "layer stability probe returned " + probe.verdict + ": " +
             probe.reason;
  }
  InvarianceReport rep;
  if (!note.empty() && !cfg.override_hypotheses) throw HypothesisError(note);
  rep.hypothesis_note =
      note.empty() ? "hypotheses verified" : note + " (overridden)";

  const Matrix S = region_shape_matrix(region);
  const Matrix Sinv = S.inverse();
  const bool box = region.shape == TrappingRegion::Shape::Box;

  bool all_clean = true;
  for (size_t ei = 0; ei < cfg.epsilons.size(); ++ei) {
    const double eps = cfg.epsilons[ei];
    SfocfSystem sys = base;
    sys.epsilon = eps;
    const OdeSystem ode = make_ode(sys);
    IntegratorConfig icfg = cfg.integrator;
    icfg.horizon = cfg.horizon_slow_units / eps;

    std::vector<double> sup_ratio(cfg.samples, 0.0);
    std::vector<char> violated(cfg.samples, 0);
    std::vector<Vector> exits(cfg.samples);
    parallel_for(cfg.samples, [&](Index i) {
      const size_t si = static_cast<size_t>(i);
      Rng rng(task_seed(cfg.seed, ei * std::uint64_t(cfg.samples) +
                                      std::uint64_t(i)));
      Vector u(m);
      if (box) {
        for (Index j = 0; j < m; ++j) u(j) = rng.uniform(-1.0, 1.0);
      } else {
        u = rng.sphere(m) * std::pow(rng.uniform(), 1.0 / double(m));
      }
      const Vector y = region.center + S * u;
      Vector z0(base.n);
      z0.head(k) = cm.at(y(0)) + eps * cfg.M * rng.sphere(k);
      z0.tail(m) = y;

      double worst = 0.0;
      Diagnostics diag;
      integrate_observe(
          ode, z0, icfg,
          [&](double, const Vector& s, int) {
            const double y1 = s(k);
            const double dist = (s.head(k) - cm.at(y1)).norm();
            worst = std::max(worst, dist / eps);
            const Vector us = Sinv * (s.tail(m) - region.center);
            const bool inside =
                box ? us.lpNorm<Eigen::Infinity>() <= 1.0 + 1e-9
                    : us.norm() <= 1.0 + 1e-9;
            if (!inside || dist > eps * cfg.N * (1.0 + 1e-9)) {
              violated[si] = 1;
              exits[si] = s;
              return false;
            }
            return true;
          },
          &diag, nullptr);
      if (diag.diverged) violated[si] = 1;
      sup_ratio[si] = worst;
    });

    InvarianceEpsReport er;
    er.epsilon = eps;
    for (size_t si = 0; si < size_t(cfg.samples); ++si) {
      er.min_admissible_N = std::max(er.min_admissible_N, sup_ratio[si]);
      if (violated[si]) {
        ++er.violations;
        if (er.exit_states.size() < 5 && exits[si].size() > 0)
          er.exit_states.push_back(exits[si]);
      }
    }
    all_clean = all_clean && er.violations == 0;
    rep.per_eps.push_back(std::move(er));
  }
  rep.pass = all_clean;
  return rep;
}

PerturbationReport perturbation_bound_experiment(
    const SfocfSystem& base, const std::vector<Vector>& starts, double T,
    const std::vector<double>& eps_grid, double ratio_bound,
    const IntegratorConfig& icfg) {
  if (starts.empty()) throw std::invalid_argument("no start states");
  if (!(T > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (eps_grid.empty()) throw std::invalid_argument("epsilon grid is empty");

  PerturbationReport rep;
  const int mtimes = 40;
  rep.comparison_times = mtimes;
  std::vector<double> ts(mtimes);
  for (int j = 0; j < mtimes; ++j) ts[j] = T * (j + 1) / mtimes;

  SfocfSystem frozen = base;
  frozen.epsilon = 0.0;
  const OdeSystem ode0 = make_ode(frozen);
  std::vector<std::vector<Vector>> baseline;
  baseline.reserve(starts.size());
  for (const Vector& z0 : starts)
    baseline.push_back(states_at(ode0, z0, ts, icfg));

  for (double eps : eps_grid) {
    if (eps < 0.0) throw std::invalid_argument("epsilons must be >= 0");
    rep.epsilons.push_back(eps);
    if (eps == 0.0) {
      rep.K_hat.push_back(0.0);  // identical flows; the ratio is 0 / 0
      continue;
    }
    SfocfSystem sys = base;
    sys.epsilon = eps;
    const OdeSystem ode = make_ode(sys);
    double K = 0.0;
    for (size_t s = 0; s < starts.size(); ++s) {
      const auto st = states_at(ode, starts[s], ts, icfg);
      for (int j = 0; j < mtimes; ++j)
        K = std::max(K, (st[j] - baseline[s][j]).norm() / (eps * ts[j]));
    }
    rep.K_hat.push_back(K);
  }

  double lo = kInf, hi = 0.0;
  for (size_t i = 0; i < rep.epsilons.size(); ++i) {
    if (rep.epsilons[i] == 0.0) continue;
    lo = std::min(lo, rep.K_hat[i]);
    hi = std::max(hi, rep.K_hat[i]);
  }
  rep.ratio = hi == 0.0 ? 1.0 : (lo > 0.0 ? hi / lo : kInf);
  rep.bounded = rep.ratio < ratio_bound;
  return rep;
}

ReducedVsFullReport reduced_vs_full_comparison(const SfocfSystem& base,
                                               const Vector& y0,
                                               const ComparisonConfig& cfg) {
  const Index k = base.k, m = base.n - base.k;
  if (y0.size() != m) throw std::invalid_argument("slow start size mismatch");
  if (cfg.epsilons.empty())
    throw std::invalid_argument("epsilon grid is empty");
  for (double e : cfg.epsilons)
    if (!(e > 0.0)) throw std::invalid_argument("epsilons must be positive");
  if (!(cfg.slow_horizon > 0.0) || cfg.comparison_times < 2)
    throw std::invalid_argument("bad comparison window");

  const LayerSystem layer = layer_system(base);
  const CriticalManifold cm = critical_manifold(layer);
  std::string note;
  const StabilityReport probe = stability_probe(layer, cfg.probe);
  if (probe.verdict != "stable-evidence")
    note = "layer stability probe returned " + probe.verdict + ": " +
           probe.reason;
  ReducedVsFullReport rep;
  if (!note.empty() && !cfg.override_hypotheses) throw HypothesisError(note);
  rep.hypothesis_note =
      note.empty() ? "hypotheses verified" : note + " (overridden)";

  std::vector<double> taus(cfg.comparison_times);
  for (int j = 0; j < cfg.comparison_times; ++j)
    taus[j] = cfg.slow_horizon * (j + 1) / cfg.comparison_times;
  const OdeSystem rode = reduced_ode(reduced_system(base));
  const auto red_states = states_at(rode, y0, taus, cfg.integrator);

  for (double eps : cfg.epsilons) {
    SfocfSystem sys = base;
    sys.epsilon = eps;
    const OdeSystem ode = make_ode(sys);
    Vector z0(base.n);
    z0.head(k) = cm.at(y0(0));
    z0.tail(m) = y0;
    std::vector<double> ts(taus);
    for (double& t : ts) t /= eps;
    const auto full = states_at(ode, z0, ts, cfg.integrator);
    double d = 0.0;
    for (int j = 0; j < cfg.comparison_times; ++j)
      d = std::max(d, (full[size_t(j)].tail(m) - red_states[size_t(j)])
                          .lpNorm<Eigen::Infinity>());
    rep.epsilons.push_back(eps);
    rep.discrepancies.push_back(d);
  }

  if (rep.epsilons.size() >= 2) {
    std::vector<double> lx, ly;
    for (size_t i = 0; i < rep.epsilons.size(); ++i) {
      if (rep.discrepancies[i] <= 0.0) continue;
      lx.push_back(std::log(rep.epsilons[i]));
      ly.push_back(std::log(rep.discrepancies[i]));
    }
    if (lx.size() >= 2) rep.slope = fit_line(lx, ly).slope;
  }
  return rep;
}

}  // namespace pwlsf
