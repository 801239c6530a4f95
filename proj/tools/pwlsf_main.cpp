#include "pwlsf/builtins.hpp"
#include "pwlsf/canonical.hpp"
#include "pwlsf/experiments.hpp"
#include "pwlsf/io.hpp"
#include "pwlsf/slow_fast.hpp"
#include "pwlsf/util.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pwlsf;

namespace {

json jvec(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json jmat(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(jvec(m.row(i).transpose()));
  return rows;
}

// Eigenvalues as [re, im] pairs in a stable order.
json jspectrum_values(std::vector<Complex> values) {
  std::sort(values.begin(), values.end(), [](Complex a, Complex b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  json a = json::array();
  for (Complex z : values) a.push_back(json::array({z.real(), z.imag()}));
  return a;
}

json jspectrum(const Matrix& m) {
  const Eigen::EigenSolver<Matrix> es(m);
  if (es.info() != Eigen::Success)
    throw NumericalError("eigensolver failed on a report matrix");
  std::vector<Complex> values(static_cast<std::size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i)
    values[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
  return jspectrum_values(values);
}

std::vector<double> linspace(double from, double to, int points) {
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(points));
  if (points == 1) {
    grid.push_back(from);
    return grid;
  }
  for (int i = 0; i < points; ++i)
    grid.push_back(from + (to - from) * static_cast<double>(i) /
                              static_cast<double>(points - 1));
  return grid;
}

// Options every subcommand shares. The option pointers answer "was this
// flag given", so config values only change when the user asked.
struct Common {
  std::string config_path;
  std::string out_dir = "pwlsf-out";
  std::uint64_t seed = 0;
  std::vector<std::string> sets;
  double eps = 0.0, mu = 0.0;
  CLI::Option* eps_opt = nullptr;
  CLI::Option* mu_opt = nullptr;
};

// with_eps is off for the one command whose --eps means a grid, not a
// scalar override.
void add_common(CLI::App* cmd, Common& c, bool config_required,
                bool with_eps = true) {
  auto* conf =
      cmd->add_option("--config", c.config_path, "System description (JSON)");
  if (config_required) conf->required();
  cmd->add_option("--out", c.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Sampling seed, recorded in the manifest")
      ->capture_default_str();
  if (with_eps)
    c.eps_opt = cmd->add_option("--eps", c.eps, "Override the timescale parameter");
  c.mu_opt = cmd->add_option("--mu", c.mu, "Override the forcing amplitude");
  cmd->add_option("--set", c.sets,
                  "Extra parameter override as name=value (repeatable)");
}

void apply_overrides(SystemConfig& cfg, const Common& c) {
  if (c.eps_opt && c.eps_opt->count()) apply_parameter(cfg, "epsilon", c.eps);
  if (c.mu_opt->count())
    apply_parameter(cfg, cfg.general || cfg.slow_fast ? "mu_tilde" : "mu", c.mu);
  for (const std::string& s : c.sets) {
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("--set expects name=value, got \"" + s + "\"");
    const std::string name = s.substr(0, eq);
    const std::string text = s.substr(eq + 1);
    char* end = nullptr;
    const double value = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0')
      throw ConfigError("--set " + name + ": \"" + text + "\" is not a number");
    apply_parameter(cfg, name, value);
  }
}

SystemConfig effective_config(const Common& c) {
  SystemConfig cfg = load_system_config(c.config_path);
  apply_overrides(cfg, c);
  return cfg;
}

// Collects output files and closes the run with a manifest. Data files carry
// no timestamps, so reruns reproduce them byte for byte.
struct Outputs {
  fs::path dir;
  RunManifest manifest;

  Outputs(const std::string& out_dir, const std::string& command,
          const SystemConfig& cfg, std::uint64_t seed) {
    dir = out_dir;
    fs::create_directories(dir);
    manifest.command = command;
    manifest.config_hash = config_hash(cfg);
    manifest.seed = seed;
    manifest.started_utc = utc_timestamp();
    write_text_file((dir / "config.json").string(), serialize_system_config(cfg));
    manifest.outputs.push_back("config.json");
  }

  std::string path(const std::string& name) { return (dir / name).string(); }

  void add(const std::string& name) { manifest.outputs.push_back(name); }

  void write_json(const std::string& name, const json& j) {
    write_text_file(path(name), j.dump(2) + "\n");
    add(name);
  }

  void finish() {
    manifest.finished_utc = utc_timestamp();
    manifest.outputs.push_back("manifest.json");
    write_manifest(path("manifest.json"), manifest);
  }
};

GeneralPwlSystem random_general_system(Rng& rng, Index n) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    GeneralPwlSystem g;
    g.n = n;
    g.P_L.resize(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) g.P_L(i, j) = rng.uniform(-1.0, 1.0);
    g.P_R = g.P_L;
    for (Index i = 0; i < n; ++i) g.P_R(i, 0) = rng.uniform(-1.0, 1.0);
    g.c.resize(n);
    for (Index i = 0; i < n; ++i) g.c(i) = rng.uniform(-1.0, 1.0);
    g.mu_tilde = 1.0;
    try {
      build_ocf_transform(g);
      return g;
    } catch (const HypothesisError&) {
      // singular or forcing-degenerate draw; take the next one
    }
  }
  throw NumericalError("no transformable random system found in 64 draws");
}

json identity_report_json(const TransformIdentityReport& rep) {
  json j;
  j["res_shift_intertwine"] = rep.res_shift_intertwine;
  j["res_cayley_hamilton"] = rep.res_cayley_hamilton;
  j["res_first_row_inverse"] = rep.res_first_row_inverse;
  j["res_forcing_left"] = rep.res_forcing_left;
  j["res_forcing_right"] = rep.res_forcing_right;
  j["tol"] = rep.tol;
  j["ch_scale"] = rep.ch_scale;
  j["pass"] = rep.pass;
  j["ill_conditioned"] = rep.ill_conditioned;
  return j;
}

json transform_json(const OcfTransform& t) {
  json j;
  j["Q"] = jmat(t.Q);
  j["Phi"] = jmat(t.Phi);
  j["Psi"] = jmat(t.Psi);
  j["d"] = jvec(t.d);
  j["s"] = t.s;
  j["rcond_Phi"] = t.rcond_Phi;
  j["cond_Q"] = t.cond_Q;
  return j;
}

json sfocf_coefficients_json(const SfocfSystem& sys) {
  json j;
  j["n"] = static_cast<long long>(sys.n);
  j["k"] = static_cast<long long>(sys.k);
  j["a_left"] = jvec(sys.a_L);
  j["a_right"] = jvec(sys.a_R);
  j["b_left"] = jvec(sys.b_L);
  j["b_right"] = jvec(sys.b_R);
  j["epsilon"] = sys.epsilon;
  j["mu"] = sys.mu;
  return j;
}

int cmd_transform(const Common& c, Index random_dim, const std::string& cmdline) {
  SystemConfig cfg;
  if (random_dim > 0) {
    Rng rng(c.seed);
    cfg.kind = "general-pwl";
    cfg.name = "random-" + std::to_string(random_dim) + "d";
    cfg.general = random_general_system(rng, random_dim);
    apply_overrides(cfg, c);
  } else if (!c.config_path.empty()) {
    cfg = effective_config(c);
  } else {
    throw ConfigError("transform needs --config or --random-dim");
  }

  Outputs out(c.out_dir, cmdline, cfg, c.seed);
  json j;
  j["input_kind"] = cfg.kind;

  if (cfg.general || cfg.slow_fast) {
    const GeneralPwlSystem g = general_from_config(cfg);
    if (cfg.slow_fast) {
      const SfocfConversion conv = to_sfocf(*cfg.slow_fast);
      j["coefficients"] = sfocf_coefficients_json(conv.system);
      j["sparsity_residual"] = conv.sparsity_residual;
      j["transform"] = transform_json(conv.transform);
      j["identities"] = identity_report_json(
          verify_transform_identities(g, conv.transform));
    } else {
      const OcfTransform t = build_ocf_transform(g);
      const OcfSystem ocf = to_ocf(g, t);
      json coeff;
      coeff["p_left"] = jvec(ocf.p_L);
      coeff["p_right"] = jvec(ocf.p_R);
      coeff["mu"] = ocf.mu;
      j["coefficients"] = coeff;
      j["transform"] = transform_json(t);
      j["identities"] = identity_report_json(verify_transform_identities(g, t));
    }
  } else {
    // Already in canonical coordinates: report the identity transform.
    const SfocfSystem sys = sfocf_from_config(cfg);
    j["note"] = "input is already in canonical form; identity transform";
    j["coefficients"] = sfocf_coefficients_json(sys);
    json t;
    t["Q"] = jmat(Matrix::Identity(sys.n, sys.n));
    t["d"] = jvec(Vector::Zero(sys.n));
    t["s"] = 1.0;
    t["rcond_Phi"] = 1.0;
    t["cond_Q"] = 1.0;
    j["transform"] = t;
    json ids;
    ids["res_shift_intertwine"] = 0.0;
    ids["res_cayley_hamilton"] = 0.0;
    ids["res_first_row_inverse"] = 0.0;
    ids["res_forcing_left"] = 0.0;
    ids["res_forcing_right"] = 0.0;
    ids["tol"] = 1e-8;
    ids["pass"] = true;
    ids["ill_conditioned"] = false;
    j["identities"] = ids;
  }

  out.write_json("transform.json", j);
  out.finish();
  return 0;
}

int cmd_analyze(const Common& c, const std::string& cmdline) {
  const SystemConfig cfg = effective_config(c);
  const SfocfSystem sys = sfocf_from_config(cfg);
  const LayerSystem layer = layer_system(sys);
  const CriticalManifold cm = critical_manifold(layer);
  const ReducedSystem red = reduced_system(sys);

  Outputs out(c.out_dir, cmdline, cfg, c.seed);
  json j;
  j["system"] = sfocf_coefficients_json(sys);

  json jl;
  jl["k"] = static_cast<long long>(layer.k);
  jl["A_left"] = jmat(layer.A_L);
  jl["A_right"] = jmat(layer.A_R);
  jl["spectrum_left"] = jspectrum(layer.A_L);
  jl["spectrum_right"] = jspectrum(layer.A_R);
  jl["used_stored_limits"] = layer.used_stored_limits;
  j["layer"] = jl;

  json jc;
  jc["branch_left"] = jvec(cm.branch_L);
  jc["branch_right"] = jvec(cm.branch_R);
  jc["det_left"] = cm.det_L;
  jc["det_right"] = cm.det_R;
  jc["hurwitz"] = cm.hurwitz;
  j["critical_manifold"] = jc;

  json jr;
  jr["m"] = static_cast<long long>(red.m);
  jr["B_left"] = jmat(red.B_L);
  jr["B_right"] = jmat(red.B_R);
  jr["mu"] = red.mu;
  jr["spectrum_left"] = jspectrum(red.B_L);
  jr["spectrum_right"] = jspectrum(red.B_R);
  j["reduced"] = jr;

  if (red.m == 2) {
    const Classification2d cls = classify_2d(red);
    auto piece_json = [](const PieceClass& p) {
      json q;
      q["kind"] = p.kind;
      q["attracting"] = p.attracting;
      q["borderline"] = p.borderline;
      q["trace"] = p.trace;
      q["det"] = p.det;
      q["discriminant"] = p.discriminant;
      return q;
    };
    json jcl;
    jcl["left"] = piece_json(cls.left);
    jcl["right"] = piece_json(cls.right);
    jcl["prediction"] = cls.prediction;
    j["classification"] = jcl;
  }

  // Spectral-split quality over a decade-spanning grid; skipped with the
  // reason when the layer hypothesis fails.
  try {
    std::vector<double> grid;
    for (int i = 0; i <= 6; ++i) grid.push_back(std::pow(10.0, -1.0 - 0.5 * i));
    const FactorizationCheck fc = eigen_factorization_check(sys, grid);
    json jf;
    jf["epsilons"] = fc.epsilons;
    jf["fast_errors"] = fc.fast_errors;
    jf["slow_errors"] = fc.slow_errors;
    jf["fast_slope"] = fc.fast_slope;
    jf["slow_slope"] = fc.slow_slope;
    jf["pairing_ambiguous"] = fc.pairing_ambiguous;
    jf["pass"] = fc.pass;
    j["factorization"] = jf;
  } catch (const HypothesisError& e) {
    j["factorization"] = json{{"skipped", e.what()}};
  }

  if (cfg.builtin == "ocean") {
    const builtin::OceanParams p = ocean_params_from_config(cfg);
    const BebLinearization lin =
        linearize_at_beb(builtin::ocean_system(p), builtin::ocean_beb_point());
    const BebReduction br = beb_reduction(lin, sys.k, p.epsilon);
    json jb;
    jb["point"] = jvec(builtin::ocean_beb_point());
    jb["jac_left"] = jmat(lin.jac_left);
    jb["jac_right"] = jmat(lin.jac_right);
    jb["forcing_direction"] = jvec(lin.forcing_direction);
    jb["fast_left"] = jspectrum_values(br.fast_L);
    jb["fast_right"] = jspectrum_values(br.fast_R);
    jb["slow_left"] = jspectrum_values(br.slow_L);
    jb["slow_right"] = jspectrum_values(br.slow_R);
    jb["B_left"] = jmat(br.B_L);
    jb["B_right"] = jmat(br.B_R);
    j["boundary_equilibrium"] = jb;
  }

  std::string csv = "y1";
  for (Index i = 0; i < cm.k; ++i) csv += ",x" + std::to_string(i + 1);
  csv += "\n";
  for (int i = 0; i <= 40; ++i) {
    const double y1 = -1.0 + 0.05 * i;
    const Vector x = cm.at(y1);
    csv += format_double(y1);
    for (Index d = 0; d < cm.k; ++d) csv += "," + format_double(x(d));
    csv += "\n";
  }
  write_text_file(out.path("critical_manifold.csv"), csv);
  out.add("critical_manifold.csv");

  out.write_json("analyze.json", j);
  out.finish();
  return 0;
}

json diagnostics_json(const Diagnostics& d) {
  json j;
  j["steps_accepted"] = d.steps_accepted;
  j["steps_rejected"] = d.steps_rejected;
  j["rhs_evals"] = d.rhs_evals;
  j["diverged"] = d.diverged;
  j["escape_time"] = d.escape_time;  // NaN serializes as null
  j["reached_horizon"] = d.reached_horizon;
  return j;
}

int cmd_simulate(const Common& c, double horizon, bool horizon_set,
                 double max_step, const std::string& cmdline) {
  const SystemConfig cfg = effective_config(c);
  const OdeSystem ode = ode_from_config(cfg);
  const Vector z0 = initial_state_from_config(cfg);
  IntegratorConfig icfg = integrator_from_config(cfg);
  if (horizon_set) icfg.horizon = horizon;
  if (max_step > 0.0) icfg.max_step = max_step;

  const Trajectory tr = integrate(ode, z0, icfg);

  Outputs out(c.out_dir, cmdline, cfg, c.seed);
  write_trajectory_csv(out.path("trajectory.csv"), tr);
  out.add("trajectory.csv");

  json j;
  j["initial_state"] = jvec(z0);
  j["horizon"] = icfg.horizon;
  j["diagnostics"] = diagnostics_json(tr.diag);
  j["samples"] = tr.times.size();
  j["event_count"] = tr.events.size();
  json first_events = json::array();
  for (std::size_t i = 0; i < tr.events.size() && i < 20; ++i) {
    const Event& e = tr.events[i];
    first_events.push_back(json{
        {"t", e.t}, {"direction", e.direction}, {"grazing", e.grazing}});
  }
  j["first_events"] = first_events;
  if (!tr.states.empty()) {
    j["final_time"] = tr.times.back();
    j["final_state"] = jvec(tr.states.back());
    Vector lo = tr.states.front(), hi = tr.states.front();
    for (const Vector& s : tr.states) {
      lo = lo.cwiseMin(s);
      hi = hi.cwiseMax(s);
    }
    j["state_min"] = jvec(lo);
    j["state_max"] = jvec(hi);
  }
  out.write_json("summary.json", j);
  out.finish();
  return 0;
}

int cmd_sweep(const Common& c, const std::string& param, double from, double to,
              int points, Index observable, double perturbation, double horizon,
              bool horizon_set, const std::string& cmdline) {
  const SystemConfig cfg = effective_config(c);
  const SystemFamily family = family_from_config(cfg, param);
  IntegratorConfig icfg = integrator_from_config(cfg);
  if (horizon_set) icfg.horizon = horizon;

  const SweepResult res =
      sweep(family, linspace(from, to, points), observable, icfg, perturbation);

  Outputs out(c.out_dir, cmdline, cfg, c.seed);
  write_sweep_csv(out.path("sweep.csv"), res);
  out.add("sweep.csv");

  json j;
  j["parameter"] = res.parameter;
  j["observable"] = static_cast<long long>(res.observable);
  j["horizon"] = icfg.horizon;
  json pts = json::array();
  for (const SweepPoint& p : res.points) {
    json q;
    q["parameter"] = p.parameter;
    q["has_equilibrium"] = p.has_equilibrium;
    if (p.has_equilibrium) {
      q["equilibrium"] = jvec(p.equilibrium);
      q["equilibrium_value"] = p.equilibrium_value;
    }
    q["admissible_count"] = p.admissible_count;
    q["cycle"] = json{{"min", p.cycle.min},
                      {"max", p.cycle.max},
                      {"converged", p.cycle.converged},
                      {"diverged", p.cycle.diverged}};
    q["failed"] = p.failed;
    if (p.failed) q["error"] = p.error;
    pts.push_back(q);
  }
  j["points"] = pts;
  out.write_json("summary.json", j);
  out.finish();
  return 0;
}

int cmd_invariance(const Common& c, std::vector<double> epsilons, int samples,
                   double fast_scale, double tube, double horizon_slow,
                   bool override_hypotheses, const std::string& cmdline) {
  const SystemConfig cfg = effective_config(c);
  const SfocfSystem sys = sfocf_from_config(cfg);
  if (!cfg.region)
    throw ConfigError("invariance needs a \"region\" block in the config");
  if (cfg.region->center.size() != sys.n - sys.k)
    throw ConfigError("config.region: center has dimension " +
                      std::to_string(cfg.region->center.size()) +
                      " but the slow space has dimension " +
                      std::to_string(sys.n - sys.k));

  InvarianceConfig ic;
  if (!epsilons.empty()) ic.epsilons = std::move(epsilons);
  else ic.epsilons = {0.02, 0.01, 0.005};
  ic.samples = samples;
  ic.M = fast_scale;
  ic.N = tube;
  ic.horizon_slow_units = horizon_slow;
  ic.seed = c.seed;
  ic.override_hypotheses = override_hypotheses;
  ic.probe.seed = c.seed;

  const InvarianceReport rep = invariance_experiment(sys, *cfg.region, ic);

  Outputs out(c.out_dir, cmdline, cfg, c.seed);
  write_invariance_csv(out.path("invariance.csv"), rep);
  out.add("invariance.csv");

  json j;
  j["hypothesis_note"] = rep.hypothesis_note;
  j["pass"] = rep.pass;
  j["start_tube_M"] = ic.M;
  j["containment_tube_N"] = ic.N;
  j["samples"] = ic.samples;
  json per = json::array();
  for (const InvarianceEpsReport& e : rep.per_eps) {
    json q;
    q["epsilon"] = e.epsilon;
    q["violations"] = e.violations;
    q["min_admissible_N"] = e.min_admissible_N;
    json exits = json::array();
    for (const Vector& s : e.exit_states) exits.push_back(jvec(s));
    q["exit_states"] = exits;
    per.push_back(q);
  }
  j["per_epsilon"] = per;
  out.write_json("summary.json", j);
  out.finish();
  return 0;
}

int cmd_stability(const Common& c, int points, const std::string& cmdline) {
  const SystemConfig cfg = effective_config(c);
  const SfocfSystem sys = sfocf_from_config(cfg);
  const LayerSystem layer = layer_system(sys);

  StabilityProbeConfig pc;
  pc.points_per_sphere = points;
  pc.seed = c.seed;
  const StabilityReport rep = stability_probe(layer, pc);

  Outputs out(c.out_dir, cmdline, cfg, c.seed);
  json j;
  j["verdict"] = rep.verdict;
  j["reason"] = rep.reason;
  j["alpha_hat"] = rep.alpha_hat;
  j["beta_hat"] = rep.beta_hat;
  j["samples"] = rep.samples;
  if (rep.witness) j["witness"] = jvec(*rep.witness);
  out.write_json("stability.json", j);
  out.finish();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::string cmdline;
  for (int i = 0; i < argc; ++i) {
    if (i) cmdline += ' ';
    cmdline += argv[i];
  }

  CLI::App app{
      "Toolkit for two-piece continuous piecewise-linear slow-fast systems: "
      "canonical transforms, critical-manifold analysis, simulation, and "
      "bifurcation experiments"};
  app.require_subcommand(1);
  app.footer("Environment: PWLSF_WORKERS caps the worker threads used by "
             "sweeps and sampling.\nExit codes: 0 success, 2 hypothesis "
             "violation, 3 numerical failure, 4 config error.");

  int rc = 0;

  Common ct;
  Index random_dim = 0;
  auto* t = app.add_subcommand(
      "transform", "Canonical-form coefficients with identity residuals");
  add_common(t, ct, false);
  t->add_option("--random-dim", random_dim,
                "Generate a seeded random continuous system of this dimension "
                "instead of reading --config");
  t->callback([&]() { rc = cmd_transform(ct, random_dim, cmdline); });

  Common ca;
  auto* an = app.add_subcommand(
      "analyze",
      "Critical manifold, reduced system, classification, spectral split");
  add_common(an, ca, true);
  an->callback([&]() { rc = cmd_analyze(ca, cmdline); });

  Common cs;
  double sim_horizon = 0.0, sim_max_step = 0.0;
  auto* sim = app.add_subcommand("simulate", "Integrate and write trajectory data");
  add_common(sim, cs, true);
  auto* sim_h = sim->add_option("--horizon", sim_horizon, "Integration horizon");
  sim->add_option("--max-step", sim_max_step, "Cap on the adaptive step");
  sim->callback([&]() {
    rc = cmd_simulate(cs, sim_horizon, sim_h->count() > 0, sim_max_step, cmdline);
  });

  Common cw;
  std::string sweep_param;
  double sweep_from = 0.0, sweep_to = 0.0, sweep_horizon = 0.0;
  double sweep_perturbation = 1e-3;
  int sweep_points = 2;
  Index sweep_observable = 0;
  auto* sw = app.add_subcommand(
      "sweep", "Equilibrium branch and cycle bounds over a parameter grid");
  add_common(sw, cw, true);
  sw->add_option("--param", sweep_param, "Family parameter name")->required();
  sw->add_option("--from", sweep_from, "Grid start")->required();
  sw->add_option("--to", sweep_to, "Grid end")->required();
  sw->add_option("--points", sweep_points, "Grid size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sw->add_option("--observable", sweep_observable,
                 "State component the bounds track")
      ->capture_default_str();
  sw->add_option("--perturbation", sweep_perturbation,
                 "Kick off the equilibrium that seeds each run")
      ->capture_default_str();
  auto* sw_h = sw->add_option("--horizon", sweep_horizon,
                              "Integration horizon per grid point");
  sw->callback([&]() {
    rc = cmd_sweep(cw, sweep_param, sweep_from, sweep_to, sweep_points,
                   sweep_observable, sweep_perturbation, sweep_horizon,
                   sw_h->count() > 0, cmdline);
  });

  Common ci;
  std::vector<double> inv_eps;
  int inv_samples = 100;
  double inv_fast_scale = 1.0, inv_tube = 10.0, inv_horizon_slow = 10.0;
  bool inv_override = false;
  auto* inv = app.add_subcommand(
      "invariance", "Tube containment experiment around the critical manifold");
  add_common(inv, ci, true, /*with_eps=*/false);
  inv->add_option("--eps", inv_eps,
                  "Epsilon grid for the experiment (repeatable)");
  inv->add_option("--samples", inv_samples, "Starts per epsilon")
      ->capture_default_str();
  inv->add_option("--fast-scale", inv_fast_scale,
                  "Start distance from the manifold, in units of epsilon")
      ->capture_default_str();
  inv->add_option("--tube", inv_tube,
                  "Containment radius, in units of epsilon")
      ->capture_default_str();
  inv->add_option("--horizon-slow", inv_horizon_slow,
                  "Horizon in slow-time units")
      ->capture_default_str();
  inv->add_flag("--override-hypotheses", inv_override,
                "Run even when trapping or layer stability fails");
  inv->callback([&]() {
    rc = cmd_invariance(ci, inv_eps, inv_samples, inv_fast_scale, inv_tube,
                        inv_horizon_slow, inv_override, cmdline);
  });

  Common cp;
  int probe_points = 200;
  auto* st = app.add_subcommand(
      "stability", "Empirical layer-stability probe with verdict file");
  add_common(st, cp, true);
  st->add_option("--points", probe_points, "Starts per sphere radius")
      ->capture_default_str();
  st->callback([&]() { rc = cmd_stability(cp, probe_points, cmdline); });

  try {
    app.parse(argc, argv);
    return rc;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 4;
  } catch (const HypothesisError& e) {
    std::cerr << "error (hypothesis violated): " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error (config): " << e.what() << "\n";
    return 4;
  } catch (const NumericalError& e) {
    std::cerr << "error (numerical): " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error (invalid argument): " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
