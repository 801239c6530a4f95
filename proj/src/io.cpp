#include "pwlsf/io.hpp"

#include "pwlsf/canonical.hpp"
#include "pwlsf/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace pwlsf {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

const json& member(const json& obj, const std::string& where, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(where + ": missing required key \"" + key + "\"");
  return *it;
}

// Strict schema surface: every present key must be declared, every required
// key present. Typos in optional keys would otherwise be silently ignored.
void check_keys(const json& obj, const std::string& where,
                const std::vector<const char*>& required,
                const std::vector<const char*>& optional) {
  auto known = [&](const std::string& key) {
    auto eq = [&](const char* k) { return key == k; };
    return std::any_of(required.begin(), required.end(), eq) ||
           std::any_of(optional.begin(), optional.end(), eq);
  };
  for (const auto& item : obj.items())
    if (!known(item.key())) fail(where + ": unknown key \"" + item.key() + "\"");
  for (const char* key : required)
    if (!obj.contains(key)) fail(where + ": missing required key \"" + std::string(key) + "\"");
}

double as_finite(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(where + ": number is not finite");
  return x;
}

double get_number(const json& obj, const std::string& where, const char* key) {
  return as_finite(member(obj, where, key), where + "." + key);
}

std::string get_string(const json& obj, const std::string& where, const char* key) {
  const json& v = member(obj, where, key);
  if (!v.is_string()) fail(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

Index get_index(const json& obj, const std::string& where, const char* key,
                Index lo, Index hi) {
  const double x = get_number(obj, where, key);
  const std::string loc = where + "." + std::string(key);
  if (x != std::floor(x)) fail(loc + ": expected an integer");
  if (x < static_cast<double>(lo) || x > static_cast<double>(hi))
    fail(loc + ": value " + std::to_string(x) + " outside [" +
         std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return static_cast<Index>(x);
}

Vector json_vector(const json& v, const std::string& loc, Index expected) {
  if (!v.is_array()) fail(loc + ": expected an array of numbers");
  if (expected >= 0 && static_cast<Index>(v.size()) != expected)
    fail(loc + ": expected length " + std::to_string(expected) + ", got " +
         std::to_string(v.size()));
  if (v.empty()) fail(loc + ": array must not be empty");
  Vector out(static_cast<Index>(v.size()));
  for (Index i = 0; i < out.size(); ++i)
    out(i) = as_finite(v[static_cast<std::size_t>(i)],
                       loc + "[" + std::to_string(i) + "]");
  return out;
}

Vector get_vector(const json& obj, const std::string& where, const char* key,
                  Index expected) {
  return json_vector(member(obj, where, key), where + "." + key, expected);
}

// expected_rows / expected_cols of -1 accept any positive count.
Matrix get_matrix(const json& obj, const std::string& where, const char* key,
                  Index expected_rows, Index expected_cols) {
  const json& v = member(obj, where, key);
  const std::string loc = where + "." + std::string(key);
  if (!v.is_array() || v.empty()) fail(loc + ": expected an array of rows");
  const Index rows = static_cast<Index>(v.size());
  if (expected_rows >= 0 && rows != expected_rows)
    fail(loc + ": expected " + std::to_string(expected_rows) + " rows, got " +
         std::to_string(rows));
  Matrix out;
  for (Index i = 0; i < rows; ++i) {
    const Vector row = json_vector(v[static_cast<std::size_t>(i)],
                                   loc + "[" + std::to_string(i) + "]",
                                   i == 0 ? expected_cols : out.cols());
    if (i == 0) out.resize(rows, row.size());
    out.row(i) = row.transpose();
  }
  return out;
}

TrappingRegion parse_region(const json& r) {
  const std::string where = "config.region";
  if (!r.is_object()) fail(where + ": expected an object");
  check_keys(r, where, {"shape", "center", "extents"},
             {"transform", "boundary_samples"});
  TrappingRegion region;
  const std::string shape = get_string(r, where, "shape");
  if (shape == "box")
    region.shape = TrappingRegion::Shape::Box;
  else if (shape == "ball")
    region.shape = TrappingRegion::Shape::Ball;
  else
    fail(where + ".shape: expected \"box\" or \"ball\", got \"" + shape + "\"");
  region.center = get_vector(r, where, "center", -1);
  const Index m = region.center.size();
  region.extents = get_vector(r, where, "extents", m);
  for (Index i = 0; i < m; ++i)
    if (region.extents(i) <= 0.0) fail(where + ".extents: entries must be positive");
  if (r.contains("transform")) {
    region.transform = get_matrix(r, where, "transform", m, m);
    if (Eigen::FullPivLU<Matrix>(region.transform).rank() < m)
      fail(where + ".transform: matrix is singular");
  }
  if (r.contains("boundary_samples"))
    region.boundary_samples =
        static_cast<int>(get_index(r, where, "boundary_samples", 2, 100000000));
  return region;
}

const std::vector<const char*> kCommonOptional = {
    "name", "notes", "parameters", "initial_state", "horizon", "region"};

std::vector<const char*> with_common(std::vector<const char*> extra) {
  extra.insert(extra.end(), kCommonOptional.begin(), kCommonOptional.end());
  return extra;
}

double param_or(const ParamMap& params, const char* key, double fallback) {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

json vector_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(vector_json(m.row(i).transpose()));
  return rows;
}

json config_json(const SystemConfig& cfg) {
  json j;
  j["kind"] = cfg.kind;
  if (!cfg.name.empty()) j["name"] = cfg.name;
  if (!cfg.notes.empty()) j["notes"] = cfg.notes;
  if (cfg.general) {
    j["P_left"] = matrix_json(cfg.general->P_L);
    j["P_right"] = matrix_json(cfg.general->P_R);
    j["c"] = vector_json(cfg.general->c);
    j["mu_tilde"] = cfg.general->mu_tilde;
  }
  if (cfg.slow_fast) {
    j["k"] = static_cast<long long>(cfg.slow_fast->k);
    j["U_left"] = matrix_json(cfg.slow_fast->U_L);
    j["U_right"] = matrix_json(cfg.slow_fast->U_R);
    j["V_left"] = matrix_json(cfg.slow_fast->V_L);
    j["V_right"] = matrix_json(cfg.slow_fast->V_R);
    j["q"] = vector_json(cfg.slow_fast->q);
    j["r"] = vector_json(cfg.slow_fast->r);
    j["epsilon"] = cfg.slow_fast->epsilon;
    j["mu_tilde"] = cfg.slow_fast->mu_tilde;
  }
  if (cfg.sfocf) {
    j["n"] = static_cast<long long>(cfg.sfocf->n);
    j["k"] = static_cast<long long>(cfg.sfocf->k);
    j["a_left"] = vector_json(cfg.sfocf->a_L);
    j["a_right"] = vector_json(cfg.sfocf->a_R);
    j["b_left"] = vector_json(cfg.sfocf->b_L);
    j["b_right"] = vector_json(cfg.sfocf->b_R);
    j["epsilon"] = cfg.sfocf->epsilon;
    j["mu"] = cfg.sfocf->mu;
    if (cfg.sfocf->limit0) {
      json lim;
      lim["a_left"] = vector_json(cfg.sfocf->limit0->a_L);
      lim["a_right"] = vector_json(cfg.sfocf->limit0->a_R);
      lim["b_left"] = vector_json(cfg.sfocf->limit0->b_L);
      lim["b_right"] = vector_json(cfg.sfocf->limit0->b_R);
      j["limit0"] = lim;
    }
  }
  if (!cfg.builtin.empty()) {
    j["builtin"] = cfg.builtin;
    if (!cfg.parameters.empty()) {
      json p;
      for (const auto& [key, value] : cfg.parameters) p[key] = value;
      j["parameters"] = p;
    }
  }
  if (cfg.initial_state) j["initial_state"] = vector_json(*cfg.initial_state);
  if (cfg.horizon) j["horizon"] = *cfg.horizon;
  if (cfg.region) {
    json r;
    r["shape"] = cfg.region->shape == TrappingRegion::Shape::Box ? "box" : "ball";
    r["center"] = vector_json(cfg.region->center);
    r["extents"] = vector_json(cfg.region->extents);
    if (cfg.region->transform.size() > 0)
      r["transform"] = matrix_json(cfg.region->transform);
    r["boundary_samples"] = cfg.region->boundary_samples;
    j["region"] = r;
  }
  return j;
}

}  // namespace

SystemConfig parse_system_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail("config: top level must be a JSON object");

  SystemConfig cfg;
  const std::string where = "config";
  if (!j.contains("kind")) fail("config: missing required key \"kind\"");
  cfg.kind = get_string(j, where, "kind");

  if (cfg.kind == "general-pwl") {
    check_keys(j, where, {"kind", "P_left", "P_right", "c", "mu_tilde"},
               with_common({}));
    GeneralPwlSystem sys;
    sys.P_L = get_matrix(j, where, "P_left", -1, -1);
    sys.n = sys.P_L.rows();
    if (sys.P_L.cols() != sys.n) fail("config.P_left: matrix must be square");
    sys.P_R = get_matrix(j, where, "P_right", sys.n, sys.n);
    sys.c = get_vector(j, where, "c", sys.n);
    sys.mu_tilde = get_number(j, where, "mu_tilde");
    const ContinuityReport rep = check_continuity(sys);
    if (!rep.pass)
      fail("config: pieces disagree outside the first column at entry (" +
           std::to_string(rep.row) + ", " + std::to_string(rep.col) +
           ") by " + std::to_string(rep.max_violation) +
           "; the combined field would be discontinuous across z1 = 0");
    cfg.general = std::move(sys);
  } else if (cfg.kind == "slow-fast-pwl") {
    check_keys(j, where,
               {"kind", "k", "U_left", "U_right", "V_left", "V_right", "q",
                "r", "epsilon", "mu_tilde"},
               with_common({}));
    SlowFastPwlSystem sys;
    sys.k = get_index(j, where, "k", 1, 1000000);
    sys.U_L = get_matrix(j, where, "U_left", sys.k, -1);
    sys.n = sys.U_L.cols();
    if (sys.n <= sys.k)
      fail("config: need state dimension above k, got " + std::to_string(sys.n) +
           " columns with k = " + std::to_string(sys.k));
    sys.U_R = get_matrix(j, where, "U_right", sys.k, sys.n);
    sys.V_L = get_matrix(j, where, "V_left", sys.n - sys.k, sys.n);
    sys.V_R = get_matrix(j, where, "V_right", sys.n - sys.k, sys.n);
    sys.q = get_vector(j, where, "q", sys.k);
    sys.r = get_vector(j, where, "r", sys.n - sys.k);
    sys.epsilon = get_number(j, where, "epsilon");
    if (sys.epsilon <= 0.0) fail("config.epsilon: must be positive");
    sys.mu_tilde = get_number(j, where, "mu_tilde");
    const ContinuityReport rep = check_continuity(assemble_general(sys));
    if (!rep.pass)
      fail("config: pieces disagree outside the first column at entry (" +
           std::to_string(rep.row) + ", " + std::to_string(rep.col) +
           ") by " + std::to_string(rep.max_violation) +
           "; the combined field would be discontinuous across z1 = 0");
    cfg.slow_fast = std::move(sys);
  } else if (cfg.kind == "sfocf") {
    check_keys(j, where,
               {"kind", "n", "k", "a_left", "a_right", "b_left", "b_right",
                "epsilon", "mu"},
               with_common({"limit0"}));
    SfocfSystem sys;
    sys.n = get_index(j, where, "n", 2, 1000000);
    sys.k = get_index(j, where, "k", 1, sys.n - 1);
    sys.a_L = get_vector(j, where, "a_left", sys.k);
    sys.a_R = get_vector(j, where, "a_right", sys.k);
    sys.b_L = get_vector(j, where, "b_left", sys.n - sys.k);
    sys.b_R = get_vector(j, where, "b_right", sys.n - sys.k);
    sys.epsilon = get_number(j, where, "epsilon");
    if (sys.epsilon < 0.0) fail("config.epsilon: must be nonnegative");
    sys.mu = get_number(j, where, "mu");
    if (j.contains("limit0")) {
      const json& l = j["limit0"];
      const std::string lw = "config.limit0";
      if (!l.is_object()) fail(lw + ": expected an object");
      check_keys(l, lw, {"a_left", "a_right", "b_left", "b_right"}, {});
      SfocfLimits lim;
      lim.a_L = get_vector(l, lw, "a_left", sys.k);
      lim.a_R = get_vector(l, lw, "a_right", sys.k);
      lim.b_L = get_vector(l, lw, "b_left", sys.n - sys.k);
      lim.b_R = get_vector(l, lw, "b_right", sys.n - sys.k);
      sys.limit0 = std::move(lim);
    }
    cfg.sfocf = std::move(sys);
  } else if (cfg.kind == "piecewise-smooth-builtin") {
    check_keys(j, where, {"kind", "builtin"}, with_common({}));
    cfg.builtin = get_string(j, where, "builtin");
    if (cfg.builtin != "canard5d" && cfg.builtin != "ocean")
      fail("config.builtin: unknown builtin \"" + cfg.builtin +
           "\" (known: canard5d, ocean)");
  } else {
    fail("config.kind: unknown kind \"" + cfg.kind +
         "\" (known: general-pwl, slow-fast-pwl, sfocf, piecewise-smooth-builtin)");
  }

  if (j.contains("name")) cfg.name = get_string(j, where, "name");
  if (j.contains("notes")) cfg.notes = get_string(j, where, "notes");
  if (j.contains("parameters")) {
    const json& p = j["parameters"];
    if (!p.is_object()) fail("config.parameters: expected an object");
    for (const auto& item : p.items())
      apply_parameter(cfg, item.key(),
                      as_finite(item.value(), "config.parameters." + item.key()));
  }
  if (j.contains("initial_state"))
    cfg.initial_state = get_vector(j, where, "initial_state", state_dimension(cfg));
  if (j.contains("horizon")) {
    cfg.horizon = get_number(j, where, "horizon");
    if (*cfg.horizon <= 0.0) fail("config.horizon: must be positive");
  }
  if (j.contains("region")) cfg.region = parse_region(j["region"]);
  return cfg;
}

SystemConfig load_system_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot read config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_system_config(buf.str());
}

std::string serialize_system_config(const SystemConfig& cfg, int indent) {
  return config_json(cfg).dump(indent) + "\n";
}

std::uint64_t config_hash(const SystemConfig& cfg) {
  return fnv1a(config_json(cfg).dump());
}

void apply_parameter(SystemConfig& cfg, const std::string& name, double value) {
  if (!std::isfinite(value))
    fail("parameter " + name + ": value is not finite");
  auto unknown = [&]() {
    fail("parameter \"" + name + "\" is not adjustable for kind \"" + cfg.kind + "\"");
  };
  if (cfg.sfocf) {
    if (name == "epsilon") {
      if (value < 0.0) fail("parameter epsilon: must be nonnegative");
      cfg.sfocf->epsilon = value;
    } else if (name == "mu") {
      cfg.sfocf->mu = value;
    } else {
      unknown();
    }
  } else if (cfg.general) {
    if (name == "mu_tilde")
      cfg.general->mu_tilde = value;
    else
      unknown();
  } else if (cfg.slow_fast) {
    if (name == "epsilon") {
      if (value <= 0.0) fail("parameter epsilon: must be positive");
      cfg.slow_fast->epsilon = value;
    } else if (name == "mu_tilde") {
      cfg.slow_fast->mu_tilde = value;
    } else {
      unknown();
    }
  } else if (cfg.builtin == "canard5d") {
    if (name != "epsilon" && name != "mu") unknown();
    if (name == "epsilon" && value <= 0.0)
      fail("parameter epsilon: must be positive");
    cfg.parameters[name] = value;
  } else if (cfg.builtin == "ocean") {
    static const char* keys[] = {"a", "b", "delta", "epsilon", "A", "lambda0"};
    if (std::none_of(std::begin(keys), std::end(keys),
                     [&](const char* k) { return name == k; }))
      unknown();
    if (name == "epsilon" && value <= 0.0)
      fail("parameter epsilon: must be positive");
    cfg.parameters[name] = value;
  } else {
    unknown();
  }
}

builtin::OceanParams ocean_params_from_config(const SystemConfig& cfg) {
  if (cfg.builtin != "ocean")
    fail("config does not describe the ocean builtin");
  builtin::OceanParams p;
  p.a = param_or(cfg.parameters, "a", p.a);
  p.b = param_or(cfg.parameters, "b", p.b);
  p.delta = param_or(cfg.parameters, "delta", p.delta);
  p.epsilon = param_or(cfg.parameters, "epsilon", p.epsilon);
  p.A = param_or(cfg.parameters, "A", p.A);
  p.lambda0 = param_or(cfg.parameters, "lambda0", p.lambda0);
  return p;
}

Index state_dimension(const SystemConfig& cfg) {
  if (cfg.general) return cfg.general->n;
  if (cfg.slow_fast) return cfg.slow_fast->n;
  if (cfg.sfocf) return cfg.sfocf->n;
  if (cfg.builtin == "canard5d") return 5;
  if (cfg.builtin == "ocean") return 3;
  fail("config has no system payload");
}

OdeSystem ode_from_config(const SystemConfig& cfg) {
  if (cfg.general) return make_ode(*cfg.general);
  if (cfg.slow_fast) return make_ode(assemble_general(*cfg.slow_fast));
  if (cfg.sfocf) return make_ode(*cfg.sfocf);
  if (cfg.builtin == "canard5d")
    return make_ode(builtin::canard5d(param_or(cfg.parameters, "epsilon", 0.05),
                                      param_or(cfg.parameters, "mu", 1.0)));
  if (cfg.builtin == "ocean")
    return builtin::ocean_ode(ocean_params_from_config(cfg));
  fail("config has no system payload");
}

SfocfSystem sfocf_from_config(const SystemConfig& cfg) {
  if (cfg.sfocf) return *cfg.sfocf;
  if (cfg.slow_fast) return to_sfocf(*cfg.slow_fast).system;
  if (cfg.builtin == "canard5d")
    return builtin::canard5d(param_or(cfg.parameters, "epsilon", 0.05),
                             param_or(cfg.parameters, "mu", 1.0));
  if (cfg.builtin == "ocean")
    return builtin::ocean_reduced_family(ocean_params_from_config(cfg));
  fail("kind \"" + cfg.kind +
       "\" carries no timescale split; a slow-fast or canonical form is required");
}

GeneralPwlSystem general_from_config(const SystemConfig& cfg) {
  if (cfg.general) return *cfg.general;
  if (cfg.slow_fast) return assemble_general(*cfg.slow_fast);
  fail("kind \"" + cfg.kind + "\" does not provide a general PWL form");
}

SystemFamily family_from_config(const SystemConfig& cfg,
                                const std::string& parameter) {
  if (cfg.sfocf) return sfocf_family(*cfg.sfocf, parameter);
  if (cfg.slow_fast) return sfocf_family(to_sfocf(*cfg.slow_fast).system, parameter);
  if (cfg.builtin == "canard5d")
    return sfocf_family(builtin::canard5d(param_or(cfg.parameters, "epsilon", 0.05),
                                          param_or(cfg.parameters, "mu", 1.0)),
                        parameter);
  if (cfg.builtin == "ocean")
    return ocean_family(ocean_params_from_config(cfg), parameter);
  fail("kind \"" + cfg.kind + "\" does not support parameter sweeps");
}

Vector initial_state_from_config(const SystemConfig& cfg) {
  if (cfg.initial_state) return *cfg.initial_state;
  if (cfg.builtin == "canard5d")
    return builtin::canard5d_start(
        builtin::canard5d(param_or(cfg.parameters, "epsilon", 0.05),
                          param_or(cfg.parameters, "mu", 1.0)));
  if (cfg.builtin == "ocean") {
    Vector z0(3);
    z0 << 1.0, 0.99, 1.0;
    return z0;
  }
  return Vector::Constant(state_dimension(cfg), 0.1);
}

IntegratorConfig integrator_from_config(const SystemConfig& cfg) {
  IntegratorConfig icfg;
  if (cfg.horizon) icfg.horizon = *cfg.horizon;
  return icfg;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot open for writing: " + path);
  out << text;
  if (!out) fail("write failed: " + path);
}

void write_trajectory_csv(const std::string& path, const Trajectory& tr) {
  std::string text = "t";
  const Index n = tr.states.empty() ? 0 : tr.states.front().size();
  for (Index i = 0; i < n; ++i) text += ",z" + std::to_string(i + 1);
  text += ",piece\n";
  const std::size_t rows =
      std::min({tr.times.size(), tr.states.size(), tr.pieces.size()});
  for (std::size_t r = 0; r < rows; ++r) {
    text += format_double(tr.times[r]);
    for (Index i = 0; i < n; ++i) text += "," + format_double(tr.states[r](i));
    text += "," + std::to_string(tr.pieces[r]) + "\n";
  }
  write_text_file(path, text);
}

void write_sweep_csv(const std::string& path, const SweepResult& res) {
  std::string text =
      "parameter,equilibrium,admissible_count,cycle_min,cycle_max,converged,failed\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const SweepPoint& pt : res.points) {
    text += format_double(pt.parameter);
    text += "," + format_double(pt.has_equilibrium ? pt.equilibrium_value : nan);
    text += "," + std::to_string(pt.admissible_count);
    text += "," + format_double(pt.cycle.min);
    text += "," + format_double(pt.cycle.max);
    text += pt.cycle.converged ? ",1" : ",0";
    text += pt.failed ? ",1\n" : ",0\n";
  }
  write_text_file(path, text);
}

void write_invariance_csv(const std::string& path, const InvarianceReport& rep) {
  std::string text = "epsilon,violations,min_admissible_N\n";
  for (const InvarianceEpsReport& e : rep.per_eps) {
    text += format_double(e.epsilon);
    text += "," + std::to_string(e.violations);
    text += "," + format_double(e.min_admissible_N) + "\n";
  }
  write_text_file(path, text);
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const std::string& path, const RunManifest& m) {
  json j;
  j["command"] = m.command;
  j["config_hash"] = m.config_hash;
  j["seed"] = m.seed;
  j["tool_version"] = m.tool_version;
  j["started_utc"] = m.started_utc;
  j["finished_utc"] = m.finished_utc;
  j["outputs"] = m.outputs;
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace pwlsf
