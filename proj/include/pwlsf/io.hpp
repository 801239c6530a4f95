#pragma once

#include "pwlsf/builtins.hpp"
#include "pwlsf/experiments.hpp"
#include "pwlsf/integrate.hpp"
#include "pwlsf/systems.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pwlsf {

inline constexpr const char* kToolVersion = "0.1.0";

// Parsed and validated system description. Exactly one kind payload is
// populated. For the coefficient kinds, scalar entries of the "parameters"
// object are folded into the payload on load and the map is cleared, so the
// payload is the single runtime truth; for built-ins the map is the payload.
struct SystemConfig {
  std::string kind;  // general-pwl | slow-fast-pwl | sfocf | piecewise-smooth-builtin
  std::string name, notes;
  std::optional<GeneralPwlSystem> general;
  std::optional<SlowFastPwlSystem> slow_fast;
  std::optional<SfocfSystem> sfocf;
  std::string builtin;  // canard5d | ocean
  ParamMap parameters;
  std::optional<Vector> initial_state;
  std::optional<double> horizon;
  std::optional<TrappingRegion> region;
};

// Strict parse: unknown keys, wrong shapes, inconsistent dimensions,
// non-finite numbers, and failed continuity checks all throw ConfigError.
// The checks mirror schemas/system-config.schema.json.
SystemConfig parse_system_config(const std::string& text);
SystemConfig load_system_config(const std::string& path);

// Canonical JSON: sorted keys, round-trip-exact numbers, trailing newline.
// parse_system_config of the result reproduces the config exactly, so the
// hash identifies "the same system" across save/load cycles.
std::string serialize_system_config(const SystemConfig& cfg, int indent = 2);
std::uint64_t config_hash(const SystemConfig& cfg);

// Sets one named scalar. Writable names depend on the kind: epsilon and mu
// for sfocf, mu_tilde for general-pwl, epsilon and mu_tilde for
// slow-fast-pwl, the builtin's own parameter set otherwise. Unknown names
// throw ConfigError.
void apply_parameter(SystemConfig& cfg, const std::string& name, double value);

// Views consumed by the commands; each throws ConfigError when the config
// kind cannot supply it.
OdeSystem ode_from_config(const SystemConfig& cfg);
SfocfSystem sfocf_from_config(const SystemConfig& cfg);
GeneralPwlSystem general_from_config(const SystemConfig& cfg);
SystemFamily family_from_config(const SystemConfig& cfg,
                                const std::string& parameter);
builtin::OceanParams ocean_params_from_config(const SystemConfig& cfg);
Index state_dimension(const SystemConfig& cfg);

// The config's initial_state when present; otherwise the builtin's natural
// start (canard5d: on the right manifold branch; ocean: near the boundary
// equilibrium on the right piece) or 0.1 * ones for coefficient kinds.
Vector initial_state_from_config(const SystemConfig& cfg);

// Defaults with the config's horizon applied when present.
IntegratorConfig integrator_from_config(const SystemConfig& cfg);

// Shortest decimal form that parses back to the same double; nan and inf
// are spelled out.
std::string format_double(double v);

void write_text_file(const std::string& path, const std::string& text);

// Columns t, z1..zn, piece.
void write_trajectory_csv(const std::string& path, const Trajectory& tr);
// Columns parameter, equilibrium, admissible_count, cycle_min, cycle_max,
// converged, failed. Missing equilibria print as nan.
void write_sweep_csv(const std::string& path, const SweepResult& res);
// Columns epsilon, violations, min_admissible_N.
void write_invariance_csv(const std::string& path, const InvarianceReport& rep);

// Provenance record written next to every command's outputs. CSV and JSON
// data files carry no timestamps, so a rerun with the same config and seed
// reproduces them byte for byte; only this record differs.
struct RunManifest {
  std::string command;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  std::string started_utc, finished_utc;  // ISO 8601, second resolution
  std::vector<std::string> outputs;       // every file the command wrote
};

std::string utc_timestamp();
void write_manifest(const std::string& path, const RunManifest& m);

}  // namespace pwlsf
