#pragma once

// Experiment configuration and the runners behind the command-line tool.
//
// Config files are JSON with a closed schema: unknown keys are errors.
//
//   {
//     "system":     {"builtin": "planar"}
//                 | {"builtin": "tunnel_diode", "L": 1, "C": 1}
//                 | {"builtin": "custom", "k": 3,
//                    "f": [[{"coef": 1.0, "x": [1, 0], "z": 0, "eps": 0}, ...], ...]},
//     "epsilon":    0.05,
//     "controller": {"type": "none"}
//                 | {"type": "thm2", "a": [..], "b": 3, "c": [..]}          (c optional)
//                 | {"type": "thm2plus3", "a", "b", "c", "K": [..], "chi_star": [..]}
//                 | {"type": "highgain", "A": [..], "B": 10, "cancel_constants": false},
//     "ics":        [[x1, ..., z], ...],
//     "t_final":    10,
//     "switch_on_time": 0,
//     "integrator": {"rtol", "atol", "max_step", "divergence_norm", "min_step", "record_stride"},
//     "classify":   {"ball": 1e-3, "dwell": 1},
//     "outputs":    "out",
//     "grid":       {"x": [[lo, hi, n], ...], "z": [lo, hi, n]},      (roa only)
//     "compare_controller": { ...controller... }                       (roa only)
//   }

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sfstab/examples.hpp"
#include "sfstab/normal_form.hpp"
#include "sfstab/roa.hpp"
#include "sfstab/sim.hpp"

namespace sfstab {

struct PolynomialTerm {
  double coef = 0.0;
  std::vector<int> x_powers;
  int z_power = 0;
  int eps_power = 0;

  bool operator==(const PolynomialTerm&) const = default;
};

struct SystemSpec {
  enum class Builtin { Planar, TunnelDiode, Custom };

  Builtin builtin = Builtin::Planar;
  int k = 2;                                    // custom only
  std::vector<std::vector<PolynomialTerm>> f;   // custom only, one sum per component
  double L = 1.0;                               // tunnel diode only
  double C = 1.0;                               // tunnel diode only

  bool operator==(const SystemSpec&) const = default;
};

struct ControllerConfig {
  enum class Kind { None, Thm2, Thm2Plus3, HighGain };

  Kind kind = Kind::None;
  Vector a;
  double b = 1.0;
  std::optional<Vector> c;
  Vector K;
  Vector chi_star;
  Vector A;
  double B = 1.0;
  bool cancel_constants = false;

  bool operator==(const ControllerConfig&) const = default;
};

struct IntegratorOverrides {
  std::optional<double> rtol;
  std::optional<double> atol;
  std::optional<double> max_step;
  std::optional<double> divergence_norm;
  std::optional<double> min_step;
  std::optional<double> record_stride;

  bool operator==(const IntegratorOverrides&) const = default;
};

struct ScenarioConfig {
  SystemSpec system;
  double epsilon = 0.05;
  ControllerConfig controller;
  std::vector<Vector> ics;
  double t_final = 10.0;
  double switch_on_time = 0.0;
  IntegratorOverrides integrator;
  ClassifyParams classify;
  std::string outputs = "out";
  std::optional<GridSpec> grid;
  std::optional<ControllerConfig> compare_controller;

  bool operator==(const ScenarioConfig&) const = default;

  /// Slow states plus the fast state.
  std::size_t state_dim() const;
  IntegratorConfig integrator_config() const;
};

/// Throws ConfigError naming the offending key or value.
ScenarioConfig parse_config(const std::string& json_text);
ScenarioConfig load_config(const std::string& path);
std::string serialize_config(const ScenarioConfig& cfg);

/// Normal-form system for the planar or custom builtin.
NormalFormSystem build_normal_form(const SystemSpec& spec, double epsilon);

/// Open-loop and closed-loop ODEs for a scenario.
struct ScenarioSystems {
  OdeSystem open_loop;
  OdeSystem closed_loop;
  std::string variant;
};
ScenarioSystems build_scenario(const ScenarioConfig& cfg, const ControllerConfig& controller);

struct RunOptions {
  std::optional<std::string> out_dir;
  std::size_t jobs = 1;
};

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitContract = 2, kExitVerify = 3 };

int run_simulate(const ScenarioConfig& cfg, const RunOptions& opts, std::ostream& log);
int run_roa(const ScenarioConfig& cfg, const RunOptions& opts, std::ostream& log);

// ---------------------------------------------------------------------------
// Reproduction of the tunnel-diode study.

struct Ex1Options {
  examples::TunnelDiodeParams circuit;
  examples::Example1Gains gains;  // cancel_highgain_constants selects the v variant under contract
  std::vector<Vector> ics{{-10.0, 10.0, 10.0}, {50.0, -30.0, -6.0}};
  double switch_on_time = 10.0;
  double t_final = 30.0;
  double u_tolerance = 1e-2;
  double v_tolerance = 5e-2;
  double gain_ratio_bound = 0.15;
};

struct Ex1Run {
  std::string controller;  // "u", "v" (as configured) or "v-alt" (other constant handling)
  std::size_t ic = 0;
  Trajectory traj;
  double final_norm = 0.0;
  double control_sup = 0.0;  // over [switch_on_time, t_final]
};

struct Ex1Report {
  std::vector<Ex1Run> runs;
  bool v_cancels_constants = false;
  double sup_u = 0.0;
  double sup_v = 0.0;
  double sup_v_alt = 0.0;
  double ratio = 0.0;      // max over ICs of sup_u / sup_v
  double ratio_alt = 0.0;  // same against v-alt
  double u_final = 0.0;    // max final norm per variant
  double v_final = 0.0;
  double v_alt_final = 0.0;
  bool u_converged = false;
  bool v_converged = false;
  bool ratio_ok = false;
  bool ok() const { return u_converged && v_converged && ratio_ok; }
};

Ex1Report run_example1(const Ex1Options& opts, std::size_t jobs = 1);

/// Overrides on top of the defaults.  Keys: epsilon, L, C, a1, a2, b, A1, A2,
/// B, cancel_highgain_constants, ics, switch_on_time, t_final, u_tolerance,
/// v_tolerance, gain_ratio_bound.
Ex1Options parse_ex1_options(const std::string& json_text);

// ---------------------------------------------------------------------------
// Reproduction of the planar fold study and its region-of-attraction claim.

struct Ex2Options {
  std::vector<double> epsilons{0.05, 0.01};
  double a = 1.0;
  double b = 3.0;
  double chi_star = -2.0;
  std::vector<double> K_candidates{1, 2, 5, 10, 20, 50};
  std::vector<Vector> ics{{-2.0, 2.0}, {0.1, 1.0}};
  double t_final = 10.0;
  double roa_epsilon = 0.01;
  GridSpec grid{{{-3.0, 3.0, 41}}, {-3.0, 3.0, 41}};
  ClassifyParams classify;
  bool run_roa = true;
};

struct Ex2Run {
  double epsilon = 0.0;
  std::string variant;  // "open-loop", "K=0", "K=<K*>"
  std::size_t ic = 0;
  Outcome outcome;
};

struct Ex2Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Ex2Report {
  std::vector<Ex2Run> runs;
  std::optional<double> K_star;
  std::optional<RoAReport> roa_k0;
  std::optional<RoAReport> roa_kstar;
  std::optional<RoAComparison> comparison;
  std::vector<Ex2Check> checks;

  bool ok() const;
};

Outcome simulate_planar(double epsilon, double K, const Vector& ic, const Ex2Options& opts,
                        bool open_loop = false);
Ex2Report run_example2(const Ex2Options& opts, std::size_t jobs = 1);

/// Keys: epsilons, a, b, chi_star, K_candidates, ics, t_final, roa_epsilon,
/// grid, classify, run_roa.
Ex2Options parse_ex2_options(const std::string& json_text);

}  // namespace sfstab
