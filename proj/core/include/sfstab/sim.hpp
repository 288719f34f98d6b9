#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sfstab/normal_form.hpp"

namespace sfstab {

struct IntegratorConfig {
  double rtol = 1e-8;
  double atol = 1e-10;
  double max_step = 1e-3;
  double divergence_norm = 1e6;
  double min_step = 1e-13;
  double t_final = 1.0;
  double record_stride = 1e-2;

  /// Defaults with max_step = min(eps/2, 1e-3).
  static IntegratorConfig for_epsilon(double epsilon, double t_final);

  bool operator==(const IntegratorConfig&) const = default;
};

/// Throws PreconditionError on an inconsistent configuration.
void check_config(const IntegratorConfig& cfg);

struct Outcome {
  enum class Kind { Converged, Diverged, Undecided };

  Kind kind = Kind::Undecided;
  double time = 0.0;  // t_enter for Converged, t_escape for Diverged

  static Outcome converged(double t_enter) { return {Kind::Converged, t_enter}; }
  static Outcome diverged(double t_escape) { return {Kind::Diverged, t_escape}; }
  static Outcome undecided() { return {Kind::Undecided, 0.0}; }

  bool is_converged() const { return kind == Kind::Converged; }
  bool is_diverged() const { return kind == Kind::Diverged; }

  bool operator==(const Outcome&) const = default;
};

const char* outcome_name(Outcome::Kind kind);

using OdeRhs = std::function<void(double t, std::span<const double> y, std::span<double> dy)>;
using ControlProbe = std::function<void(double t, std::span<const double> y, std::span<double> u)>;

/// A first-order system y' = rhs(t, y) with an optional recorded control signal.
struct OdeSystem {
  std::size_t dim = 0;
  OdeRhs rhs;
  std::size_t control_dim = 0;
  ControlProbe control;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> controls;
  Outcome outcome;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
  const Vector& final_state() const { return states.back(); }
};

/// Adaptive Dormand-Prince 5(4) integration from t0 to cfg.t_final.  Samples
/// are recorded at t0 + j * record_stride (steps are clipped to land on them)
/// and at the final time.  Escape beyond divergence_norm, a step below
/// min_step or non-finite internal values end the run with Diverged;
/// otherwise the outcome is Undecided until classify() is applied.
Trajectory integrate(const OdeSystem& sys, std::span<const double> ic, const IntegratorConfig& cfg,
                     double t0 = 0.0);

/// Runs `before` on [0, switch_time] and `after` on [switch_time, cfg.t_final].
/// The sample at switch_time is taken from the second segment.
Trajectory integrate_switched(const OdeSystem& before, const OdeSystem& after,
                              std::span<const double> ic, double switch_time,
                              const IntegratorConfig& cfg);

/// Converged if |y| < ball over the last `dwell` time units; Diverged if the
/// integrator flagged escape; Undecided otherwise.
Outcome classify(const Trajectory& traj, double ball = 1e-3, double dwell = 1.0);

/// max over samples with t in [t0, t1] of max_i |u_i|.
double control_sup_norm(const Trajectory& traj, double t0, double t1);

/// y = (x_1..x_{k-1}, z) in slow time: x' = f + u, z' = g / eps.
OdeSystem closed_loop_slow(const NormalFormSystem& sys, Controller controller);

/// Same loop in fast time tau = t / eps.
OdeSystem closed_loop_fast(const NormalFormSystem& sys, Controller controller);

State state_from(std::span<const double> y);
Vector flatten(const State& s);
double euclidean_norm(std::span<const double> v);

/// Header `t,x1,...,x{n},z,u1,...,u{m}`; 17 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

}  // namespace sfstab
