#include "sfstab/sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "sfstab/errors.hpp"

namespace sfstab {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr std::array<double, 7> kC{0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA21 = 1.0 / 5;
constexpr double kA31 = 3.0 / 40, kA32 = 9.0 / 40;
constexpr double kA41 = 44.0 / 45, kA42 = -56.0 / 15, kA43 = 32.0 / 9;
constexpr double kA51 = 19372.0 / 6561, kA52 = -25360.0 / 2187, kA53 = 64448.0 / 6561,
                 kA54 = -212.0 / 729;
constexpr double kA61 = 9017.0 / 3168, kA62 = -355.0 / 33, kA63 = 46732.0 / 5247,
                 kA64 = 49.0 / 176, kA65 = -5103.0 / 18656;
// fifth-order weights (also row 7 of A)
constexpr double kB1 = 35.0 / 384, kB3 = 500.0 / 1113, kB4 = 125.0 / 192, kB5 = -2187.0 / 6784,
                 kB6 = 11.0 / 84;
// b - b_hat
constexpr double kE1 = 71.0 / 57600, kE3 = -71.0 / 16695, kE4 = 71.0 / 1920,
                 kE5 = -17253.0 / 339200, kE6 = 22.0 / 525, kE7 = -1.0 / 40;

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double e) { return std::isfinite(e); });
}

class Stepper {
 public:
  Stepper(const OdeSystem& sys, const IntegratorConfig& cfg)
      : sys_(sys), cfg_(cfg), n_(sys.dim), k_(7, Vector(n_)), tmp_(n_), y5_(n_) {}

  void eval(double t, std::span<const double> y, Vector& out) { sys_.rhs(t, y, out); }

  // Attempts a step of size h from (t, y) with k_[0] = f(t, y) already set.
  // Returns the scaled error norm (inf when a stage is non-finite).
  double attempt(double t, const Vector& y, double h) {
    auto stage = [&](std::initializer_list<std::pair<int, double>> terms) {
      for (std::size_t i = 0; i < n_; ++i) {
        double acc = y[i];
        for (const auto& [idx, a] : terms) acc += h * a * k_[static_cast<std::size_t>(idx)][i];
        tmp_[i] = acc;
      }
    };
    stage({{0, kA21}});
    eval(t + kC[1] * h, tmp_, k_[1]);
    stage({{0, kA31}, {1, kA32}});
    eval(t + kC[2] * h, tmp_, k_[2]);
    stage({{0, kA41}, {1, kA42}, {2, kA43}});
    eval(t + kC[3] * h, tmp_, k_[3]);
    stage({{0, kA51}, {1, kA52}, {2, kA53}, {3, kA54}});
    eval(t + kC[4] * h, tmp_, k_[4]);
    stage({{0, kA61}, {1, kA62}, {2, kA63}, {3, kA64}, {4, kA65}});
    eval(t + kC[5] * h, tmp_, k_[5]);
    for (std::size_t i = 0; i < n_; ++i) {
      y5_[i] = y[i] + h * (kB1 * k_[0][i] + kB3 * k_[2][i] + kB4 * k_[3][i] + kB5 * k_[4][i] +
                           kB6 * k_[5][i]);
    }
    eval(t + h, y5_, k_[6]);
    if (!all_finite(y5_) || !all_finite(k_[6])) return std::numeric_limits<double>::infinity();

    double sum = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double e = h * (kE1 * k_[0][i] + kE3 * k_[2][i] + kE4 * k_[3][i] + kE5 * k_[4][i] +
                            kE6 * k_[5][i] + kE7 * k_[6][i]);
      const double sc = cfg_.atol + cfg_.rtol * std::max(std::abs(y[i]), std::abs(y5_[i]));
      sum += (e / sc) * (e / sc);
    }
    const double err = std::sqrt(sum / static_cast<double>(n_));
    return std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
  }

  // Starting step after Hairer, Norsett & Wanner (II.4).
  double initial_step(double t, const Vector& y) {
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double sc = cfg_.atol + cfg_.rtol * std::abs(y[i]);
      d0 += (y[i] / sc) * (y[i] / sc);
      d1 += (k_[0][i] / sc) * (k_[0][i] / sc);
    }
    d0 = std::sqrt(d0 / n_);
    d1 = std::sqrt(d1 / n_);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, cfg_.max_step);
    for (std::size_t i = 0; i < n_; ++i) tmp_[i] = y[i] + h0 * k_[0][i];
    eval(t + h0, tmp_, k_[1]);
    double d2 = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double sc = cfg_.atol + cfg_.rtol * std::abs(y[i]);
      const double dd = (k_[1][i] - k_[0][i]) / sc;
      d2 += dd * dd;
    }
    d2 = std::sqrt(d2 / n_) / h0;
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 1.0 / 5.0);
    double h = std::min({100.0 * h0, h1, cfg_.max_step});
    if (!std::isfinite(h) || h <= 0.0) h = std::min(1e-6, cfg_.max_step);
    return std::max(h, cfg_.min_step);
  }

  Vector& k1() { return k_[0]; }
  Vector& k7() { return k_[6]; }
  Vector& y5() { return y5_; }

 private:
  const OdeSystem& sys_;
  const IntegratorConfig& cfg_;
  std::size_t n_;
  std::vector<Vector> k_;
  Vector tmp_;
  Vector y5_;
};

void record(Trajectory& traj, const OdeSystem& sys, double t, const Vector& y) {
  traj.times.push_back(t);
  traj.states.push_back(y);
  Vector u(sys.control_dim, 0.0);
  if (sys.control && sys.control_dim > 0) sys.control(t, y, u);
  traj.controls.push_back(std::move(u));
}

}  // namespace

IntegratorConfig IntegratorConfig::for_epsilon(double epsilon, double t_final) {
  IntegratorConfig cfg;
  cfg.max_step = std::min(epsilon / 2.0, 1e-3);
  cfg.t_final = t_final;
  return cfg;
}

void check_config(const IntegratorConfig& cfg) {
  if (!(cfg.rtol > 0.0) || !(cfg.atol > 0.0)) throw PreconditionError("rtol and atol must be > 0");
  if (!(cfg.min_step > 0.0) || !(cfg.min_step < cfg.max_step)) {
    throw PreconditionError("require 0 < min_step < max_step");
  }
  if (!(cfg.divergence_norm > 0.0)) throw PreconditionError("divergence_norm must be > 0");
  if (!(cfg.record_stride > 0.0)) throw PreconditionError("record_stride must be > 0");
  if (!std::isfinite(cfg.t_final)) throw PreconditionError("t_final must be finite");
}

const char* outcome_name(Outcome::Kind kind) {
  switch (kind) {
    case Outcome::Kind::Converged: return "converged";
    case Outcome::Kind::Diverged: return "diverged";
    case Outcome::Kind::Undecided: return "undecided";
  }
  return "undecided";
}

double euclidean_norm(std::span<const double> v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s);
}

Trajectory integrate(const OdeSystem& sys, std::span<const double> ic, const IntegratorConfig& cfg,
                     double t0) {
  check_config(cfg);
  if (ic.size() != sys.dim) {
    throw DimensionError(fmt::format("initial condition has {} components, system has {}",
                                     ic.size(), sys.dim));
  }
  if (!(cfg.t_final > t0)) throw PreconditionError("t_final must exceed the start time");

  Trajectory traj;
  Stepper stepper(sys, cfg);
  Vector y(ic.begin(), ic.end());
  double t = t0;

  stepper.eval(t, y, stepper.k1());
  if (!all_finite(y) || !all_finite(stepper.k1())) {
    throw NumericalError("right-hand side is not finite at the initial condition");
  }
  record(traj, sys, t, y);

  double h = stepper.initial_step(t, y);
  std::size_t next_sample = 1;
  auto sample_time = [&](std::size_t j) {
    return std::min(t0 + static_cast<double>(j) * cfg.record_stride, cfg.t_final);
  };

  constexpr double kSafety = 0.9;
  constexpr double kMinFactor = 0.2;
  constexpr double kMaxFactor = 5.0;

  while (t < cfg.t_final) {
    const double target = sample_time(next_sample);
    double h_try = std::min(h, cfg.max_step);
    bool lands = false;
    if (t + h_try >= target || target - (t + h_try) < 1e-12 * std::max(1.0, std::abs(target))) {
      h_try = target - t;
      lands = true;
    }

    const double err = stepper.attempt(t, y, h_try);
    if (err <= 1.0) {
      t = lands ? target : t + h_try;
      y.swap(stepper.y5());
      stepper.k1().swap(stepper.k7());  // FSAL
      ++traj.accepted_steps;

      const double factor =
          err == 0.0 ? kMaxFactor
                     : std::clamp(kSafety * std::pow(err, -0.2), kMinFactor, kMaxFactor);
      // a clipped step does not shrink the proposal
      h = lands ? std::max(h, h_try * factor) : h_try * factor;

      if (euclidean_norm(y) > cfg.divergence_norm) {
        record(traj, sys, t, y);
        traj.outcome = Outcome::diverged(t);
        return traj;
      }
      if (lands) {
        record(traj, sys, t, y);
        while (sample_time(next_sample) <= t && t < cfg.t_final) ++next_sample;
      }
    } else {
      ++traj.rejected_steps;
      const double factor =
          std::isfinite(err) ? std::clamp(kSafety * std::pow(err, -0.2), kMinFactor, 1.0)
                             : kMinFactor;
      h = h_try * factor;
      if (h < cfg.min_step) {
        // step collapse: finite-time blow-up
        traj.outcome = Outcome::diverged(t);
        if (traj.times.back() != t) record(traj, sys, t, y);
        return traj;
      }
    }
  }
  traj.outcome = Outcome::undecided();
  return traj;
}

Trajectory integrate_switched(const OdeSystem& before, const OdeSystem& after,
                              std::span<const double> ic, double switch_time,
                              const IntegratorConfig& cfg) {
  if (!(switch_time > 0.0)) return integrate(after, ic, cfg, 0.0);
  IntegratorConfig first = cfg;
  first.t_final = std::min(switch_time, cfg.t_final);
  Trajectory a = integrate(before, ic, first, 0.0);
  if (a.outcome.is_diverged() || switch_time >= cfg.t_final) return a;

  Trajectory b = integrate(after, a.final_state(), cfg, switch_time);
  a.times.pop_back();
  a.states.pop_back();
  a.controls.pop_back();
  a.times.insert(a.times.end(), b.times.begin(), b.times.end());
  a.states.insert(a.states.end(), b.states.begin(), b.states.end());
  a.controls.insert(a.controls.end(), b.controls.begin(), b.controls.end());
  a.accepted_steps += b.accepted_steps;
  a.rejected_steps += b.rejected_steps;
  a.outcome = b.outcome;
  return a;
}

Outcome classify(const Trajectory& traj, double ball, double dwell) {
  if (traj.outcome.is_diverged()) return traj.outcome;
  if (traj.empty()) return Outcome::undecided();
  const double t_end = traj.times.back();
  if (t_end - traj.times.front() < dwell) return Outcome::undecided();

  // earliest index from which every later sample is inside the ball
  std::size_t first_inside = traj.size();
  for (std::size_t i = traj.size(); i-- > 0;) {
    if (euclidean_norm(traj.states[i]) < ball) {
      first_inside = i;
    } else {
      break;
    }
  }
  if (first_inside == traj.size()) return Outcome::undecided();
  const double t_enter = traj.times[first_inside];
  if (t_end - t_enter < dwell && first_inside != 0) return Outcome::undecided();
  return Outcome::converged(t_enter);
}

double control_sup_norm(const Trajectory& traj, double t0, double t1) {
  double sup = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (traj.times[i] < t0 || traj.times[i] > t1) continue;
    any = true;
    for (double u : traj.controls[i]) sup = std::max(sup, std::abs(u));
  }
  if (!any) throw PreconditionError("control_sup_norm: window contains no samples");
  return sup;
}

State state_from(std::span<const double> y) {
  State s;
  s.x.assign(y.begin(), y.end() - 1);
  s.z = y.back();
  return s;
}

Vector flatten(const State& s) {
  Vector y(s.x);
  y.push_back(s.z);
  return y;
}

namespace {

OdeSystem closed_loop(const NormalFormSystem& sys, Controller controller, bool fast_time) {
  auto errors = validate(sys);
  if (!errors.empty()) throw PreconditionError("invalid system: " + errors.front());
  const std::size_t n = sys.slow_dim();
  OdeSystem ode;
  ode.dim = n + 1;
  ode.control_dim = n;
  ode.rhs = [sys, controller, fast_time](double, std::span<const double> y, std::span<double> dy) {
    const State s = state_from(y);
    const ControlInput u = controller ? controller(s, sys.epsilon)
                                      : ControlInput{Vector(sys.slow_dim(), 0.0)};
    const StateDerivative d = fast_time ? eval_rhs_fast(sys, s, u) : eval_rhs_slow(sys, s, u);
    std::copy(d.dx.begin(), d.dx.end(), dy.begin());
    dy[d.dx.size()] = d.dz;
  };
  ode.control = [sys, controller](double, std::span<const double> y, std::span<double> u) {
    if (!controller) {
      std::fill(u.begin(), u.end(), 0.0);
      return;
    }
    const ControlInput c = controller(state_from(y), sys.epsilon);
    std::copy(c.u.begin(), c.u.end(), u.begin());
  };
  return ode;
}

}  // namespace

OdeSystem closed_loop_slow(const NormalFormSystem& sys, Controller controller) {
  return closed_loop(sys, std::move(controller), false);
}

OdeSystem closed_loop_fast(const NormalFormSystem& sys, Controller controller) {
  return closed_loop(sys, std::move(controller), true);
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const std::size_t nx = traj.empty() ? 0 : traj.states.front().size() - 1;
  const std::size_t nu = traj.empty() ? 0 : traj.controls.front().size();
  os << 't';
  for (std::size_t i = 1; i <= nx; ++i) os << ",x" << i;
  os << ",z";
  for (std::size_t i = 1; i <= nu; ++i) os << ",u" << i;
  os << '\n';
  for (std::size_t r = 0; r < traj.size(); ++r) {
    os << fmt::format("{:.17g}", traj.times[r]);
    for (double v : traj.states[r]) os << fmt::format(",{:.17g}", v);
    for (double v : traj.controls[r]) os << fmt::format(",{:.17g}", v);
    os << '\n';
  }
}

}  // namespace sfstab
