#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "sfstab/control.hpp"
#include "sfstab/errors.hpp"
#include "sfstab/examples.hpp"
#include "sfstab/sim.hpp"

using namespace sfstab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

OdeSystem decay() {
  return {1, [](double, std::span<const double> y, std::span<double> dy) { dy[0] = -y[0]; }, 0, {}};
}

NormalFormSystem zero_system(int k, double eps) {
  return {k, eps, [](std::span<const double> x, double, double) { return Vector(x.size(), 0.0); }};
}

}  // namespace

TEST_CASE("config defaults and checks") {
  const IntegratorConfig c = IntegratorConfig::for_epsilon(0.01, 3.0);
  CHECK(c.max_step == 1e-3);
  CHECK(IntegratorConfig::for_epsilon(0.001, 1.0).max_step == 0.0005);
  CHECK(c.t_final == 3.0);

  IntegratorConfig bad = c;
  bad.min_step = 1.0;
  CHECK_THROWS_AS(check_config(bad), PreconditionError);
  bad = c;
  bad.rtol = 0.0;
  CHECK_THROWS_AS(check_config(bad), PreconditionError);
}

TEST_CASE("scalar exponential") {
  IntegratorConfig cfg;
  cfg.t_final = 1.0;
  const Trajectory t = integrate(decay(), Vector{1.0}, cfg);
  CHECK_THAT(t.final_state()[0], WithinAbs(std::exp(-1.0), 1e-7));
  CHECK(t.times.back() == 1.0);
  CHECK(t.size() == 101);
  for (std::size_t i = 1; i < t.size(); ++i) CHECK(t.times[i] > t.times[i - 1]);
  CHECK(t.states.size() == t.size());
  CHECK(t.controls.size() == t.size());
}

TEST_CASE("layer flow settles on the stable root") {
  // x frozen at -1: eps z' = -(z^2 - 1)
  NormalFormSystem sys = zero_system(2, 0.1);
  IntegratorConfig cfg = IntegratorConfig::for_epsilon(0.1, 2.0);
  const Trajectory t = integrate(closed_loop_slow(sys, {}), Vector{-1.0, 2.0}, cfg);
  CHECK(t.final_state()[0] == -1.0);
  // closed form: z = coth(t/eps + atanh(1/2))
  const double s = 2.0 / 0.1;
  const double expected = (std::exp(2 * s) * 3.0 + 1.0) / (std::exp(2 * s) * 3.0 - 1.0);
  CHECK_THAT(t.final_state()[1], WithinAbs(expected, 1e-6));
  CHECK_THAT(t.final_state()[1], WithinAbs(1.0, 1e-6));

  for (std::size_t i = 0; i < t.size(); i += 7) {
    const double tau = t.times[i] / 0.1;
    const double z = std::tanh(tau + std::atanh(0.5));
    CHECK_THAT(t.states[i][1], WithinAbs(1.0 / z, 1e-6));
  }
}

TEST_CASE("finite-time blow-up is flagged") {
  const NormalFormSystem planar = examples::build_planar_example(0.05);
  const Trajectory t = integrate(closed_loop_slow(planar, {}), Vector{0.1, 1.0}, IntegratorConfig::for_epsilon(0.05, 10.0));
  CHECK(t.outcome.is_diverged());
  CHECK(t.outcome.time > 0.0);
  CHECK(t.outcome.time < 10.0);
  CHECK(classify(t).is_diverged());

  for (double x : {0.01, 0.5, 2.0}) {
    const Trajectory l = integrate(closed_loop_slow(zero_system(2, 0.01), {}), Vector{x, 0.0},
                                   IntegratorConfig::for_epsilon(0.01, 5.0));
    CHECK(l.outcome.is_diverged());
  }
}

TEST_CASE("non-finite right-hand side at the initial condition") {
  OdeSystem bad{1, [](double, std::span<const double>, std::span<double> dy) { dy[0] = NAN; }, 0, {}};
  CHECK_THROWS_AS(integrate(bad, Vector{1.0}, IntegratorConfig{}), NumericalError);
  OdeSystem late{1, [](double t, std::span<const double>, std::span<double> dy) { dy[0] = t > 0.5 ? NAN : 1.0; }, 0, {}};
  IntegratorConfig cfg;
  CHECK(integrate(late, Vector{1.0}, cfg).outcome.is_diverged());
}

TEST_CASE("classification") {
  Trajectory t;
  for (int i = 0; i <= 300; ++i) {
    t.times.push_back(i * 0.01);
    t.states.push_back(Vector{i >= 100 ? 0.0 : 1.0, 0.0});
    t.controls.push_back(Vector{});
  }
  const Outcome o = classify(t);
  CHECK(o.is_converged());
  CHECK_THAT(o.time, WithinAbs(1.0, 1e-12));

  Trajectory osc = t;
  osc.states.back() = Vector{0.5, 0.0};
  CHECK(classify(osc).kind == Outcome::Kind::Undecided);

  Trajectory esc = t;
  esc.outcome = Outcome::diverged(1.5);
  CHECK(classify(esc) == Outcome::diverged(1.5));
  CHECK(std::string(outcome_name(Outcome::Kind::Converged)) == "converged");
}

TEST_CASE("control sup norm") {
  Trajectory t;
  for (int i = 0; i < 5; ++i) {
    t.times.push_back(i);
    t.states.push_back(Vector{0.0});
    t.controls.push_back(Vector{-4.0, 16.0});
  }
  CHECK(control_sup_norm(t, 0.0, 4.0) == 16.0);
  for (auto& u : t.controls) u = {0.0, 0.0};
  CHECK(control_sup_norm(t, 1.0, 2.0) == 0.0);
  CHECK_THROWS_AS(control_sup_norm(t, 10.0, 11.0), PreconditionError);
}

TEST_CASE("slow and fast time integrate to the same endpoint") {
  const NormalFormSystem sys = examples::build_planar_example(0.05);
  const Controller law = make_thm2_controller(2, {{1.0}, {1.0}, 3.0});
  IntegratorConfig slow = IntegratorConfig::for_epsilon(0.05, 2.0);
  IntegratorConfig fast = slow;
  fast.t_final = 2.0 / 0.05;
  fast.max_step = slow.max_step / 0.05;
  fast.record_stride = slow.record_stride / 0.05;
  const Trajectory a = integrate(closed_loop_slow(sys, law), Vector{-0.5, 0.5}, slow);
  const Trajectory b = integrate(closed_loop_fast(sys, law), Vector{-0.5, 0.5}, fast);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK_THAT(a.final_state()[j], WithinAbs(b.final_state()[j], 1e-6 * (1e-3 + std::abs(a.final_state()[j]))));
  }
}

TEST_CASE("tolerance halving consistency") {
  const NormalFormSystem sys = examples::build_planar_example(0.05);
  const OdeSystem ode = closed_loop_slow(sys, make_thm2_controller(2, {{1.0}, {1.0}, 3.0}));
  IntegratorConfig c1 = IntegratorConfig::for_epsilon(0.05, 1.0);
  IntegratorConfig c2 = c1;
  c2.rtol /= 2;
  c2.atol /= 2;
  c2.max_step /= 2;
  const Vector ic{-2.0, 2.0};
  const Vector a = integrate(ode, ic, c1).final_state(), b = integrate(ode, ic, c2).final_state();
  const double scale = std::max(euclidean_norm(a), 1.0);
  for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(a[j] - b[j]) <= 10 * c1.rtol * scale);
}

TEST_CASE("determinism") {
  const NormalFormSystem sys = examples::build_planar_example(0.01);
  const OdeSystem ode = closed_loop_slow(sys, make_thm2_controller(2, {{1.0}, {1.0}, 3.0}));
  const IntegratorConfig cfg = IntegratorConfig::for_epsilon(0.01, 3.0);
  const Trajectory a = integrate(ode, Vector{-2.0, 2.0}, cfg), b = integrate(ode, Vector{-2.0, 2.0}, cfg);
  CHECK(a.times == b.times);
  CHECK(a.states == b.states);
  CHECK(a.controls == b.controls);
}

TEST_CASE("switched integration") {
  OdeSystem grow{1, [](double, std::span<const double> y, std::span<double> dy) { dy[0] = y[0]; }, 0, {}};
  IntegratorConfig cfg;
  cfg.t_final = 2.0;
  const Trajectory t = integrate_switched(grow, decay(), Vector{1.0}, 1.0, cfg);
  CHECK_THAT(t.final_state()[0], WithinRel(1.0, 1e-7));
  for (std::size_t i = 1; i < t.size(); ++i) CHECK(t.times[i] > t.times[i - 1]);
  CHECK(t.size() == 201);
}

TEST_CASE("trajectory csv") {
  const NormalFormSystem sys = examples::build_planar_example(0.05);
  IntegratorConfig cfg = IntegratorConfig::for_epsilon(0.05, 0.05);
  const Trajectory t = integrate(closed_loop_slow(sys, make_thm2_controller(2, {{1.0}, {1.0}, 3.0})),
                                 Vector{1.0 / 3.0, 0.1}, cfg);
  std::ostringstream os;
  write_trajectory_csv(os, t);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "t,x1,z,u1");
  std::getline(is, line);
  CHECK(line.rfind("0,0.33333333333333331,0.10000000000000001,", 0) == 0);
  std::size_t rows = 1;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == t.size());
}
