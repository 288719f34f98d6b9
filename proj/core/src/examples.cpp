#include "sfstab/examples.hpp"

#include <algorithm>
#include <cmath>

#include "sfstab/errors.hpp"

namespace sfstab::examples {

double diode_current(double V) { return ((V - 9.0) * V + 24.0) * V; }

double diode_slope(double V) { return (3.0 * V - 18.0) * V + 24.0; }

std::vector<FoldPoint> diode_fold_points() {
  // 3 V^2 - 18 V + 24 = 0
  const double a = 3.0, b = -18.0, c = 24.0;
  const double disc = std::sqrt(b * b - 4.0 * a * c);
  const double q = -0.5 * (b - disc);  // b < 0: stable form
  std::vector<FoldPoint> pts{{q / a, 0.0}, {c / q, 0.0}};
  for (auto& p : pts) p.I_D = diode_current(p.V_D);
  std::sort(pts.begin(), pts.end(), [](const FoldPoint& l, const FoldPoint& r) {
    return l.V_D < r.V_D;
  });
  return pts;
}

TunnelDiode::TunnelDiode(TunnelDiodeParams p) : p_(p) {
  if (!(p_.L > 0.0) || !(p_.Cap > 0.0) || !(p_.epsilon > 0.0)) {
    throw PreconditionError("tunnel diode parameters L, C, epsilon must be > 0");
  }
}

std::array<double, 3> TunnelDiode::rhs(std::span<const double> y, std::span<const double> u) const {
  require_dim(y, 3, "tunnel diode state");
  require_dim(u, 2, "tunnel diode input");
  const double x1 = y[0], x2 = y[1], z = y[2];
  return {(x2 + z + 4.0 + u[0]) / p_.L, (16.0 - x1 - u[1]) / p_.Cap,
          -(3.0 * z * z + x1 + z * z * z) / p_.epsilon};
}

std::array<double, 3> TunnelDiode::circuit_rhs(const CircuitState& c,
                                               std::span<const double> u) const {
  require_dim(u, 2, "tunnel diode input");
  return {(c.I_L - u[1]) / p_.Cap, -(c.V_C + c.V_D + u[0]) / p_.L,
          -(diode_current(c.V_D) - c.I_L) / p_.epsilon};
}

std::array<double, 3> TunnelDiode::to_translated(const CircuitState& c) {
  return {16.0 - c.I_L, c.V_C, c.V_D - 4.0};
}

CircuitState TunnelDiode::to_circuit(std::span<const double> y) {
  require_dim(y, 3, "tunnel diode state");
  return {y[1], 16.0 - y[0], y[2] + 4.0};
}

std::array<double, 4> TunnelDiode::fast_coefficients(double x1) { return {-x1, 0.0, -3.0, -1.0}; }

OdeSystem TunnelDiode::closed_loop(CircuitController controller) const {
  OdeSystem ode;
  ode.dim = 3;
  ode.control_dim = 2;
  ode.rhs = [self = *this, controller](double, std::span<const double> y, std::span<double> dy) {
    const std::array<double, 2> u = controller ? controller(y) : std::array<double, 2>{0.0, 0.0};
    const auto d = self.rhs(y, u);
    std::copy(d.begin(), d.end(), dy.begin());
  };
  ode.control = [controller](double, std::span<const double> y, std::span<double> u) {
    const std::array<double, 2> c = controller ? controller(y) : std::array<double, 2>{0.0, 0.0};
    std::copy(c.begin(), c.end(), u.begin());
  };
  return ode;
}

TunnelDiode build_tunnel_diode(const TunnelDiodeParams& p) { return TunnelDiode(p); }

std::pair<CircuitController, CircuitController> example1_controllers(const Example1Gains& g) {
  if (!(g.epsilon > 0.0) || !(g.a1 > 0.0) || !(g.a2 > 0.0) || !(g.b > 0.0) || !(g.A1 > 0.0) ||
      !(g.A2 > 0.0) || !(g.B > 0.0)) {
    throw PreconditionError("Example 1 gains and epsilon must be > 0");
  }
  const double x_gain = std::pow(g.epsilon, -2.0 / 3.0);
  const double z_gain = std::pow(g.epsilon, -1.0 / 3.0);
  CircuitController u = [=](std::span<const double> y) {
    return std::array<double, 2>{-4.0 - x_gain * g.a1 * y[0] + g.b * z_gain * y[2],
                                 16.0 + x_gain * g.a2 * y[1]};
  };
  const double c1 = g.cancel_highgain_constants ? 4.0 : 0.0;
  const double c2 = g.cancel_highgain_constants ? 16.0 : 0.0;
  CircuitController v = [=](std::span<const double> y) {
    const double v1 = (-g.A1 * y[0] + g.B * y[2]) / g.epsilon - c1;
    const double v2 = (-g.A2 * y[1]) / g.epsilon - c2;
    return std::array<double, 2>{v1, -v2};
  };
  return {std::move(u), std::move(v)};
}

NormalFormSystem build_planar_example(double epsilon) {
  if (!(epsilon > 0.0)) throw PreconditionError("planar example requires epsilon > 0");
  NormalFormSystem sys;
  sys.k = 2;
  sys.epsilon = epsilon;
  sys.slow_f = [](std::span<const double> x, double z, double) { return Vector{1.0 + x[0] + z}; };
  return sys;
}

}  // namespace sfstab::examples
