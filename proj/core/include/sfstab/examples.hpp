#pragma once

// Builders for the two worked systems.
//
// Tunnel-diode circuit, I_D(V) = V^3 - 9 V^2 + 24 V, regularized by a
// parasitic capacitance eps.  Translated coordinates around the fold p2:
//
//     x1 = 16 - I_L,  x2 = V_C,  z = V_D - 4
//
//     x1' = (x2 + z + 4 + u1) / L
//     x2' = (16 - x1 - u2) / C
//     eps z' = -(3 z^2 + x1 + z^3)
//
// Planar fold system:  x' = 1 + x + z + u,  eps z' = -(z^2 + x).

#include <array>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "sfstab/normal_form.hpp"
#include "sfstab/sim.hpp"

namespace sfstab::examples {

struct TunnelDiodeParams {
  double L = 1.0;
  double Cap = 1.0;
  double epsilon = 0.01;
};

struct CircuitState {
  double V_C = 0.0;
  double I_L = 0.0;
  double V_D = 0.0;
};

struct FoldPoint {
  double V_D = 0.0;
  double I_D = 0.0;
};

double diode_current(double V);
double diode_slope(double V);

/// Roots of dI_D/dV = 0, sorted by V_D.
std::vector<FoldPoint> diode_fold_points();

/// Circuit inputs (u1 voltage source, u2 current source) as a function of the
/// translated state (x1, x2, z).
using CircuitController = std::function<std::array<double, 2>(std::span<const double> y)>;

class TunnelDiode {
 public:
  explicit TunnelDiode(TunnelDiodeParams p);

  const TunnelDiodeParams& params() const { return p_; }

  /// Translated slow-time field for inputs u = (u1, u2).
  std::array<double, 3> rhs(std::span<const double> y, std::span<const double> u) const;

  /// Uncontrolled and controlled circuit field in (V_C, I_L, V_D).  The
  /// sources enter as V_C' = (I_L - u2)/C, I_L' = -(V_C + V_D + u1)/L, the
  /// polarity under which the translated field above is exact.
  std::array<double, 3> circuit_rhs(const CircuitState& c, std::span<const double> u) const;

  static std::array<double, 3> to_translated(const CircuitState& c);
  static CircuitState to_circuit(std::span<const double> y);

  /// Ascending z-coefficients of the translated fast polynomial
  /// -(z^3 + 3 z^2 + x1) at fixed x1.
  static std::array<double, 4> fast_coefficients(double x1);

  /// Slow-time closed loop; an empty controller means open loop.
  OdeSystem closed_loop(CircuitController controller) const;

 private:
  TunnelDiodeParams p_;
};

TunnelDiode build_tunnel_diode(const TunnelDiodeParams& p);

struct Example1Gains {
  double epsilon = 0.01;
  double a1 = 1.0;
  double a2 = 1.0;
  double b = 10.0;
  double A1 = 1.0;
  double A2 = 1.0;
  double B = 10.0;
  bool cancel_highgain_constants = false;
};

/// u: u1 = -4 - eps^{-2/3} a1 x1 + b eps^{-1/3} z,  u2 = 16 + eps^{-2/3} a2 x2.
/// v: eps v1 = -A1 x1 + B z, eps v2 = -A2 x2, acting additively on the
///    translated slow field (x' = f + v) and returned here as circuit inputs
///    (v1, -v2).  With cancel_highgain_constants the constants f(0) = (4, 16)
///    are cancelled as well.
std::pair<CircuitController, CircuitController> example1_controllers(const Example1Gains& g);

/// Planar fold system with f(x, z, eps) = 1 + x + z.
NormalFormSystem build_planar_example(double epsilon);

}  // namespace sfstab::examples
