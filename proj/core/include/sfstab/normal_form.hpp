#pragma once

// Slow-fast control systems with one fast state in normal form
//
//     x' = f(x, z, eps) + u,      eps z' = g(x, z),
//     g(x, z) = -(z^k + sum_{i=1}^{k-1} x_i z^{i-1}),
//
// with x in R^{k-1}.  The origin is the most degenerate point of the critical
// manifold S = {g = 0}: g and its first k-1 z-derivatives vanish there.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace sfstab {

using Vector = std::vector<double>;

struct State {
  Vector x;
  double z = 0.0;

  bool operator==(const State&) const = default;
};

struct ControlInput {
  Vector u;

  bool operator==(const ControlInput&) const = default;
};

/// Smooth slow dynamics f(x, z, eps) -> R^{k-1}.
using SlowField = std::function<Vector(std::span<const double> x, double z, double epsilon)>;

/// Feedback law u(x, z, eps) in original coordinates.
using Controller = std::function<ControlInput(const State& s, double epsilon)>;

struct NormalFormSystem {
  int k = 2;
  double epsilon = 0.0;
  SlowField slow_f;

  std::size_t slow_dim() const { return k > 1 ? static_cast<std::size_t>(k - 1) : 0; }

  /// Evaluates f and checks the result is finite with k-1 components.
  Vector eval_slow(std::span<const double> x, double z, double eps) const;

  /// f(0, 0, 0), the constant the stabilizing controllers cancel.
  Vector f_at_origin() const;

  NormalFormSystem with_epsilon(double eps) const;
};

struct StateDerivative {
  Vector dx;
  double dz = 0.0;
};

double eval_g(std::span<const double> x, double z, int k);

/// Coefficients of g(x, . ) as a polynomial in z, ascending powers, length k+1.
Vector g_coefficients_in_z(std::span<const double> x, int k);

/// m-th z-derivative of the polynomial with ascending coefficients `coeffs`.
double poly_derivative(std::span<const double> coeffs, double z, int m);

/// Fast-time form: x' = eps (f + u), z' = g.
StateDerivative eval_rhs_fast(const NormalFormSystem& sys, const State& s, const ControlInput& u);

/// Slow-time form: x' = f + u, z' = g / eps.  Requires eps > 0.
StateDerivative eval_rhs_slow(const NormalFormSystem& sys, const State& s, const ControlInput& u);

/// |g| <= 1e-9 (1 + |(x,z)|^k).
bool on_critical_manifold(std::span<const double> x, double z, int k);

/// Smallest m >= 1 with d^m g / dz^m != 0 at a point of S.  Throws
/// PreconditionError off S.
int degeneracy_order(std::span<const double> x, double z, int k);

/// Same classification for an arbitrary polynomial fast field given by its
/// ascending z-coefficients at fixed slow state.  `scale` sets the zero
/// threshold 1e-9 * scale.
int degeneracy_order_of(std::span<const double> coeffs, double z, double scale);

/// Accumulated schema violations; empty means valid.
std::vector<std::string> validate(const NormalFormSystem& sys);

void require_dim(std::span<const double> v, std::size_t n, const char* what);
void require_finite(std::span<const double> v, const char* what);

}  // namespace sfstab
