#include "sfstab/normal_form.hpp"

#include <cmath>

#include <fmt/format.h>

#include "sfstab/errors.hpp"

namespace sfstab {

namespace {

constexpr double kManifoldTol = 1e-9;

double norm_xz(std::span<const double> x, double z) {
  double s = z * z;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

void require_order(int k) {
  if (k < 2) throw PreconditionError(fmt::format("k must be >= 2 (got {})", k));
}

}  // namespace

void require_dim(std::span<const double> v, std::size_t n, const char* what) {
  if (v.size() != n) {
    throw DimensionError(fmt::format("{}: expected {} components, got {}", what, n, v.size()));
  }
}

void require_finite(std::span<const double> v, const char* what) {
  for (double e : v) {
    if (!std::isfinite(e)) throw NumericalError(fmt::format("{}: non-finite value", what));
  }
}

Vector NormalFormSystem::eval_slow(std::span<const double> x, double z, double eps) const {
  if (!slow_f) throw PreconditionError("slow field is not set");
  Vector f = slow_f(x, z, eps);
  require_dim(f, slow_dim(), "slow field output");
  require_finite(f, "slow field output");
  return f;
}

Vector NormalFormSystem::f_at_origin() const {
  const Vector zero(slow_dim(), 0.0);
  return eval_slow(zero, 0.0, 0.0);
}

NormalFormSystem NormalFormSystem::with_epsilon(double eps) const {
  NormalFormSystem out = *this;
  out.epsilon = eps;
  return out;
}

double eval_g(std::span<const double> x, double z, int k) {
  require_order(k);
  require_dim(x, static_cast<std::size_t>(k - 1), "eval_g x");
  double sum = 0.0;
  double zp = 1.0;
  for (double xi : x) {
    sum += xi * zp;
    zp *= z;
  }
  // zp == z^{k-1} here
  sum += zp * z;
  return -sum;
}

Vector g_coefficients_in_z(std::span<const double> x, int k) {
  require_order(k);
  require_dim(x, static_cast<std::size_t>(k - 1), "g coefficients x");
  Vector c(static_cast<std::size_t>(k) + 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) c[i] = -x[i];
  c[static_cast<std::size_t>(k)] = -1.0;
  return c;
}

double poly_derivative(std::span<const double> coeffs, double z, int m) {
  // sum_j c_j j!/(j-m)! z^{j-m}, evaluated by Horner on the shifted coefficients
  double acc = 0.0;
  for (int j = static_cast<int>(coeffs.size()) - 1; j >= m; --j) {
    double falling = 1.0;
    for (int t = 0; t < m; ++t) falling *= static_cast<double>(j - t);
    acc = acc * z + coeffs[static_cast<std::size_t>(j)] * falling;
  }
  return acc;
}

StateDerivative eval_rhs_fast(const NormalFormSystem& sys, const State& s, const ControlInput& u) {
  require_dim(s.x, sys.slow_dim(), "state x");
  require_dim(u.u, sys.slow_dim(), "control u");
  Vector f = sys.eval_slow(s.x, s.z, sys.epsilon);
  StateDerivative d;
  d.dx.resize(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) d.dx[i] = sys.epsilon * (f[i] + u.u[i]);
  d.dz = eval_g(s.x, s.z, sys.k);
  return d;
}

StateDerivative eval_rhs_slow(const NormalFormSystem& sys, const State& s, const ControlInput& u) {
  if (!(sys.epsilon > 0.0)) {
    throw PreconditionError("slow-time form requires epsilon > 0");
  }
  require_dim(s.x, sys.slow_dim(), "state x");
  require_dim(u.u, sys.slow_dim(), "control u");
  Vector f = sys.eval_slow(s.x, s.z, sys.epsilon);
  StateDerivative d;
  d.dx.resize(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) d.dx[i] = f[i] + u.u[i];
  d.dz = eval_g(s.x, s.z, sys.k) / sys.epsilon;
  return d;
}

bool on_critical_manifold(std::span<const double> x, double z, int k) {
  const double g = eval_g(x, z, k);
  return std::abs(g) <= kManifoldTol * (1.0 + std::pow(norm_xz(x, z), k));
}

int degeneracy_order_of(std::span<const double> coeffs, double z, double scale) {
  const int degree = static_cast<int>(coeffs.size()) - 1;
  const double tol = kManifoldTol * scale;
  for (int m = 1; m <= degree; ++m) {
    if (std::abs(poly_derivative(coeffs, z, m)) > tol) return m;
  }
  throw PreconditionError("polynomial is constant in z; degeneracy order undefined");
}

int degeneracy_order(std::span<const double> x, double z, int k) {
  require_order(k);
  require_dim(x, static_cast<std::size_t>(k - 1), "degeneracy_order x");
  if (!on_critical_manifold(x, z, k)) {
    throw PreconditionError(fmt::format("point is not on the critical manifold (g = {})",
                                        eval_g(x, z, k)));
  }
  const Vector c = g_coefficients_in_z(x, k);
  return degeneracy_order_of(c, z, 1.0 + std::pow(norm_xz(x, z), k));
}

std::vector<std::string> validate(const NormalFormSystem& sys) {
  std::vector<std::string> errors;
  if (sys.k < 2) errors.push_back(fmt::format("k must be >= 2 (got {})", sys.k));
  if (!(sys.epsilon > 0.0) || !std::isfinite(sys.epsilon)) {
    errors.push_back(fmt::format("epsilon must be > 0 (got {})", sys.epsilon));
  }
  if (!sys.slow_f) {
    errors.emplace_back("slow field is not set");
  } else if (sys.k >= 2) {
    const Vector zero(sys.slow_dim(), 0.0);
    Vector f = sys.slow_f(zero, 0.0, sys.epsilon > 0.0 ? sys.epsilon : 0.0);
    if (f.size() != sys.slow_dim()) {
      errors.push_back(fmt::format("dimension error: slow field returns {} components, expected {}",
                                   f.size(), sys.slow_dim()));
    }
  }
  return errors;
}

}  // namespace sfstab
