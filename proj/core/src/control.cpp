#include "sfstab/control.hpp"

#include <cmath>

#include <fmt/format.h>

#include "sfstab/errors.hpp"

namespace sfstab {

namespace {

std::size_t slow_dim(int k) {
  if (k < 2) throw PreconditionError(fmt::format("k must be >= 2 (got {})", k));
  return static_cast<std::size_t>(k - 1);
}

void require_eps(double epsilon) {
  if (!(epsilon > 0.0)) throw PreconditionError("controller requires epsilon > 0");
}

}  // namespace

void check_params(int k, const Theorem2Params& p) {
  const std::size_t n = slow_dim(k);
  require_dim(p.c, n, "Theorem2Params.c");
  require_dim(p.a, n, "Theorem2Params.a");
  for (double a : p.a) {
    if (!(a > 0.0)) throw PreconditionError("Theorem2Params.a must be strictly positive");
  }
  if (!(p.b > 0.0)) throw PreconditionError("Theorem2Params.b must be strictly positive");
}

void check_params(int k, const Theorem3Params& p) {
  const std::size_t n = slow_dim(k);
  require_dim(p.K, n, "Theorem3Params.K");
  require_dim(p.chi_star, n, "Theorem3Params.chi_star");
  bool active = false;
  for (double g : p.K) {
    if (g < 0.0) throw PreconditionError("Theorem3Params.K must be non-negative");
    active = active || g > 0.0;
  }
  if (active) {
    if (!(p.chi_star[0] < -1.0)) throw PreconditionError("Theorem3Params.chi_star[0] must be < -1");
    for (std::size_t j = 1; j < n; ++j) {
      if (p.chi_star[j] != 0.0) {
        throw PreconditionError("Theorem3Params.chi_star[j] must be 0 for j >= 2");
      }
    }
  }
}

void check_params(const HighGainParams& p) {
  if (p.A_hg.empty()) throw PreconditionError("HighGainParams.A_hg is empty");
  for (double a : p.A_hg) {
    if (!(a > 0.0)) throw PreconditionError("HighGainParams.A_hg must be strictly positive");
  }
  if (!(p.B_hg > 0.0)) throw PreconditionError("HighGainParams.B_hg must be strictly positive");
  require_eps(p.epsilon);
  if (!p.cancel.empty()) require_dim(p.cancel, p.A_hg.size(), "HighGainParams.cancel");
}

ControlInput thm2_control(const State& s, double epsilon, int k, const Theorem2Params& p) {
  const std::size_t n = slow_dim(k);
  require_eps(epsilon);
  require_dim(s.x, n, "state x");
  require_dim(p.c, n, "Theorem2Params.c");
  require_dim(p.a, n, "Theorem2Params.a");
  const double gamma = 2.0 * k - 1.0;
  const double z_gain = std::pow(epsilon, -1.0 / gamma);
  const double x_gain = std::pow(epsilon, -static_cast<double>(k) / gamma);
  ControlInput u{Vector(n)};
  for (std::size_t j = 0; j < n; ++j) u.u[j] = -p.c[j] - p.a[j] * x_gain * s.x[j];
  u.u[0] += p.b * z_gain * s.z;
  return u;
}

ControlInput thm3_compensation(const State& s, int k, const Theorem3Params& p) {
  const std::size_t n = slow_dim(k);
  require_dim(s.x, n, "state x");
  require_dim(p.K, n, "Theorem3Params.K");
  require_dim(p.chi_star, n, "Theorem3Params.chi_star");
  ControlInput w{Vector(n)};
  for (std::size_t j = 0; j < n; ++j) {
    const int q = k - static_cast<int>(j) + 1;  // k - i + 2 with i = j + 1
    w.u[j] = p.K[j] * (s.x[j] * s.z + std::pow(-s.z, q) * p.chi_star[j]);
  }
  return w;
}

ControlInput full_control(const State& s, double epsilon, int k, const Theorem2Params& p2,
                          const Theorem3Params& p3) {
  ControlInput u = thm2_control(s, epsilon, k, p2);
  const ControlInput w = thm3_compensation(s, k, p3);
  for (std::size_t j = 0; j < u.u.size(); ++j) u.u[j] += w.u[j];
  return u;
}

Vector chart_controller_family(const FamilyChartState& c, int k, const Theorem2Params& p) {
  const std::size_t n = slow_dim(k);
  require_dim(c.x_bar, n, "family chart x_bar");
  require_dim(p.c, n, "Theorem2Params.c");
  require_dim(p.a, n, "Theorem2Params.a");
  if (k >= 3 && !(c.r_bar > 0.0)) {
    throw PreconditionError("chart controller is singular at r_bar = 0 for k >= 3");
  }
  Vector u(n);
  u[0] = -p.c[0] - p.a[0] * c.x_bar[0] + p.b * c.z_bar;
  for (std::size_t j = 1; j < n; ++j) {
    u[j] = -p.c[j] - std::pow(c.r_bar, -static_cast<double>(j)) * p.a[j] * c.x_bar[j];
  }
  return u;
}

ControlInput highgain_control(const State& s, const HighGainParams& p) {
  require_eps(p.epsilon);
  require_dim(s.x, p.A_hg.size(), "state x");
  ControlInput v{Vector(s.x.size())};
  for (std::size_t j = 0; j < s.x.size(); ++j) v.u[j] = -p.A_hg[j] * s.x[j] / p.epsilon;
  v.u[0] += p.B_hg * s.z / p.epsilon;
  if (!p.cancel.empty()) {
    for (std::size_t j = 0; j < s.x.size(); ++j) v.u[j] -= p.cancel[j];
  }
  return v;
}

FamilyChartDerivative closed_loop_family_rhs(const FamilyChartState& c, const NormalFormSystem& sys,
                                             const Theorem2Params& p2, const Theorem3Params* p3) {
  const int k = sys.k;
  const std::size_t n = sys.slow_dim();
  require_dim(c.x_bar, n, "family chart x_bar");
  const BlownDown p = from_family_chart(c, k);
  const Vector f = sys.eval_slow(p.state.x, p.state.z, p.epsilon);

  Vector w;
  if (p3 != nullptr) w = thm3_compensation(p.state, k, *p3).u;

  FamilyChartDerivative d;
  d.dx_bar.resize(n);
  double rp = 1.0;  // r^{i-1}
  for (std::size_t j = 0; j < n; ++j) {
    double drift = f[j] - p2.c[j];
    if (!w.empty()) drift += w[j];
    d.dx_bar[j] = rp * drift - p2.a[j] * c.x_bar[j];
    rp *= c.r_bar;
  }
  d.dx_bar[0] += p2.b * c.z_bar;
  d.dz_bar = eval_g(c.x_bar, c.z_bar, k);
  return d;
}

DenseMatrix closed_loop_jacobian_origin(int k, const Theorem2Params& p) {
  check_params(k, p);
  const std::size_t n = static_cast<std::size_t>(k);
  DenseMatrix J(n, n);
  for (std::size_t j = 0; j + 1 < n; ++j) J(j, j) = -p.a[j];
#ifdef SFSTAB_INJECT_B_SIGN_FAULT
  J(0, n - 1) = -p.b;
#else
  J(0, n - 1) = p.b;
#endif
  J(n - 1, 0) = -1.0;
  return J;
}

std::vector<std::complex<double>> eigenvalues_origin(int k, const Theorem2Params& p) {
  check_params(k, p);
  using C = std::complex<double>;
  const double a1 = p.a[0];
  const C root = std::sqrt(C(a1 * a1 - 4.0 * p.b, 0.0));
  std::vector<C> ev;
  ev.reserve(static_cast<std::size_t>(k));
  ev.push_back((-a1 + root) / 2.0);
  ev.push_back((-a1 - root) / 2.0);
  for (std::size_t j = 1; j < p.a.size(); ++j) ev.emplace_back(-p.a[j], 0.0);
  return ev;
}

Controller make_thm2_controller(int k, Theorem2Params p) {
  check_params(k, p);
  return [k, p = std::move(p)](const State& s, double eps) { return thm2_control(s, eps, k, p); };
}

Controller make_full_controller(int k, Theorem2Params p2, Theorem3Params p3) {
  check_params(k, p2);
  check_params(k, p3);
  return [k, p2 = std::move(p2), p3 = std::move(p3)](const State& s, double eps) {
    return full_control(s, eps, k, p2, p3);
  };
}

Controller make_highgain_controller(HighGainParams p) {
  check_params(p);
  return [p = std::move(p)](const State& s, double) { return highgain_control(s, p); };
}

}  // namespace sfstab
