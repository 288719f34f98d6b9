#include "sfstab/blowup.hpp"

#include <cmath>

#include <fmt/format.h>

#include "sfstab/errors.hpp"

namespace sfstab {

namespace {

void require_order(int k) {
  if (k < 2) throw PreconditionError(fmt::format("k must be >= 2 (got {})", k));
}

std::size_t slow_dim(int k) { return static_cast<std::size_t>(k - 1); }

// r^{k-i+1} for 0-based index j = i-1
double x_weight_power(double r, int k, std::size_t j) {
  return std::pow(r, k - static_cast<int>(j));
}

}  // namespace

Weights weights_for(int k) {
  require_order(k);
  Weights w;
  w.k = k;
  w.alpha.reserve(slow_dim(k));
  for (int i = 1; i <= k - 1; ++i) w.alpha.push_back(k - i + 1);
  w.z_weight = 1;
  w.gamma = 2 * k - 1;
  return w;
}

FamilyChartState to_family_chart(const State& s, double epsilon, int k) {
  require_order(k);
  require_dim(s.x, slow_dim(k), "family chart x");
  if (!(epsilon > 0.0)) throw PreconditionError("family chart requires epsilon > 0");
  FamilyChartState c;
  c.r_bar = std::pow(epsilon, 1.0 / (2.0 * k - 1.0));
  c.x_bar.resize(s.x.size());
  for (std::size_t j = 0; j < s.x.size(); ++j) c.x_bar[j] = s.x[j] / x_weight_power(c.r_bar, k, j);
  c.z_bar = s.z / c.r_bar;
  return c;
}

BlownDown from_family_chart(const FamilyChartState& c, int k) {
  require_order(k);
  require_dim(c.x_bar, slow_dim(k), "family chart x_bar");
  BlownDown out;
  out.state.x.resize(c.x_bar.size());
  for (std::size_t j = 0; j < c.x_bar.size(); ++j) {
    out.state.x[j] = x_weight_power(c.r_bar, k, j) * c.x_bar[j];
  }
  out.state.z = c.r_bar * c.z_bar;
  out.epsilon = std::pow(c.r_bar, 2 * k - 1);
  return out;
}

DirectionalChartState to_directional_zneg(const State& s, double epsilon, int k) {
  require_order(k);
  require_dim(s.x, slow_dim(k), "directional chart x");
  if (!(s.z < 0.0)) throw PreconditionError("directional chart K_{-z} requires z < 0");
  if (epsilon < 0.0) throw PreconditionError("directional chart requires epsilon >= 0");
  DirectionalChartState c;
  c.rho = -s.z;
  c.chi.resize(s.x.size());
  for (std::size_t j = 0; j < s.x.size(); ++j) c.chi[j] = s.x[j] / x_weight_power(c.rho, k, j);
  c.mu = epsilon / std::pow(c.rho, 2 * k - 1);
  return c;
}

BlownDown from_directional_zneg(const DirectionalChartState& c, int k) {
  require_order(k);
  require_dim(c.chi, slow_dim(k), "directional chart chi");
  if (!(c.rho > 0.0)) throw PreconditionError("directional chart requires rho > 0");
  BlownDown out;
  out.state.x.resize(c.chi.size());
  for (std::size_t j = 0; j < c.chi.size(); ++j) {
    out.state.x[j] = x_weight_power(c.rho, k, j) * c.chi[j];
  }
  out.state.z = -c.rho;
  out.epsilon = std::pow(c.rho, 2 * k - 1) * c.mu;
  return out;
}

FamilyChartDerivative desing_rhs_family(const FamilyChartState& c, const NormalFormSystem& sys,
                                        const ChartController& chart_controller) {
  const int k = sys.k;
  require_dim(c.x_bar, sys.slow_dim(), "family chart x_bar");
  const BlownDown p = from_family_chart(c, k);
  const Vector f = sys.eval_slow(p.state.x, p.state.z, p.epsilon);
  const Vector u = chart_controller(c);
  require_dim(u, sys.slow_dim(), "chart control");
  require_finite(u, "chart control");

  FamilyChartDerivative d;
  d.dr_bar = 0.0;
  d.dx_bar.resize(f.size());
  double rp = 1.0;  // r^{i-1}
  for (std::size_t j = 0; j < f.size(); ++j) {
    d.dx_bar[j] = rp * (f[j] + u[j]);
    rp *= c.r_bar;
  }
  d.dz_bar = eval_g(c.x_bar, c.z_bar, k);
  return d;
}

double directional_F(std::span<const double> chi, int k) {
  require_order(k);
  require_dim(chi, slow_dim(k), "directional F chi");
  double F = (k % 2 == 0) ? 1.0 : -1.0;
  double sign = -1.0;  // (-1)^i for i = 1
  for (double c : chi) {
    F -= sign * c;
    sign = -sign;
  }
  return F;
}

DirectionalChartDerivative desing_rhs_directional(const DirectionalChartState& c,
                                                  const NormalFormSystem& sys,
                                                  const Controller& controller) {
  const int k = sys.k;
  require_dim(c.chi, sys.slow_dim(), "directional chart chi");
  if (!(c.rho > 0.0)) throw PreconditionError("directional chart requires rho > 0");

  const double F = directional_F(c.chi, k);
  DirectionalChartDerivative d;
  d.drho = c.rho * F;
  d.dmu = -(2.0 * k - 1.0) * c.mu * F;
  d.dchi.assign(c.chi.size(), 0.0);

  if (c.mu != 0.0) {
    const BlownDown p = from_directional_zneg(c, k);
    const Vector f = sys.eval_slow(p.state.x, p.state.z, p.epsilon);
    const ControlInput u = controller ? controller(p.state, p.epsilon)
                                      : ControlInput{Vector(f.size(), 0.0)};
    require_dim(u.u, sys.slow_dim(), "controller output");
    require_finite(u.u, "controller output");
    double rp = 1.0;  // rho^{i-1}
    for (std::size_t j = 0; j < f.size(); ++j) {
      d.dchi[j] = rp * c.mu * (f[j] + u.u[j]);
      rp *= c.rho;
    }
  }
  for (std::size_t j = 0; j < c.chi.size(); ++j) {
    const double weight = static_cast<double>(k - static_cast<int>(j));
    d.dchi[j] -= weight * F * c.chi[j];
  }
  return d;
}

double family_time_rescale(double epsilon, int k) {
  require_order(k);
  if (!(epsilon > 0.0)) throw PreconditionError("time rescale requires epsilon > 0");
  return std::pow(epsilon, static_cast<double>(k) / (2.0 * k - 1.0));
}

}  // namespace sfstab
