#pragma once

// Quasihomogeneous blow-up of the origin of a normal-form system.
//
// Weights: x_i ~ r^{k-i+1}, z ~ r, eps ~ r^{2k-1}.  Two charts are provided:
//
//   family chart      (x, z, eps) = (r^k xb_1, ..., r^2 xb_{k-1}, r zb, r^{2k-1})
//   directional z < 0 (x, z, eps) = (rho^k chi_1, ..., rho^2 chi_{k-1}, -rho, rho^{2k-1} mu)
//
// The desingularized fields are the blown-up fields divided by r^{k-1}
// (resp. rho^{k-1}); both are regular on the exceptional set.

#include <functional>
#include <span>
#include <vector>

#include "sfstab/normal_form.hpp"

namespace sfstab {

struct Weights {
  int k = 2;
  std::vector<int> alpha;  // alpha_i = k - i + 1
  int z_weight = 1;
  int gamma = 3;           // 2k - 1
};

Weights weights_for(int k);

struct FamilyChartState {
  double r_bar = 0.0;
  Vector x_bar;
  double z_bar = 0.0;
};

struct DirectionalChartState {
  double rho = 1.0;
  Vector chi;
  double mu = 0.0;
};

struct BlownDown {
  State state;
  double epsilon = 0.0;
};

FamilyChartState to_family_chart(const State& s, double epsilon, int k);
BlownDown from_family_chart(const FamilyChartState& c, int k);

DirectionalChartState to_directional_zneg(const State& s, double epsilon, int k);
BlownDown from_directional_zneg(const DirectionalChartState& c, int k);

/// Control expressed in family-chart coordinates, ub(r, xb, zb).
using ChartController = std::function<Vector(const FamilyChartState&)>;

struct FamilyChartDerivative {
  double dr_bar = 0.0;
  Vector dx_bar;
  double dz_bar = 0.0;
};

struct DirectionalChartDerivative {
  double drho = 0.0;
  Vector dchi;
  double dmu = 0.0;
};

/// xb_i' = r^{i-1} (fb_i + ub_i), zb' = -(zb^k + sum xb_i zb^{i-1}), r' = 0.
FamilyChartDerivative desing_rhs_family(const FamilyChartState& c, const NormalFormSystem& sys,
                                        const ChartController& chart_controller);

/// F(chi) = (-1)^k - sum_{i=1}^{k-1} (-1)^i chi_i, so that rho' = rho F in the
/// desingularized time.
double directional_F(std::span<const double> chi, int k);

/// rho' = rho F, mu' = -(2k-1) mu F,
/// chi_i' = rho^{i-1} mu (f_i + u_i) - (k-i+1) F chi_i,
/// with f and u evaluated at the blown-down point.  For mu = 0 the drift term
/// vanishes and the controller is not evaluated.
DirectionalChartDerivative desing_rhs_directional(const DirectionalChartState& c,
                                                  const NormalFormSystem& sys,
                                                  const Controller& controller);

/// dt/ds = eps^{k/(2k-1)} between slow time t and family-chart time s.
double family_time_rescale(double epsilon, int k);

}  // namespace sfstab
