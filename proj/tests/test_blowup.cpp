#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "sfstab/blowup.hpp"
#include "sfstab/control.hpp"
#include "sfstab/errors.hpp"
#include "sfstab/examples.hpp"

using namespace sfstab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

NormalFormSystem zero_system(int k) {
  return {k, 0.0, [](std::span<const double> x, double, double) { return Vector(x.size(), 0.0); }};
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_CASE("weights") {
  const Weights w2 = weights_for(2);
  CHECK(w2.alpha == std::vector<int>{2});
  CHECK(w2.z_weight == 1);
  CHECK(w2.gamma == 3);
  CHECK(weights_for(3).alpha == std::vector<int>{3, 2});
  CHECK(weights_for(3).gamma == 5);
  CHECK(weights_for(5).alpha == std::vector<int>{5, 4, 3, 2});
  CHECK(weights_for(5).gamma == 9);
  CHECK_THROWS_AS(weights_for(1), PreconditionError);
}

TEST_CASE("family chart examples") {
  const FamilyChartState c = to_family_chart({{0.02}, 0.05}, 0.001, 2);
  CHECK_THAT(c.r_bar, WithinRel(0.1, 1e-14));
  CHECK_THAT(c.x_bar[0], WithinRel(2.0, 1e-13));
  CHECK_THAT(c.z_bar, WithinRel(0.5, 1e-14));
  const BlownDown b = from_family_chart(c, 2);
  CHECK_THAT(b.state.x[0], WithinRel(0.02, 1e-14));
  CHECK_THAT(b.state.z, WithinRel(0.05, 1e-14));
  CHECK_THAT(b.epsilon, WithinRel(0.001, 1e-14));

  const FamilyChartState id = to_family_chart({{3.0}, -1.0}, 1.0, 2);
  CHECK(id.r_bar == 1.0);
  CHECK(id.x_bar[0] == 3.0);
  CHECK(id.z_bar == -1.0);

  const double eps = std::pow(0.25, 5);
  const FamilyChartState c3 = to_family_chart({{1e-3, 2e-3}, 0.1}, eps, 3);
  CHECK_THAT(c3.r_bar, WithinRel(0.25, 1e-15));
  CHECK_THAT(c3.x_bar[0], WithinRel(1e-3 * 64.0, 1e-14));
  CHECK_THAT(c3.x_bar[1], WithinRel(2e-3 * 16.0, 1e-14));

  const BlownDown s = from_family_chart({0.0, {5.0}, -7.0}, 2);
  CHECK(s.state.x[0] == 0.0);
  CHECK(s.state.z == 0.0);
  CHECK(s.epsilon == 0.0);
  const BlownDown h = from_family_chart({0.5, {4.0}, -2.0}, 2);
  CHECK(h.state.x[0] == 1.0);
  CHECK(h.state.z == -1.0);
  CHECK(h.epsilon == 0.125);

  CHECK_THROWS_AS(to_family_chart({{1.0}, 1.0}, 0.0, 2), PreconditionError);
}

TEST_CASE("directional chart examples") {
  const DirectionalChartState a = to_directional_zneg({{0.25}, -0.5}, 1e-3, 2);
  CHECK(a.rho == 0.5);
  CHECK(a.chi[0] == 1.0);
  CHECK_THAT(a.mu, WithinRel(8e-3, 1e-15));
  const DirectionalChartState b = to_directional_zneg({{0.0}, -1.0}, 0.0, 2);
  CHECK(b.rho == 1.0);
  CHECK(b.chi[0] == 0.0);
  CHECK(b.mu == 0.0);
  const DirectionalChartState c = to_directional_zneg({{-8.0, 4.0}, -2.0}, 32.0, 3);
  CHECK(c.rho == 2.0);
  CHECK(c.chi == Vector{-1.0, 1.0});
  CHECK(c.mu == 1.0);

  const BlownDown bc = from_directional_zneg(c, 3);
  CHECK(bc.state == State{{-8.0, 4.0}, -2.0});
  CHECK(bc.epsilon == 32.0);
  const BlownDown ba = from_directional_zneg(a, 2);
  CHECK_THAT(ba.state.x[0], WithinRel(0.25, 1e-15));
  CHECK_THAT(ba.epsilon, WithinRel(1e-3, 1e-15));

  CHECK_THROWS_AS(to_directional_zneg({{0.0}, 0.0}, 0.1, 2), PreconditionError);
  CHECK_THROWS_AS(from_directional_zneg({0.0, {0.0}, 0.0}, 2), PreconditionError);
}

TEST_CASE("chart round trips") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> U(-5.0, 5.0), Z(-5.0, -1e-2), E(1e-4, 1.0);
  for (int s = 0; s < 1000; ++s) {
    const int k = 2 + s % 5;
    State st{Vector(static_cast<std::size_t>(k - 1)), Z(rng)};
    for (double& e : st.x) e = U(rng);
    const double eps = E(rng);
    const BlownDown f = from_family_chart(to_family_chart(st, eps, k), k);
    const BlownDown d = from_directional_zneg(to_directional_zneg(st, eps, k), k);
    CHECK(rel(f.epsilon, eps) <= 1e-12);
    CHECK(rel(d.epsilon, eps) <= 1e-12);
    CHECK(rel(f.state.z, st.z) <= 1e-12);
    CHECK(rel(d.state.z, st.z) <= 1e-12);
    for (std::size_t j = 0; j < st.x.size(); ++j) {
      CHECK(rel(f.state.x[j], st.x[j]) <= 1e-12);
      CHECK(rel(d.state.x[j], st.x[j]) <= 1e-12);
    }
  }
}

TEST_CASE("family desingularized field examples") {
  const NormalFormSystem planar = examples::build_planar_example(0.01);
  const Theorem2Params p{{1.0}, {1.0}, 3.0};
  const FamilyChartDerivative d = closed_loop_family_rhs({0.0, {0.1}, 0.2}, planar, p);
  CHECK(d.dr_bar == 0.0);
  CHECK_THAT(d.dx_bar[0], WithinAbs(0.5, 1e-15));
  CHECK_THAT(d.dz_bar, WithinAbs(-0.14, 1e-15));
  const FamilyChartDerivative o = closed_loop_family_rhs({0.0, {0.0}, 0.0}, planar, p);
  CHECK(o.dx_bar[0] == 0.0);
  CHECK(o.dz_bar == 0.0);

  const FamilyChartDerivative open = desing_rhs_family({0.3, {1.0}, 1.0}, zero_system(2),
                                                       [](const FamilyChartState&) { return Vector{0.0}; });
  CHECK(open.dx_bar[0] == 0.0);
  CHECK(open.dz_bar == -2.0);
}

TEST_CASE("family field through chart controller equals closed loop field for r > 0") {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> U(-1.0, 1.0), R(0.05, 1.0);
  for (int s = 0; s < 200; ++s) {
    const int k = 2 + s % 5;
    const std::size_t n = static_cast<std::size_t>(k - 1);
    const NormalFormSystem sys{k, 0.0, [](std::span<const double> x, double z, double) {
                                 Vector f(x.size());
                                 for (std::size_t i = 0; i < x.size(); ++i) f[i] = 0.3 + x[i] * z;
                                 return f;
                               }};
    Theorem2Params p{Vector(n, 0.3), Vector(n, 1.5), 2.0};
    FamilyChartState c{R(rng), Vector(n), U(rng)};
    for (double& e : c.x_bar) e = U(rng);
    const FamilyChartDerivative a =
        desing_rhs_family(c, sys, [&](const FamilyChartState& q) { return chart_controller_family(q, k, p); });
    const FamilyChartDerivative b = closed_loop_family_rhs(c, sys, p);
    for (std::size_t j = 0; j < n; ++j) CHECK_THAT(a.dx_bar[j], WithinAbs(b.dx_bar[j], 1e-11));
    CHECK(a.dz_bar == b.dz_bar);
  }
}

TEST_CASE("closed-loop family field is continuous at r = 0") {
  const NormalFormSystem sys{4, 0.0, [](std::span<const double> x, double z, double) {
                               return Vector{1.0 + x[0] + z, 2.0 - x[1], 0.5 + z * z};
                             }};
  const Theorem2Params p{{1.0, 2.0, 0.5}, {1.0, 2.0, 3.0}, 4.0};
  FamilyChartState c{0.0, {0.3, -0.2, 0.1}, 0.4};
  const FamilyChartDerivative d0 = closed_loop_family_rhs(c, sys, p);
  double prev = INFINITY;
  for (int j = 1; j <= 12; ++j) {
    c.r_bar = std::pow(10.0, -j);
    const FamilyChartDerivative d = closed_loop_family_rhs(c, sys, p);
    double e = std::abs(d.dz_bar - d0.dz_bar);
    for (std::size_t i = 0; i < 3; ++i) e = std::max(e, std::abs(d.dx_bar[i] - d0.dx_bar[i]));
    REQUIRE(std::isfinite(e));
    CHECK(e <= prev + 1e-15);
    prev = e;
  }
  CHECK(prev < 1e-10);
}

TEST_CASE("directional F and field examples") {
  CHECK(directional_F(Vector{0.0}, 2) == 1.0);
  CHECK(directional_F(Vector{1.0}, 2) == 2.0);
  CHECK(directional_F(Vector{0.0, 0.0}, 3) == -1.0);
  // k = 4: F = 1 + chi1 - chi2 + chi3
  CHECK(directional_F(Vector{1.0, 2.0, 3.0}, 4) == 3.0);

  const NormalFormSystem z2 = zero_system(2);
  const DirectionalChartDerivative a = desing_rhs_directional({0.7, {0.0}, 0.2}, z2, {});
  CHECK(a.drho == 0.7);
  CHECK(a.dchi[0] == 0.0);
  CHECK_THAT(a.dmu, WithinRel(-0.6, 1e-15));
  const DirectionalChartDerivative b = desing_rhs_directional({0.7, {1.0}, 0.2}, z2, {});
  CHECK_THAT(b.drho, WithinRel(1.4, 1e-15));
  CHECK(b.dchi[0] == -4.0);
  CHECK_THAT(b.dmu, WithinRel(-1.2, 1e-15));
}

TEST_CASE("compensation contribution in the directional chart") {
  // k = 2, only the compensation acts:  chi' picks up mu * w with w = K rho^3 (chi* - chi)
  const NormalFormSystem z2 = zero_system(2);
  const Theorem3Params p3{{10.0}, {-2.0}};
  const Controller w = [&](const State& s, double) { return thm3_compensation(s, 2, p3); };
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> R(0.1, 2.0), C(-2.0, 2.0), M(0.0, 1.0);
  for (int s = 0; s < 200; ++s) {
    const DirectionalChartState c{R(rng), {C(rng)}, M(rng)};
    const double base = desing_rhs_directional(c, z2, {}).dchi[0];
    const double with = desing_rhs_directional(c, z2, w).dchi[0];
    const double expected = 10.0 * c.mu * std::pow(c.rho, 3) * (-2.0 - c.chi[0]);
    CHECK_THAT(with - base, WithinAbs(expected, 1e-11 * (1.0 + std::abs(expected))));
  }
}

TEST_CASE("time rescale") {
  CHECK_THAT(family_time_rescale(0.001, 2), WithinRel(0.01, 1e-14));
  CHECK(family_time_rescale(1.0, 5) == 1.0);
  CHECK_THAT(family_time_rescale(0.01, 2), WithinRel(0.0464158883361278, 1e-12));
  CHECK_THROWS_AS(family_time_rescale(0.0, 2), PreconditionError);
}
