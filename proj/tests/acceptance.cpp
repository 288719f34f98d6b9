// Acceptance run: one PASS/FAIL line per criterion.
#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "sfstab/blowup.hpp"
#include "sfstab/control.hpp"
#include "sfstab/examples.hpp"
#include "sfstab/normal_form.hpp"
#include "sfstab/parallel.hpp"
#include "sfstab/roa.hpp"
#include "sfstab/scenario.hpp"
#include "sfstab/sim.hpp"

using namespace sfstab;

namespace {

struct Verdict {
  bool passed = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Verdict()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs >= budget_s) {
    v.passed = false;
    v.detail += " runtime over budget";
  }
  if (!v.passed) ++failures;
  std::printf("[%s] %d %s: %s (%.2f s, budget %.0f s)\n", v.passed ? "PASS" : "FAIL", id, name, v.detail.c_str(),
              secs, budget_s);
  std::fflush(stdout);
}

std::string fmt_e(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

using Rng = std::mt19937_64;

double U(Rng& r, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(r); }

// ---------------------------------------------------------------------------

Verdict fold_points() {
  // roots of 3V^2 - 18V + 24 = 3(V - 2)(V - 4); I(V) = V^3 - 9V^2 + 24V
  const auto f = examples::diode_fold_points();
  if (f.size() != 2) return {false, "expected two fold points"};
  const double e = std::max({std::abs(f[0].V_D - 2.0), std::abs(f[0].I_D - 20.0), std::abs(f[1].V_D - 4.0),
                             std::abs(f[1].I_D - 16.0)});
  return {e <= 1e-9, "max abs err " + fmt_e(e) + " (tol 1e-9)"};
}

Verdict eigen_certificate() {
  Rng rng(2024);
  double worst = 0.0;
  int unstable = 0;
  for (int s = 0; s < 200; ++s) {
    const int k = std::uniform_int_distribution<int>(2, 6)(rng);
    Theorem2Params p{Vector(static_cast<std::size_t>(k - 1), 0.0), Vector(static_cast<std::size_t>(k - 1)),
                     U(rng, 1e-9, 10.0)};
    for (double& a : p.a) a = U(rng, 1e-9, 10.0);
    const DenseMatrix J = closed_loop_jacobian_origin(k, p);
    Eigen::MatrixXd M(k, k);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) M(i, j) = J(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
    const Eigen::VectorXcd num = Eigen::EigenSolver<Eigen::MatrixXd>(M, false).eigenvalues();
    auto closed = eigenvalues_origin(k, p);
    if (closed.size() != static_cast<std::size_t>(k)) return {false, "wrong eigenvalue count"};
    for (const auto& l : closed) unstable += l.real() < 0.0 ? 0 : 1;
    for (Eigen::Index i = 0; i < num.size(); ++i) {
      auto it = std::min_element(closed.begin(), closed.end(),
                                 [&](auto a, auto b) { return std::abs(a - num[i]) < std::abs(b - num[i]); });
      worst = std::max(worst, std::abs(*it - num[i]));
      closed.erase(it);
    }
  }
  return {worst <= 1e-9 && unstable == 0,
          "200 draws, max |closed - numeric| " + fmt_e(worst) + " (tol 1e-9), Re>=0 count " + std::to_string(unstable)};
}

Verdict blowup_algebra() {
  Rng rng(77);
  double qh = 0.0, rt = 0.0, bd = 0.0;
  for (int s = 0; s < 1000; ++s) {
    const int k = std::uniform_int_distribution<int>(2, 6)(rng);
    const std::size_t n = static_cast<std::size_t>(k - 1);
    // quasihomogeneity against a direct power sum
    Vector x(n), xs(n);
    const double z = U(rng, -2, 2), lam = U(rng, 0.1, 10.0);
    double mag = std::pow(std::abs(z), k);
    for (std::size_t j = 0; j < n; ++j) {
      x[j] = U(rng, -2, 2);
      xs[j] = std::pow(lam, k - static_cast<int>(j)) * x[j];
      mag += std::abs(x[j]) * std::pow(std::abs(z), static_cast<double>(j));
    }
    qh = std::max(qh, std::abs(eval_g(xs, lam * z, k) - std::pow(lam, k) * eval_g(x, z, k)) / (std::pow(lam, k) * mag));

    // chart round trips
    const State st{x, U(rng, -3, -1e-2)};
    const double eps = U(rng, 1e-4, 1.0);
    for (const BlownDown& b : {from_family_chart(to_family_chart(st, eps, k), k),
                               from_directional_zneg(to_directional_zneg(st, eps, k), k)}) {
      rt = std::max(rt, std::abs(b.epsilon - eps) / eps);
      rt = std::max(rt, std::abs(b.state.z - st.z) / std::abs(st.z));
      for (std::size_t j = 0; j < n; ++j) rt = std::max(rt, std::abs(b.state.x[j] - st.x[j]) / std::abs(st.x[j]));
    }

    // blow-down identity against the original-coordinate formula
    Theorem2Params p{Vector(n), Vector(n), U(rng, 0.1, 10)};
    for (std::size_t j = 0; j < n; ++j) {
      p.c[j] = U(rng, -3, 3);
      p.a[j] = U(rng, 0.1, 10);
    }
    const double e2 = U(rng, 1e-6, 1.0);
    const Vector uc = chart_controller_family(to_family_chart(st, e2, k), k, p);
    const double g1 = std::pow(e2, -1.0 / (2 * k - 1)), gk = std::pow(e2, -static_cast<double>(k) / (2 * k - 1));
    for (std::size_t j = 0; j < n; ++j) {
      double u = -p.c[j] - gk * p.a[j] * st.x[j];
      double scale = std::abs(p.c[j]) + gk * std::abs(p.a[j] * st.x[j]);
      if (j == 0) {
        u += p.b * g1 * st.z;
        scale += p.b * g1 * std::abs(st.z);
      }
      bd = std::max(bd, std::abs(uc[j] - u) / scale);
    }
  }
  return {qh <= 1e-11 && rt <= 1e-12 && bd <= 1e-11, "quasihomogeneity " + fmt_e(qh) + " (1e-11), round trip " +
                                                         fmt_e(rt) + " (1e-12), blow-down " + fmt_e(bd) + " (1e-11)"};
}

Verdict conjugacy() {
  const int k = 2;
  const double eps = 0.01;
  const NormalFormSystem sys = examples::build_planar_example(eps);
  const Theorem2Params p{{1.0}, {1.0}, 3.0};
  const double tau = std::pow(eps, 2.0 / 3.0);
  const double r = std::cbrt(eps);

  IntegratorConfig dcfg = IntegratorConfig::for_epsilon(eps, 1.0);
  dcfg.rtol = dcfg.atol = 1e-10;
  IntegratorConfig ccfg = dcfg;
  ccfg.t_final = 1.0 / tau;
  ccfg.max_step = 1e-2;
  ccfg.record_stride = dcfg.record_stride / tau;

  const OdeSystem direct = closed_loop_slow(sys, make_thm2_controller(k, p));
  OdeSystem chart{2, [&](double, std::span<const double> y, std::span<double> dy) {
                    const FamilyChartDerivative d = closed_loop_family_rhs({r, {y[0]}, y[1]}, sys, p);
                    dy[0] = d.dx_bar[0];
                    dy[1] = d.dz_bar;
                  },
                  0, {}};

  Rng rng(4);
  int resampled = 0;
  for (int attempt = 0; attempt < 50; ++attempt) {
    const double rad = std::sqrt(U(rng, 0, 1)), ang = U(rng, 0, 2 * M_PI);
    const Vector ic{rad * std::cos(ang), rad * std::sin(ang)};
    const Trajectory a = integrate(direct, ic, dcfg);
    if (a.outcome.is_diverged()) {
      ++resampled;
      continue;
    }
    const Trajectory b = integrate(chart, Vector{ic[0] / (r * r), ic[1] / r}, ccfg);
    if (b.outcome.is_diverged() || b.size() != a.size()) return {false, "chart trajectory failed"};
    double peak = 0.0, worst = 0.0;
    for (const auto& y : a.states) peak = std::max(peak, std::hypot(y[0], y[1]));
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double dx = r * r * b.states[i][0] - a.states[i][0];
      const double dz = r * b.states[i][1] - a.states[i][1];
      worst = std::max({worst, std::hypot(dx, dz) / peak, std::abs(tau * b.times[i] - a.times[i])});
    }
    char ics[64];
    std::snprintf(ics, sizeof ics, "ic=(%.4f,%.4f)", ic[0], ic[1]);
    return {worst <= 1e-5, std::string(ics) + ", " + std::to_string(resampled) + " escaping ICs resampled, " +
                               std::to_string(a.size()) + " samples, max rel err " + fmt_e(worst) + " (tol 1e-5)"};
  }
  return {false, "no non-escaping IC found"};
}

Verdict example1() {
  const Ex1Options opts;  // literal benchmark, no constant cancellation
  const Ex1Report rep = run_example1(opts, default_jobs());
  Ex1Options alt = opts;
  alt.gains.cancel_highgain_constants = true;
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "u final %.2e (tol 1e-2), v final %.4g (tol 5e-2), gain ratio %.4f (bound 0.15); "
                "with v cancelling f(0): final %.2e, ratio %.4f",
                rep.u_final, rep.v_final, rep.ratio, rep.v_alt_final, rep.ratio_alt);
  return {rep.ok(), buf};
}

Ex2Report matrix_report;

Verdict example2() {
  Ex2Options o;
  o.run_roa = false;
  matrix_report = run_example2(o, default_jobs());
  std::string d;
  for (const auto& c : matrix_report.checks) d += std::string(c.passed ? "ok" : "FAILED") + ": " + c.name + "; ";
  if (matrix_report.K_star) d += "K*=" + std::to_string(static_cast<int>(*matrix_report.K_star));
  return {matrix_report.ok(), d};
}

Verdict roa() {
  if (!matrix_report.K_star) return {false, "no K* from the gain sweep"};
  const double eps = 0.01;
  const NormalFormSystem sys = examples::build_planar_example(eps);
  const GridSpec grid{{{-3.0, 3.0, 41}}, {-3.0, 3.0, 41}};
  const IntegratorConfig cfg = IntegratorConfig::for_epsilon(eps, 10.0);
  ControllerSpec k0;
  k0.kind = ControllerSpec::Kind::Thm2Plus3;
  k0.thm2 = {{1.0}, {1.0}, 3.0};
  k0.thm3 = {{0.0}, {-2.0}};
  ControllerSpec ks = k0;
  ks.thm3.K = {*matrix_report.K_star};
  const RoAReport a = sweep(sys, ks, grid, cfg, {}, default_jobs());
  const RoAReport b = sweep(sys, k0, grid, cfg, {}, default_jobs());
  const RoAComparison c = compare(a, b);
  return {c.converged_a > c.converged_b, "converged(K*)=" + std::to_string(c.converged_a) +
                                             " converged(K=0)=" + std::to_string(c.converged_b) + " of 1681"};
}

Verdict tangency() {
  Rng rng(8);
  // F oracle instances
  double fe = std::abs(directional_F(Vector{0.0}, 2) - 1.0) + std::abs(directional_F(Vector{1.0}, 2) - 2.0) +
              std::abs(directional_F(Vector{0.5, -1.0, 2.0}, 4) - (1.0 + 0.5 + 1.0 + 2.0)) +
              std::abs(directional_F(Vector{0.5, -1.0, 2.0, 0.25, -3.0}, 6) - (1.0 + 0.5 + 1.0 + 2.0 - 0.25 - 3.0));
  double worst = 0.0;
  for (int s = 0; s < 500; ++s) {
    const int k = 2 * std::uniform_int_distribution<int>(1, 3)(rng);
    const std::size_t n = static_cast<std::size_t>(k - 1);
    const NormalFormSystem sys{k, 0.0, [](std::span<const double> x, double z, double) {
                                 Vector f(x.size());
                                 for (std::size_t i = 0; i < x.size(); ++i) f[i] = 1.0 + x[i] - z * z;
                                 return f;
                               }};
    Theorem3Params p3{Vector(n, 0.0), Vector(n, 0.0)};
    p3.K[0] = U(rng, 0, 10);
    p3.chi_star[0] = U(rng, -3, -1.05);
    Theorem2Params p2{Vector(n, 1.0), Vector(n), U(rng, 0.5, 5)};
    for (double& a : p2.a) a = U(rng, 0.5, 5);
    const Controller law = make_full_controller(k, p2, p3);
    DirectionalChartState c{U(rng, 0.2, 2.0), Vector(n), U(rng, 0.01, 1.0)};
    for (double& e : c.chi) e = U(rng, -2, 2);
    const DirectionalChartDerivative d = desing_rhs_directional(c, sys, law);

    // blow-down map written out: x_i = rho^{k-i+1} chi_i, z = -rho, eps = rho^{2k-1} mu
    const std::size_t m = n + 2;
    auto blow = [&](const Vector& y) {
      Vector out(m);
      for (std::size_t j = 0; j < n; ++j) out[j] = std::pow(y[0], k - static_cast<int>(j)) * y[1 + j];
      out[n] = -y[0];
      out[n + 1] = std::pow(y[0], 2 * k - 1) * y[m - 1];
      return out;
    };
    Vector y0{c.rho};
    y0.insert(y0.end(), c.chi.begin(), c.chi.end());
    y0.push_back(c.mu);
    Vector dy{d.drho};
    dy.insert(dy.end(), d.dchi.begin(), d.dchi.end());
    dy.push_back(d.dmu);
    Vector push(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(y0[j]));
      Vector yp = y0, ym = y0;
      yp[j] += h;
      ym[j] -= h;
      const Vector bp = blow(yp), bm = blow(ym);
      for (std::size_t i = 0; i < m; ++i) push[i] += (bp[i] - bm[i]) / (2 * h) * dy[j];
    }
    // fast field oracle at the blown-down point
    const Vector b = blow(y0);
    const State st{Vector(b.begin(), b.begin() + static_cast<long>(n)), b[n]};
    const double eps = b[n + 1];
    const Vector u = law(st, eps).u;
    Vector target(m, 0.0);
    for (std::size_t j = 0; j < n; ++j) target[j] = eps * (1.0 + st.x[j] - st.z * st.z + u[j]);
    double g = std::pow(st.z, k);
    for (std::size_t j = 0; j < n; ++j) g += st.x[j] * std::pow(st.z, static_cast<double>(j));
    target[n] = -g;
    double num = 0.0, den = 0.0;
    const double factor = std::pow(c.rho, k - 1);
    for (std::size_t i = 0; i < m; ++i) {
      num = std::max(num, std::abs(factor * push[i] - target[i]));
      den = std::max(den, std::abs(target[i]));
    }
    worst = std::max(worst, num / den);
  }
  return {worst <= 1e-8 && fe == 0.0,
          "500 chart points, k in {2,4,6}, max rel err " + fmt_e(worst) + " (tol 1e-8), F instances err " + fmt_e(fe)};
}

}  // namespace

int main() {
  criterion(1, "fold points", 1, fold_points);
  criterion(2, "eigenvalue certificate", 5, eigen_certificate);
  criterion(3, "blow-up algebra", 5, blowup_algebra);
  criterion(4, "family-chart conjugacy", 10, conjugacy);
  criterion(5, "tunnel-diode example", 30, example1);
  criterion(6, "planar example matrix", 30, example2);
  criterion(7, "region of attraction enlargement", 600, roa);
  criterion(8, "directional-chart tangency", 5, tangency);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
