#include "sfstab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <random>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "sfstab/blowup.hpp"
#include "sfstab/control.hpp"
#include "sfstab/errors.hpp"
#include "sfstab/examples.hpp"
#include "sfstab/normal_form.hpp"
#include "sfstab/parallel.hpp"
#include "sfstab/sim.hpp"

namespace sfstab {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

int uniform_k(Rng& rng, int lo = 2, int hi = 6) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

Vector uniform_vec(Rng& rng, std::size_t n, double lo, double hi) {
  Vector v(n);
  for (double& e : v) e = uniform(rng, lo, hi);
  return v;
}

double rel_err(double a, double b, double scale) { return std::abs(a - b) / std::max(scale, 1e-300); }

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double e : v) m = std::max(m, std::abs(e));
  return m;
}

// f_i = 1 + x_i + z + 0.5 x_1 z; smooth with f(0) != 0
NormalFormSystem test_system(int k, double eps) {
  NormalFormSystem sys;
  sys.k = k;
  sys.epsilon = eps;
  sys.slow_f = [](std::span<const double> x, double z, double) {
    Vector f(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) f[i] = 1.0 + x[i] + z + 0.5 * x[0] * z;
    return f;
  };
  return sys;
}

Theorem2Params random_thm2(Rng& rng, int k, const Vector& c) {
  Theorem2Params p;
  p.c = c;
  p.a = uniform_vec(rng, static_cast<std::size_t>(k - 1), 1e-3, 10.0);
  p.b = uniform(rng, 1e-3, 10.0);
  return p;
}

struct Acc {
  double max_error = 0.0;
  std::size_t samples = 0;
  std::string worst;
  void add(double err, const std::string& where = {}) {
    ++samples;
    if (!(err <= max_error)) {
      max_error = std::isnan(err) ? INFINITY : err;
      worst = where;
    }
  }
  SuiteResult finish(std::string name, double tol) const {
    SuiteResult r;
    r.name = std::move(name);
    r.samples = samples;
    r.max_error = max_error;
    r.tolerance = tol;
    r.passed = samples > 0 && max_error <= tol;
    r.detail = worst;
    return r;
  }
};

// ---------------------------------------------------------------------------

SuiteResult suite_g_horner(std::uint64_t seed) {
  Rng rng(seed);
  Acc acc;
  for (int s = 0; s < 1000; ++s) {
    const int k = uniform_k(rng);
    const Vector x = uniform_vec(rng, static_cast<std::size_t>(k - 1), -3.0, 3.0);
    const double z = uniform(rng, -3.0, 3.0);
    // ascending coefficients are (x_1, ..., x_{k-1}, 0, 1)
    double h = 1.0, scale = 1.0;
    h *= z;
    scale *= std::abs(z);
    for (int i = k - 1; i >= 1; --i) {
      h = h * z + x[static_cast<std::size_t>(i - 1)];
      scale = scale * std::abs(z) + std::abs(x[static_cast<std::size_t>(i - 1)]);
    }
    acc.add(rel_err(eval_g(x, z, k), -h, scale), fmt::format("k={}", k));
  }
  return acc.finish("g-horner", 1e-14);
}

SuiteResult suite_quasihomogeneity(std::uint64_t seed) {
  Rng rng(seed);
  Acc acc;
  for (int s = 0; s < 1000; ++s) {
    const int k = uniform_k(rng);
    const Vector x = uniform_vec(rng, static_cast<std::size_t>(k - 1), -2.0, 2.0);
    const double z = uniform(rng, -2.0, 2.0);
    const double lambda = std::exp(uniform(rng, std::log(0.1), std::log(10.0)));
    Vector xs(x.size());
    double scale = std::pow(std::abs(z), k);
    for (std::size_t j = 0; j < x.size(); ++j) {
      xs[j] = std::pow(lambda, k - static_cast<int>(j)) * x[j];
      scale += std::abs(x[j]) * std::pow(std::abs(z), static_cast<double>(j));
    }
    const double lk = std::pow(lambda, k);
    acc.add(rel_err(eval_g(xs, lambda * z, k), lk * eval_g(x, z, k), lk * scale),
            fmt::format("k={} lambda={:.4g}", k, lambda));
  }
  return acc.finish("quasihomogeneity", 1e-11);
}

SuiteResult suite_degeneracy(std::uint64_t) {
  Acc acc;
  for (int k = 2; k <= 6; ++k) {
    const Vector x(static_cast<std::size_t>(k - 1), 0.0);
    acc.add(degeneracy_order(x, 0.0, k) == k ? 0.0 : 1.0, fmt::format("k={}", k));
  }
  // fold of the cubic: g = -(z^3 - 3z + 2) at z = 1
  acc.add(degeneracy_order(Vector{2.0, -3.0}, 1.0, 3) == 2 ? 0.0 : 1.0, "cubic fold");
  acc.add(degeneracy_order(Vector{-1.0}, 1.0, 2) == 1 ? 0.0 : 1.0, "regular point");
  return acc.finish("fold-degeneracy", 0.0);
}

SuiteResult suite_slow_fast(std::uint64_t seed) {
  Rng rng(seed);
  Acc acc;
  for (int s = 0; s < 500; ++s) {
    const int k = uniform_k(rng);
    const double eps = uniform(rng, 1e-3, 1.0);
    const NormalFormSystem sys = test_system(k, eps);
    const State st{uniform_vec(rng, static_cast<std::size_t>(k - 1), -2.0, 2.0), uniform(rng, -2.0, 2.0)};
    const ControlInput u{uniform_vec(rng, static_cast<std::size_t>(k - 1), -2.0, 2.0)};
    const StateDerivative slow = eval_rhs_slow(sys, st, u);
    const StateDerivative fast = eval_rhs_fast(sys, st, u);
    for (std::size_t j = 0; j < slow.dx.size(); ++j) {
      acc.add(rel_err(slow.dx[j], fast.dx[j] / eps, std::abs(slow.dx[j])));
    }
    acc.add(rel_err(slow.dz, fast.dz / eps, std::abs(slow.dz)));
  }
  return acc.finish("slow-fast-scaling", 1e-14);
}

SuiteResult suite_roundtrip(std::uint64_t seed) {
  Rng rng(seed);
  Acc acc;
  for (int s = 0; s < 1000; ++s) {
    const int k = uniform_k(rng);
    const std::size_t n = static_cast<std::size_t>(k - 1);
    const State st{uniform_vec(rng, n, -5.0, 5.0), uniform(rng, -5.0, -1e-2)};
    const double eps = uniform(rng, 1e-4, 1.0);
    const BlownDown fam = from_family_chart(to_family_chart(st, eps, k), k);
    const BlownDown dir = from_directional_zneg(to_directional_zneg(st, eps, k), k);
    auto err = [&](const BlownDown& b) {
      double e = rel_err(b.epsilon, eps, eps);
      e = std::max(e, rel_err(b.state.z, st.z, std::abs(st.z)));
      for (std::size_t j = 0; j < n; ++j) {
        e = std::max(e, rel_err(b.state.x[j], st.x[j], std::max(std::abs(st.x[j]), 1e-12)));
      }
      return e;
    };
    acc.add(err(fam), fmt::format("family k={}", k));
    acc.add(err(dir), fmt::format("directional k={}", k));
    // both inverse maps agree on the shared domain z < 0
    double e = rel_err(fam.epsilon, dir.epsilon, eps);
    e = std::max(e, rel_err(fam.state.z, dir.state.z, std::abs(st.z)));
    for (std::size_t j = 0; j < n; ++j) e = std::max(e, rel_err(fam.state.x[j], dir.state.x[j], std::abs(st.x[j]) + 1e-12));
    acc.add(e, fmt::format("compatibility k={}", k));
  }
  return acc.finish("chart-roundtrip", 1e-12);
}

SuiteResult suite_blowdown_identity(std::uint64_t seed) {
  Rng rng(seed);
  Acc acc;
  for (int s = 0; s < 1000; ++s) {
    const int k = uniform_k(rng);
    const std::size_t n = static_cast<std::size_t>(k - 1);
    const double eps = uniform(rng, 1e-6, 1.0);
    const Theorem2Params p = random_thm2(rng, k, uniform_vec(rng, n, -3.0, 3.0));
    const State st{uniform_vec(rng, n, -3.0, 3.0), uniform(rng, -3.0, 3.0)};
    const ControlInput u = thm2_control(st, eps, k, p);
    const Vector uc = chart_controller_family(to_family_chart(st, eps, k), k, p);
    for (std::size_t j = 0; j < n; ++j) {
      // scale: sum of magnitudes of the terms making up u_j
      const double r = std::pow(eps, 1.0 / (2.0 * k - 1.0));
      double scale = std::abs(p.c[j]) + std::abs(p.a[j] * st.x[j]) / std::pow(eps, k / (2.0 * k - 1.0));
      if (j == 0) scale += std::abs(p.b * st.z) / r;
      acc.add(rel_err(u.u[j], uc[j], scale), fmt::format("k={} eps={:.3g}", k, eps));
    }
  }
  return acc.finish("blowdown-identity", 1e-11);
}

SuiteResult suite_eigenvalues(std::uint64_t seed) {
  Rng rng(seed);
  Acc acc;
  std::size_t unstable = 0;
  for (int s = 0; s < 200; ++s) {
    const int k = uniform_k(rng);
    Theorem2Params p;
    p.c.assign(static_cast<std::size_t>(k - 1), 0.0);
    p.a = uniform_vec(rng, static_cast<std::size_t>(k - 1), 1e-9, 10.0);
    p.b = uniform(rng, 1e-9, 10.0);
    const DenseMatrix J = closed_loop_jacobian_origin(k, p);
    Eigen::MatrixXd M(J.rows, J.cols);
    for (std::size_t i = 0; i < J.rows; ++i) {
      for (std::size_t j = 0; j < J.cols; ++j) M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = J(i, j);
    }
    const Eigen::VectorXcd numeric = Eigen::EigenSolver<Eigen::MatrixXd>(M, false).eigenvalues();
    std::vector<std::complex<double>> closed = eigenvalues_origin(k, p);
    std::vector<bool> used(closed.size(), false);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < numeric.size(); ++i) {
      double best = INFINITY;
      std::size_t arg = 0;
      for (std::size_t j = 0; j < closed.size(); ++j) {
        if (used[j]) continue;
        const double d = std::abs(numeric[i] - closed[j]);
        if (d < best) {
          best = d;
          arg = j;
        }
      }
      if (closed.empty() || best == INFINITY) {
        worst = INFINITY;
        break;
      }
      used[arg] = true;
      worst = std::max(worst, best);
    }
    for (const auto& l : closed) {
      if (!(l.real() < 0.0)) ++unstable;
    }
    acc.add(worst, fmt::format("k={} a1={:.4g} b={:.4g}", k, p.a[0], p.b));
  }
  SuiteResult r = acc.finish("eigenvalues", 1e-9);
  if (unstable > 0) {
    r.passed = false;
    r.detail = fmt::format("{} eigenvalues with Re >= 0", unstable);
  }
  return r;
}

SuiteResult suite_jacobian_fd(std::uint64_t seed) {
  Rng rng(seed);
  Acc acc;
  const double h = 1e-6;
  for (int s = 0; s < 50; ++s) {
    const int k = uniform_k(rng);
    const std::size_t n = static_cast<std::size_t>(k);
    const NormalFormSystem sys = test_system(k, 0.01);
    const Theorem2Params p = random_thm2(rng, k, sys.f_at_origin());
    const DenseMatrix J = closed_loop_jacobian_origin(k, p);
    auto field = [&](const Vector& y) {
      FamilyChartState c{0.0, Vector(y.begin(), y.end() - 1), y.back()};
      const FamilyChartDerivative d = closed_loop_family_rhs(c, sys, p);
      Vector out = d.dx_bar;
      out.push_back(d.dz_bar);
      return out;
    };
    double worst = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      Vector yp(n, 0.0), ym(n, 0.0);
      yp[j] = h;
      ym[j] = -h;
      const Vector fp = field(yp), fm = field(ym);
      for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs((fp[i] - fm[i]) / (2.0 * h) - J(i, j)));
    }
    acc.add(worst, fmt::format("k={}", k));
  }
  return acc.finish("jacobian-fd", 1e-6);
}

SuiteResult suite_family_regularity(std::uint64_t seed) {
  Rng rng(seed);
  Acc acc;
  for (int s = 0; s < 50; ++s) {
    const int k = uniform_k(rng);
    const std::size_t n = static_cast<std::size_t>(k - 1);
    const NormalFormSystem sys = test_system(k, 0.01);
    const Theorem2Params p = random_thm2(rng, k, sys.f_at_origin());
    FamilyChartState c{0.0, uniform_vec(rng, n, -1.0, 1.0), uniform(rng, -1.0, 1.0)};
    const FamilyChartDerivative d0 = closed_loop_family_rhs(c, sys, p);
    std::vector<double> errs;
    for (int j = 1; j <= 12; ++j) {
      c.r_bar = std::pow(10.0, -j);
      const FamilyChartDerivative d = closed_loop_family_rhs(c, sys, p);
      double e = std::abs(d.dz_bar - d0.dz_bar);
      for (std::size_t i = 0; i < n; ++i) e = std::max(e, std::abs(d.dx_bar[i] - d0.dx_bar[i]));
      if (!std::isfinite(e)) e = INFINITY;
      errs.push_back(e);
    }
    // errors must shrink with r_bar and the last one must be at rounding level
    double worst = errs.back() / (1.0 + max_abs(d0.dx_bar) + std::abs(d0.dz_bar));
    for (std::size_t j = 1; j < errs.size(); ++j) {
      if (errs[j] > errs[j - 1] * 1.01 + 1e-13) worst = std::max(worst, 1.0);
    }
    acc.add(worst, fmt::format("k={}", k));
  }
  return acc.finish("family-regularity", 1e-10);
}

SuiteResult suite_gain_scaling(std::uint64_t seed) {
  Rng rng(seed);
  Acc acc;
  for (int s = 0; s < 200; ++s) {
    const int k = uniform_k(rng);
    const std::size_t n = static_cast<std::size_t>(k - 1);
    Theorem2Params p = random_thm2(rng, k, Vector(n, 0.0));
    const State st{uniform_vec(rng, n, 0.1, 2.0), 0.0};
    const double eps = uniform(rng, 1e-3, 1.0);
    const ControlInput u0 = thm2_control(st, eps, k, p);
    const ControlInput u1 = thm2_control(st, eps / 8.0, k, p);
    const double expected = std::pow(8.0, k / (2.0 * k - 1.0));
    for (std::size_t j = 0; j < n; ++j) acc.add(rel_err(u1.u[j] / u0.u[j], expected, expected), fmt::format("k={}", k));
  }
  return acc.finish("gain-scaling", 1e-12);
}

SuiteResult suite_directional_F(std::uint64_t) {
  const NormalFormSystem sys = test_system(2, 0.0);
  // f + u == 0 through a controller cancelling f
  const Controller cancel = [&](const State& s, double eps) {
    Vector f = sys.eval_slow(s.x, s.z, eps);
    for (double& e : f) e = -e;
    return ControlInput{f};
  };
  Acc acc;
  {
    const DirectionalChartDerivative d = desing_rhs_directional({0.7, {0.0}, 0.3}, sys, cancel);
    acc.add(std::max({std::abs(d.drho - 0.7), std::abs(d.dchi[0]), std::abs(d.dmu + 0.9)}), "chi=0");
  }
  {
    const DirectionalChartDerivative d = desing_rhs_directional({0.7, {1.0}, 0.3}, sys, cancel);
    acc.add(std::max({std::abs(directional_F(Vector{1.0}, 2) - 2.0), std::abs(d.drho - 1.4),
                      std::abs(d.dchi[0] + 4.0), std::abs(d.dmu + 1.8)}),
            "chi=1");
  }
  return acc.finish("directional-F", 1e-14);
}

SuiteResult suite_tangency(std::uint64_t seed) {
  Rng rng(seed);
  Acc acc;
  for (int s = 0; s < 500; ++s) {
    const int k = uniform_k(rng);
    const std::size_t n = static_cast<std::size_t>(k - 1);
    const NormalFormSystem base = test_system(k, 0.0);
    DirectionalChartState c{uniform(rng, 0.2, 2.0), uniform_vec(rng, n, -2.0, 2.0), uniform(rng, 0.01, 1.0)};
    const bool with_control = s % 2 == 0;
    Controller law;
    if (with_control) {
      Theorem3Params p3{uniform_vec(rng, n, 0.0, 5.0), Vector(n, 0.0)};
      p3.chi_star[0] = uniform(rng, -3.0, -1.1);
      law = make_full_controller(k, random_thm2(rng, k, base.f_at_origin()), p3);
    }
    const DirectionalChartDerivative d = desing_rhs_directional(c, base, law);

    // central finite-difference Jacobian of the blow-down (rho, chi, mu) -> (x, z, eps)
    const std::size_t m = n + 2;
    auto pack = [&](const DirectionalChartState& q) {
      Vector v{q.rho};
      v.insert(v.end(), q.chi.begin(), q.chi.end());
      v.push_back(q.mu);
      return v;
    };
    auto unpack = [&](const Vector& v) {
      return DirectionalChartState{v[0], Vector(v.begin() + 1, v.begin() + 1 + static_cast<long>(n)), v[m - 1]};
    };
    auto blow = [&](const Vector& v) {
      const BlownDown b = from_directional_zneg(unpack(v), k);
      Vector out = b.state.x;
      out.push_back(b.state.z);
      out.push_back(b.epsilon);
      return out;
    };
    const Vector y0 = pack(c);
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
      for (std::size_t i = 0; i < m; ++i) push[i] += (bp[i] - bm[i]) / (2.0 * h) * dy[j];
    }

    const BlownDown p = from_directional_zneg(c, k);
    NormalFormSystem sys = base.with_epsilon(p.epsilon);
    const ControlInput u = law ? law(p.state, p.epsilon) : ControlInput{Vector(n, 0.0)};
    const StateDerivative fast = eval_rhs_fast(sys, p.state, u);
    Vector target = fast.dx;
    target.push_back(fast.dz);
    target.push_back(0.0);
    const double factor = std::pow(c.rho, k - 1);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      num = std::max(num, std::abs(factor * push[i] - target[i]));
      den = std::max(den, std::abs(target[i]));
    }
    acc.add(num / den, fmt::format("k={} rho={:.3g}", k, c.rho));
  }
  return acc.finish("directional-tangency", 1e-8);
}

SuiteResult suite_compensation_chart(std::uint64_t seed) {
  Rng rng(seed);
  Acc acc;
  for (int s = 0; s < 1000; ++s) {
    const int k = uniform_k(rng);
    const std::size_t n = static_cast<std::size_t>(k - 1);
    Theorem3Params p{uniform_vec(rng, n, 0.0, 10.0), uniform_vec(rng, n, -3.0, 3.0)};
    p.chi_star[0] = uniform(rng, -4.0, -1.01);
    for (std::size_t j = 1; j < n; ++j) p.chi_star[j] = 0.0;
    const State st{uniform_vec(rng, n, -3.0, 3.0), uniform(rng, -3.0, -1e-2)};
    const DirectionalChartState c = to_directional_zneg(st, 0.01, k);
    const ControlInput w = thm3_compensation(st, k, p);
    for (std::size_t j = 0; j < n; ++j) {
      const double q = static_cast<double>(k - static_cast<int>(j) + 1);  // k - i + 2 with i = j + 1
      const double expected = p.K[j] * std::pow(c.rho, q) * (p.chi_star[j] - c.chi[j]);
      const double scale = p.K[j] * std::pow(c.rho, q) * (std::abs(p.chi_star[j]) + std::abs(c.chi[j])) + 1e-300;
      acc.add(rel_err(w.u[j], expected, scale), fmt::format("k={}", k));
    }
  }
  return acc.finish("compensation-chart", 1e-11);
}

SuiteResult suite_conjugacy(std::uint64_t seed) {
  Rng rng(seed);
  const int k = 2;
  const double eps = 0.01;
  const NormalFormSystem sys = examples::build_planar_example(eps);
  const Theorem2Params p{sys.f_at_origin(), {1.0}, 3.0};
  const double tau = family_time_rescale(eps, k);
  const double r = std::pow(eps, 1.0 / (2.0 * k - 1.0));

  IntegratorConfig direct_cfg = IntegratorConfig::for_epsilon(eps, 1.0);
  direct_cfg.rtol = direct_cfg.atol = 1e-10;
  direct_cfg.record_stride = 1e-2;
  IntegratorConfig chart_cfg = direct_cfg;
  chart_cfg.t_final = 1.0 / tau;
  chart_cfg.max_step = 1e-2;
  chart_cfg.record_stride = direct_cfg.record_stride / tau;

  const OdeSystem direct = closed_loop_slow(sys, make_thm2_controller(k, p));
  OdeSystem chart;
  chart.dim = 2;
  chart.rhs = [&](double, std::span<const double> y, std::span<double> dy) {
    const FamilyChartDerivative d = closed_loop_family_rhs({r, {y[0]}, y[1]}, sys, p);
    dy[0] = d.dx_bar[0];
    dy[1] = d.dz_bar;
  };

  Acc acc;
  std::string note;
  for (int attempt = 0; attempt < 20 && acc.samples == 0; ++attempt) {
    // uniform in the unit disc
    const double rad = std::sqrt(uniform(rng, 0.0, 1.0));
    const double ang = uniform(rng, 0.0, 2.0 * M_PI);
    const Vector ic{rad * std::cos(ang), rad * std::sin(ang)};
    const Trajectory a = integrate(direct, ic, direct_cfg);
    if (a.outcome.is_diverged()) {
      note += fmt::format("resampled ic=({:.4g},{:.4g}); ", ic[0], ic[1]);
      continue;
    }
    const FamilyChartState c0 = to_family_chart(state_from(ic), eps, k);
    const Trajectory b = integrate(chart, Vector{c0.x_bar[0], c0.z_bar}, chart_cfg);
    if (b.outcome.is_diverged() || a.size() != b.size()) {
      acc.add(INFINITY, "chart trajectory failed");
      break;
    }
    double peak = 0.0;
    for (const auto& y : a.states) peak = std::max(peak, euclidean_norm(y));
    for (std::size_t i = 0; i < a.size(); ++i) {
      const BlownDown bd = from_family_chart({r, {b.states[i][0]}, b.states[i][1]}, k);
      const double dx = bd.state.x[0] - a.states[i][0];
      const double dz = bd.state.z - a.states[i][1];
      const double dt = std::abs(tau * b.times[i] - a.times[i]);
      acc.add(std::max(std::hypot(dx, dz) / peak, dt), fmt::format("t={:.3g}", a.times[i]));
    }
    note += fmt::format("ic=({:.4g},{:.4g})", ic[0], ic[1]);
  }
  SuiteResult res = acc.finish("conjugacy", 1e-5);
  res.detail = note + (res.detail.empty() ? "" : " worst at " + res.detail);
  return res;
}

SuiteResult suite_coordinate_change(std::uint64_t seed) {
  Rng rng(seed);
  Acc acc;
  const examples::TunnelDiode td({uniform(rng, 0.5, 2.0), uniform(rng, 0.5, 2.0), 0.01});
  for (int s = 0; s < 500; ++s) {
    const examples::CircuitState c{uniform(rng, -20, 20), uniform(rng, -10, 40), uniform(rng, -5, 10)};
    const Vector u = uniform_vec(rng, 2, -10.0, 10.0);
    const auto dc = td.circuit_rhs(c, u);
    // translated derivative: x1' = -I_L', x2' = V_C', z' = V_D'
    const std::array<double, 3> expected{-dc[1], dc[0], dc[2]};
    const auto y = examples::TunnelDiode::to_translated(c);
    const auto d = td.rhs(y, u);
    double e = 0.0;
    for (int i = 0; i < 3; ++i) e = std::max(e, rel_err(d[i], expected[i], 1.0 + std::abs(expected[i])));
    const auto back = examples::TunnelDiode::to_translated(examples::TunnelDiode::to_circuit(y));
    for (int i = 0; i < 3; ++i) e = std::max(e, rel_err(back[i], y[i], 1.0 + std::abs(y[i])));
    acc.add(e);
  }
  return acc.finish("coordinate-change", 1e-12);
}

SuiteResult suite_fold_points(std::uint64_t) {
  Acc acc;
  const auto folds = examples::diode_fold_points();
  if (folds.size() != 2) {
    acc.add(INFINITY, fmt::format("{} fold points", folds.size()));
  } else {
    acc.add(std::max(std::abs(folds[0].V_D - 2.0), std::abs(folds[0].I_D - 20.0)), "p1");
    acc.add(std::max(std::abs(folds[1].V_D - 4.0), std::abs(folds[1].I_D - 16.0)), "p2");
    for (const auto& f : folds) acc.add(std::abs(examples::diode_slope(f.V_D)), "slope");
  }
  return acc.finish("fold-points", 1e-9);
}

const std::vector<std::pair<std::string, std::function<SuiteResult(std::uint64_t)>>>& registry() {
  static const std::vector<std::pair<std::string, std::function<SuiteResult(std::uint64_t)>>> r{
      {"g-horner", suite_g_horner},
      {"quasihomogeneity", suite_quasihomogeneity},
      {"fold-degeneracy", suite_degeneracy},
      {"slow-fast-scaling", suite_slow_fast},
      {"chart-roundtrip", suite_roundtrip},
      {"blowdown-identity", suite_blowdown_identity},
      {"conjugacy", suite_conjugacy},
      {"family-regularity", suite_family_regularity},
      {"directional-F", suite_directional_F},
      {"directional-tangency", suite_tangency},
      {"compensation-chart", suite_compensation_chart},
      {"eigenvalues", suite_eigenvalues},
      {"jacobian-fd", suite_jacobian_fd},
      {"gain-scaling", suite_gain_scaling},
      {"coordinate-change", suite_coordinate_change},
      {"fold-points", suite_fold_points},
  };
  return r;
}

}  // namespace

std::vector<std::string> suite_names() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : registry()) names.push_back(name);
  return names;
}

SuiteResult run_suite(const std::string& name, std::uint64_t seed) {
  for (const auto& [n, fn] : registry()) {
    if (n != name) continue;
    try {
      return fn(seed);
    } catch (const std::exception& e) {
      SuiteResult r;
      r.name = name;
      r.passed = false;
      r.detail = fmt::format("exception: {}", e.what());
      return r;
    }
  }
  throw PreconditionError(fmt::format("unknown suite '{}'", name));
}

std::vector<SuiteResult> run_all_suites(std::uint64_t seed, std::size_t jobs) {
  const auto names = suite_names();
  std::vector<SuiteResult> out(names.size());
  parallel_for(names.size(), jobs, [&](std::size_t i) { out[i] = run_suite(names[i], seed + i); });
  return out;
}

std::string format_result(const SuiteResult& r) {
  return fmt::format("{:<22} {} samples={} max_err={:.3e} tol={:.1e}{}", r.name, r.passed ? "pass" : "FAIL",
                     r.samples, r.max_error, r.tolerance, r.detail.empty() ? "" : "  " + r.detail);
}

}  // namespace sfstab
