#include "sfstab/roa.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "sfstab/errors.hpp"
#include "sfstab/parallel.hpp"

namespace sfstab {

double AxisRange::at(std::size_t i) const {
  if (n <= 1) return lo;
  // (hi - lo) * i / (n - 1): refining 2x reproduces coinciding nodes bit for bit
  return lo + ((hi - lo) * static_cast<double>(i)) / static_cast<double>(n - 1);
}

namespace {

void check_axis(const AxisRange& r, const std::string& name) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi)) {
    throw PreconditionError(fmt::format("grid axis {}: bounds must be finite", name));
  }
  if (r.n == 1 && r.lo == r.hi) return;
  if (!(r.lo < r.hi)) throw PreconditionError(fmt::format("grid axis {}: require lo < hi", name));
  if (r.n < 2) throw PreconditionError(fmt::format("grid axis {}: require n_points >= 2", name));
}

std::string vec_str(const Vector& v) { return fmt::format("[{}]", fmt::join(v, ",")); }

}  // namespace

void check_grid(const GridSpec& grid, std::size_t slow_dim) {
  if (grid.x_ranges.size() != slow_dim) {
    throw DimensionError(fmt::format("grid has {} slow axes, system has {}", grid.x_ranges.size(),
                                     slow_dim));
  }
  for (std::size_t i = 0; i < grid.x_ranges.size(); ++i) {
    check_axis(grid.x_ranges[i], fmt::format("x{}", i + 1));
  }
  check_axis(grid.z_range, "z");
}

std::size_t grid_size(const GridSpec& grid) {
  std::size_t n = grid.z_range.n;
  for (const auto& r : grid.x_ranges) n *= r.n;
  return n;
}

std::vector<Vector> grid_nodes(const GridSpec& grid) {
  std::vector<AxisRange> axes = grid.x_ranges;
  axes.push_back(grid.z_range);
  const std::size_t total = grid_size(grid);
  std::vector<Vector> nodes;
  nodes.reserve(total);
  std::vector<std::size_t> idx(axes.size(), 0);
  for (std::size_t c = 0; c < total; ++c) {
    Vector node(axes.size());
    for (std::size_t a = 0; a < axes.size(); ++a) node[a] = axes[a].at(idx[a]);
    nodes.push_back(std::move(node));
    for (std::size_t a = axes.size(); a-- > 0;) {
      if (++idx[a] < axes[a].n) break;
      idx[a] = 0;
    }
  }
  return nodes;
}

std::string ControllerSpec::describe() const {
  switch (kind) {
    case Kind::None: return "open-loop";
    case Kind::Thm2:
      return fmt::format("thm2(a={}, b={}, c={})", vec_str(thm2.a), thm2.b, vec_str(thm2.c));
    case Kind::Thm2Plus3:
      return fmt::format("thm2plus3(a={}, b={}, c={}, K={}, chi_star={})", vec_str(thm2.a),
                         thm2.b, vec_str(thm2.c), vec_str(thm3.K), vec_str(thm3.chi_star));
    case Kind::HighGain:
      return fmt::format("highgain(A={}, B={}{})", vec_str(highgain.A_hg), highgain.B_hg,
                         highgain.cancel.empty() ? "" : ", cancel=" + vec_str(highgain.cancel));
  }
  return "unknown";
}

Controller build_controller(const ControllerSpec& spec, const NormalFormSystem& sys) {
  switch (spec.kind) {
    case ControllerSpec::Kind::None: return {};
    case ControllerSpec::Kind::Thm2: return make_thm2_controller(sys.k, spec.thm2);
    case ControllerSpec::Kind::Thm2Plus3: return make_full_controller(sys.k, spec.thm2, spec.thm3);
    case ControllerSpec::Kind::HighGain: {
      HighGainParams p = spec.highgain;
      p.epsilon = sys.epsilon;
      require_dim(p.A_hg, sys.slow_dim(), "HighGainParams.A_hg");
      return make_highgain_controller(std::move(p));
    }
  }
  return {};
}

Outcome evaluate_cell(const OdeSystem& ode, const Vector& ic, const IntegratorConfig& cfg,
                      const ClassifyParams& cls) {
  try {
    const Trajectory traj = integrate(ode, ic, cfg);
    return classify(traj, cls.ball, cls.dwell);
  } catch (const NumericalError&) {
    return Outcome::diverged(0.0);
  }
}

RoAReport sweep(const CellEvaluator& cell, const GridSpec& grid, std::string variant,
                std::size_t jobs) {
  check_grid(grid, grid.x_ranges.size());
  RoAReport report;
  report.grid = grid;
  report.variant = std::move(variant);
  report.nodes = grid_nodes(grid);
  report.outcomes.assign(report.nodes.size(), Outcome::undecided());
  parallel_for(report.nodes.size(), jobs, [&](std::size_t i) {
    try {
      report.outcomes[i] = cell(report.nodes[i]);
    } catch (const NumericalError&) {
      report.outcomes[i] = Outcome::diverged(0.0);
    }
  });
  for (const Outcome& o : report.outcomes) {
    switch (o.kind) {
      case Outcome::Kind::Converged: ++report.converged_count; break;
      case Outcome::Kind::Diverged: ++report.diverged_count; break;
      case Outcome::Kind::Undecided: ++report.undecided_count; break;
    }
  }
  return report;
}

RoAReport sweep(const NormalFormSystem& sys, const ControllerSpec& variant, const GridSpec& grid,
                const IntegratorConfig& cfg, const ClassifyParams& cls, std::size_t jobs) {
  check_grid(grid, sys.slow_dim());
  check_config(cfg);
  const OdeSystem ode = closed_loop_slow(sys, build_controller(variant, sys));
  return sweep([&](const Vector& ic) { return evaluate_cell(ode, ic, cfg, cls); }, grid,
               variant.describe(), jobs);
}

RoAComparison compare(const RoAReport& a, const RoAReport& b) {
  if (!(a.grid == b.grid) || a.outcomes.size() != b.outcomes.size()) {
    throw PreconditionError("compare: reports were produced on different grids");
  }
  RoAComparison cmp;
  cmp.converged_a = a.converged_count;
  cmp.converged_b = b.converged_count;
  for (std::size_t i = 0; i < a.outcomes.size(); ++i) {
    if (a.outcomes[i].kind != b.outcomes[i].kind) cmp.changed_cells.push_back(i);
  }
  cmp.a_larger = cmp.converged_a > cmp.converged_b;
  return cmp;
}

void write_roa_csv(std::ostream& os, const RoAReport& report) {
  const std::size_t nx = report.grid.x_ranges.size();
  for (std::size_t i = 1; i <= nx; ++i) os << 'x' << i << ',';
  os << "z,outcome\n";
  for (std::size_t c = 0; c < report.nodes.size(); ++c) {
    for (double v : report.nodes[c]) os << fmt::format("{:.17g},", v);
    os << outcome_name(report.outcomes[c].kind) << '\n';
  }
}

std::string summary_line(const RoAReport& report) {
  return fmt::format("variant={} cells={} converged={} diverged={} undecided={}", report.variant,
                     report.outcomes.size(), report.converged_count, report.diverged_count,
                     report.undecided_count);
}

}  // namespace sfstab
