#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "sfstab/control.hpp"
#include "sfstab/normal_form.hpp"
#include "sfstab/sim.hpp"

namespace sfstab {

struct AxisRange {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t n = 2;

  double at(std::size_t i) const;
  bool operator==(const AxisRange&) const = default;
};

struct GridSpec {
  std::vector<AxisRange> x_ranges;
  AxisRange z_range;

  bool operator==(const GridSpec&) const = default;
};

/// lo < hi, n >= 2 on every axis (a degenerate lo == hi, n == 1 axis is a
/// single node and is also accepted).  Throws PreconditionError.
void check_grid(const GridSpec& grid, std::size_t slow_dim);

std::size_t grid_size(const GridSpec& grid);

/// Row-major node list: x_1 varies slowest, z fastest.
std::vector<Vector> grid_nodes(const GridSpec& grid);

/// Controller variant applied to a normal-form system.
struct ControllerSpec {
  enum class Kind { None, Thm2, Thm2Plus3, HighGain };

  Kind kind = Kind::None;
  Theorem2Params thm2;
  Theorem3Params thm3;
  HighGainParams highgain;

  std::string describe() const;
  bool operator==(const ControllerSpec&) const = default;
};

/// Empty Controller for Kind::None.  High-gain epsilon is taken from sys.
Controller build_controller(const ControllerSpec& spec, const NormalFormSystem& sys);

struct ClassifyParams {
  double ball = 1e-3;
  double dwell = 1.0;

  bool operator==(const ClassifyParams&) const = default;
};

struct RoAReport {
  GridSpec grid;
  std::string variant;
  std::vector<Vector> nodes;
  std::vector<Outcome> outcomes;
  std::size_t converged_count = 0;
  std::size_t diverged_count = 0;
  std::size_t undecided_count = 0;
};

/// Simulates and classifies one initial condition.
using CellEvaluator = std::function<Outcome(const Vector& ic)>;

/// Integrates the closed loop from `ic` and classifies it; numerical
/// failures are reported as Diverged at t = 0.
Outcome evaluate_cell(const OdeSystem& ode, const Vector& ic, const IntegratorConfig& cfg,
                      const ClassifyParams& cls);

RoAReport sweep(const CellEvaluator& cell, const GridSpec& grid, std::string variant,
                std::size_t jobs = 1);

RoAReport sweep(const NormalFormSystem& sys, const ControllerSpec& variant, const GridSpec& grid,
                const IntegratorConfig& cfg, const ClassifyParams& cls = {}, std::size_t jobs = 1);

struct RoAComparison {
  std::size_t converged_a = 0;
  std::size_t converged_b = 0;
  std::vector<std::size_t> changed_cells;
  bool a_larger = false;

  long long delta() const {
    return static_cast<long long>(converged_a) - static_cast<long long>(converged_b);
  }
};

/// Throws PreconditionError when the grids differ.
RoAComparison compare(const RoAReport& a, const RoAReport& b);

/// `x1,...,z,outcome` rows.
void write_roa_csv(std::ostream& os, const RoAReport& report);
std::string summary_line(const RoAReport& report);

}  // namespace sfstab
