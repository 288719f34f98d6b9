#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <vector>

#include "sfstab/blowup.hpp"
#include "sfstab/normal_form.hpp"

namespace sfstab {

/// u = -c + b eps^{-1/(2k-1)} z e_1 - eps^{-k/(2k-1)} diag(a) x.
struct Theorem2Params {
  Vector c;  // c_i = f_i(0, 0, 0)
  Vector a;  // a_i > 0
  double b = 1.0;

  bool operator==(const Theorem2Params&) const = default;
};

/// w_i = K_i (x_i z + (-z)^{k-i+2} chi*_i).
struct Theorem3Params {
  Vector K;
  Vector chi_star;

  bool operator==(const Theorem3Params&) const = default;
};

/// Benchmark v_i = (-A_i x_i + B z delta_{1i}) / eps.  A non-empty `cancel`
/// subtracts those constants as well (off by default).
struct HighGainParams {
  Vector A_hg;
  double B_hg = 1.0;
  double epsilon = 1.0;
  Vector cancel;

  bool operator==(const HighGainParams&) const = default;
};

void check_params(int k, const Theorem2Params& p);
void check_params(int k, const Theorem3Params& p);
void check_params(const HighGainParams& p);

ControlInput thm2_control(const State& s, double epsilon, int k, const Theorem2Params& p);
ControlInput thm3_compensation(const State& s, int k, const Theorem3Params& p);
ControlInput full_control(const State& s, double epsilon, int k, const Theorem2Params& p2,
                          const Theorem3Params& p3);

/// ub_1 = -c_1 - a_1 xb_1 + b zb,  ub_i = -c_i - r^{1-i} a_i xb_i.
/// Requires r > 0 when k >= 3.
Vector chart_controller_family(const FamilyChartState& c, int k, const Theorem2Params& p);

ControlInput highgain_control(const State& s, const HighGainParams& p);

/// Closed-loop desingularized family-chart field, written so the r^{1-i}
/// factors cancel; regular on r = 0 for every k.  The optional compensation
/// enters as r^{i-1} w_i, which is O(r).
FamilyChartDerivative closed_loop_family_rhs(const FamilyChartState& c, const NormalFormSystem& sys,
                                             const Theorem2Params& p2,
                                             const Theorem3Params* p3 = nullptr);

struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

/// J = [[-A, b e_1], [-e_1^T, 0]].
DenseMatrix closed_loop_jacobian_origin(int k, const Theorem2Params& p);

/// {(-a_1 +- sqrt(a_1^2 - 4b))/2, -a_2, ..., -a_{k-1}}.
std::vector<std::complex<double>> eigenvalues_origin(int k, const Theorem2Params& p);

Controller make_thm2_controller(int k, Theorem2Params p);
Controller make_full_controller(int k, Theorem2Params p2, Theorem3Params p3);
Controller make_highgain_controller(HighGainParams p);

}  // namespace sfstab
