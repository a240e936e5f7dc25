#pragma once

#include <span>
#include <string>
#include <utility>

#include "fishctl/config.hpp"
#include "fishctl/model.hpp"
#include "fishctl/quantize.hpp"

namespace fishctl {

/// Backward dynamic-programming tables on the uniform 1D grid
/// X_j = j L / J, j = 0..J.
struct ValueControlGrid {
  int grid_points = 0;  // J
  double domain = 0.0;  // L
  int time_steps = 0;   // M
  double horizon = 0.0;
  double u_min = 0.0, u_max = 0.0;
  std::vector<double> values;    // (M+1)*(J+1), values[M] = 0
  std::vector<double> controls;  // M*(J+1)

  std::span<const double> value_row(int m) const {
    return {values.data() + static_cast<size_t>(m) * (grid_points + 1),
            static_cast<size_t>(grid_points + 1)};
  }
  std::span<const double> control_row(int m) const {
    return {controls.data() + static_cast<size_t>(m) * (grid_points + 1),
            static_cast<size_t>(grid_points + 1)};
  }
};

struct SdpOptions {
  int grid_points = 40;  // J
  double domain = 3.0;   // L
  int golden_iters = 50;
  // > 0 restricts the control search to this many evenly spaced levels in
  // [u_min, u_max] instead of the continuous dichotomic search.
  int control_levels = 0;
};

// Piecewise-linear interpolation of a grid row at x >= 0; linear
// extrapolation from the last segment for x > L.
double interp_row(std::span<const double> row, double domain, double x);

// One-step Bellman objective at state X and control u. The tracking term
// uses the closed form |X - X_d + hX(r - kX - u)|^2 + h sigma^2 X^2; the
// quadratic-variation and continuation terms go through the quadrature.
// u_next may be empty (last step: the variation term vanishes).
double stage_objective(const ModelConfig& cfg, double x, double u, std::span<const double> v_next,
                       std::span<const double> u_next, const QuantGrid& quant, double domain);

// Golden-section search with `iters` contractions, then comparison against
// both interval endpoints; ties broken toward the smaller argument.
std::pair<double, double> dichotomic_min(const std::function<double(double)>& f, double lo,
                                         double hi, int iters);

// Backward recursion from v^M = 0. 1D only.
ValueControlGrid sdp_solve(const ModelConfig& cfg, const SdpOptions& opts, const QuantGrid& quant);

// Feedback policy: controls row at the enclosing time index, linearly
// interpolated in X and clamped to bounds.
PolicyPtr sdp_policy(const ValueControlGrid& grid);

void save_sdp_grid(const ValueControlGrid& grid, const std::string& path);
ValueControlGrid load_sdp_grid(const std::string& path);

}  // namespace fishctl
