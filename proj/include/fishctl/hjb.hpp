#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fishctl/config.hpp"
#include "fishctl/model.hpp"

namespace fishctl {

/// Raised when a requested computation exceeds a configured resource budget.
class ResourceLimit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Structured tensor grid over (0,L)^d with uniform spacing per dimension.
struct HjbGridSpec {
  std::vector<int> shape;  // node counts N_i per dimension (N_i >= 2)
  double domain = 3.0;     // L
  int time_steps = 80;
  // Fixed-point protocol for the control update.
  int fp_iters = 50;
  double fp_tol = 1e-10;
  // Linear-solve protocol for d >= 2 (Gauss-Seidel).
  int solver_sweeps = 1000;
  double solver_tol = 1e-12;
  std::size_t memory_budget = 2ull << 30;  // bytes
};

struct HjbGrid {
  int d = 0;
  std::vector<int> shape;
  double domain = 0.0;
  int time_steps = 0;
  double horizon = 0.0;
  double u_min = 0.0, u_max = 0.0;
  std::size_t n_nodes = 0;
  std::vector<double> values;    // (M+1)*n_nodes, values[M] = 0
  std::vector<double> controls;  // M*n_nodes*d

  std::span<const double> value_field(int m) const {
    return {values.data() + static_cast<size_t>(m) * n_nodes, n_nodes};
  }
  std::span<const double> control_field(int m) const {
    return {controls.data() + static_cast<size_t>(m) * n_nodes * d, n_nodes * d};
  }
  std::vector<double> node_coords(std::size_t flat) const;
};

// Drift-advected point X . (1 + h (r - kappa X - u)), clamped componentwise
// to [0, L].
void advected_point(const ModelConfig& cfg, std::span<const double> x, std::span<const double> u,
                    double h, double domain, std::span<double> out);

// Multilinear interpolation of a scalar field given on the tensor grid.
double interp_md(std::span<const double> field, std::span<const int> shape, double domain,
                 std::span<const double> x);

struct ControlUpdateResult {
  std::vector<double> u;
  double residual = 0.0;
  bool converged = true;
};

// Fixed-point control update at node X:
//   u <- clamp( u_next(adv(X,u)) + h/(2 beta) (alpha + X . grad v_next(adv(X,u))) )
// grad_next holds node gradients of v_next (n_nodes*d, central differences,
// one-sided at the boundary); interpolated at the advected point.
ControlUpdateResult control_update(const ModelConfig& cfg, const HjbGridSpec& spec,
                                   std::span<const double> v_next, std::span<const double> u_next,
                                   std::span<const double> grad_next, std::span<const double> x,
                                   std::span<const double> u_init);

// One backward step of the implicit semi-Lagrangian scheme: computes the
// control field, assembles the right-hand side and solves
//   (1/h) v - sum_i (sigma_i X_i)^2/2 d2v/dx_i^2 = rhs
// with no condition at X=0 (degenerate operator) and the far-boundary
// second difference pinned to -2/|sigma|^2.
void implicit_step(const ModelConfig& cfg, const HjbGridSpec& spec, std::span<const double> v_next,
                   std::span<const double> u_next, std::span<double> v_cur,
                   std::span<double> u_cur);

HjbGrid hjb_solve(const ModelConfig& cfg, const HjbGridSpec& spec);

// Multilinear in space, piecewise-constant in time.
PolicyPtr hjb_policy(const HjbGrid& grid);

void save_hjb_grid(const HjbGrid& grid, const std::string& path);
HjbGrid load_hjb_grid(const std::string& path);

// Node gradient of a scalar field (central differences, one-sided at the
// boundary); out has n_nodes*d entries.
void node_gradient(std::span<const double> field, std::span<const int> shape, double domain,
                   std::span<double> out);

}  // namespace fishctl
