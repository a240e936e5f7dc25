#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "fishctl/config.hpp"
#include "fishctl/policy.hpp"

namespace fishctl {

/// Pre-drawn Brownian increments for one sample path: M rows of d
/// increments, each sqrt(h) * N(0,1). With `common` set, all species share
/// one scalar increment per step (needed by the commutation oracle).
struct NoisePath {
  int steps = 0;
  int d = 0;
  uint64_t seed = 0;
  std::vector<double> increments;  // steps*d, row-major

  double at(int m, int i) const { return increments[static_cast<size_t>(m) * d + i]; }
};

NoisePath make_noise(const ModelConfig& cfg, uint64_t seed, bool common = false);

struct Trajectory {
  int d = 0;
  int steps = 0;
  std::vector<double> states;    // (M+1)*d
  std::vector<double> controls;  // M*d, controls[m] = policy(X^m, t^m)
  double cost_tracking = 0.0;
  double cost_quota = 0.0;
  double cost_variation = 0.0;
  double total_cost = 0.0;

  std::span<const double> state(int m) const {
    return {states.data() + static_cast<size_t>(m) * d, static_cast<size_t>(d)};
  }
  std::span<const double> control(int m) const {
    return {controls.data() + static_cast<size_t>(m) * d, static_cast<size_t>(d)};
  }
};

class SimulationDiverged : public std::runtime_error {
 public:
  SimulationDiverged(int step)
      : std::runtime_error("simulation produced a non-finite state at step " + std::to_string(step)),
        step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

// Componentwise X_i (r_i - u_i - (kappa X)_i).
void drift(const ModelConfig& cfg, std::span<const double> x, std::span<const double> u,
           std::span<double> out);

// One explicit Euler step: X . (1 + (r - u - kappa X) h + sigma . z).
// `z` is a raw Brownian increment (already scaled by sqrt(h)).
// No positivity projection: divergence is detected downstream, not clamped.
void euler_step(const ModelConfig& cfg, std::span<const double> x, std::span<const double> u,
                std::span<const double> z, double h, std::span<double> out);

// Simulates one path under a feedback policy and accumulates the cost
// functional shared by every solver:
//   tracking  = h     sum_{m=1..M} |X^m - X_d|^2
//   quota     = -h    sum_{m=1..M} alpha . u^{min(m, M-1)}
//   variation = beta  sum_{m=1..M-1} |u^m - u^{m-1}|^2
// (the last control is extended past the horizon, and the variation sum
// runs over all adjacent recorded pairs, including (u^0, u^1)).
Trajectory simulate(const ModelConfig& cfg, const PolicyField& policy,
                    std::span<const double> x0, const NoisePath& noise);

struct McCost {
  double mean = 0.0;
  double stderr_ = 0.0;
  int samples = 0;
};

// Monte-Carlo mean cost over the given seed list; identical seed lists give
// common random numbers across policies. threads > 1 parallelizes over
// paths (the result is independent of thread count: per-path seeds come
// from substream(seed_k)).
McCost mc_cost(const ModelConfig& cfg, const PolicyField& policy, std::span<const double> x0,
               std::span<const uint64_t> seeds, int threads = 1, bool common_noise = false);

// Discrete quadratic-variation penalty of a recorded trajectory,
// beta * sum |u^m - u^{m-1}|^2; exposed for diagnostics.
double qv_penalty(const ModelConfig& cfg, const Trajectory& traj);

// Fraction of `n_paths` sample paths from x0 that ever produce a negative
// component (reported, not asserted; expected 0 in practice).
double negative_fraction(const ModelConfig& cfg, const PolicyField& policy,
                         std::span<const double> x0, uint64_t seed, int n_paths);

}  // namespace fishctl
