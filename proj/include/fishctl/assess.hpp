#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fishctl/config.hpp"
#include "fishctl/model.hpp"

namespace fishctl {

/// Analytic lift of a 1D policy to d species through Y = kappa X.
struct OracleSpec {
  int d = 0;
  std::vector<double> kappa;  // d*d row-major, invertible
  PolicyPtr one_d_policy;     // v(y, t)
  double y_target = 1.0;
  bool common_noise = false;

  void validate() const;
};

// Gauss-Jordan inverse of a small dense matrix; throws on singularity.
std::vector<double> mat_inverse(std::span<const double> a, int n);

// Infinity-norm condition estimate |A| |A^-1|.
double condition_estimate(std::span<const double> a, int n);

// u_i(X, t) = v((kappa X)_i, t).
PolicyPtr lift_policy(const OracleSpec& spec);

// Simulates the d-dimensional system under the lifted policy with one
// shared Brownian path from X0 = kappa^-1 (y0 1), and the 1D system
// dy = y((r - y - v) dt + sigma dw) from y0 on the same path; returns
// max_{m,i} |(kappa X^m)_i - y^m|. Exact (up to roundoff) when
// spec.common_noise is set and sigma_i, r_i are equal; with independent
// noise the deviation is O(sqrt(h)) and the call measures it.
double verify_commutation(const ModelConfig& cfg, const OracleSpec& spec, double y0,
                          uint64_t seed);

struct Threshold {
  bool has_switch = false;  // crossing inside (0, domain)
  double location = 0.0;    // X_axis where (kappa X)_j = y*
  double slope = 0.0;       // kappa_{j,axis}
  double level = 0.0;       // (kappa X)_j contribution of the fixed coords
};

// Per control component j, solves (kappa X)_j = y_star for the coordinate
// `axis`, the others held at `fixed` (the axis entry of `fixed` is
// ignored). slope == 0 means the component is constant on the slice.
std::vector<Threshold> predict_thresholds(std::span<const double> kappa, int d, int axis,
                                          std::span<const double> fixed, double y_star,
                                          double domain);

struct CostCell {
  std::string policy;
  std::vector<double> x0;
  double mean = 0.0;
  double stderr_ = 0.0;
  bool ok = false;
  std::string error;
};

// Common-random-number MC cost table over (policy, x0) pairs; per-cell
// failures are recorded, not propagated.
std::vector<CostCell> compare_policies(const ModelConfig& cfg,
                                       const std::vector<std::pair<std::string, PolicyPtr>>& pols,
                                       const std::vector<std::vector<double>>& x0s, int K,
                                       uint64_t seed, int threads = 1);

}  // namespace fishctl
