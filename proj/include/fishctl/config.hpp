#pragma once

#include <string>
#include <vector>

namespace fishctl {

/// All model constants and discretization sizes for the controlled
/// multi-species logistic SDE
///   dX_i = X_i [ (r_i - u_i - (kappa X)_i) dt + sigma_i dW_i ].
struct ModelConfig {
  int d = 1;                              // species count
  std::vector<double> r = {2.0};          // growth rates, length d
  std::vector<double> kappa = {1.2};      // interaction matrix, d*d row-major
  std::vector<double> sigma = {0.1};      // diagonal volatilities, length d
  std::vector<double> alpha = {0.01};     // quota reward weights, length d
  double beta = 0.1;                      // quadratic-variation penalty
  std::vector<double> x_desired = {1.0};  // target biomass, length d
  double horizon = 2.0;                   // T
  double u_min = 0.5;
  double u_max = 1.0;
  int steps = 50;    // M
  int samples = 100; // K

  double h() const { return horizon / steps; }

  // Throws std::invalid_argument on dimension mismatch or parameter
  // violations (u_min > u_max, non-positive targets, ...).
  void validate() const;

  double kappa_at(int i, int j) const { return kappa[static_cast<size_t>(i) * d + j]; }
};

ModelConfig load_config(const std::string& path);
void save_config(const ModelConfig& cfg, const std::string& path);
std::string config_to_string(const ModelConfig& cfg);
ModelConfig config_from_string(const std::string& text);

}  // namespace fishctl
