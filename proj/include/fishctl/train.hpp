#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fishctl/config.hpp"
#include "fishctl/model.hpp"
#include "fishctl/net.hpp"

namespace fishctl {

struct TrainSample {
  std::vector<double> x0;
  NoisePath noise;
};
using TrainBatch = std::vector<TrainSample>;

struct TrainConfig {
  int batch = 64;
  int iters = 2000;
  // ADAM step-1 constants
  double adam_step = 0.001;
  double adam_m1 = 0.9;
  double adam_m2 = 0.999;
  double adam_eps = 1e-8;
  // initial-state sampler: uniform on [x0_lo, x0_hi]^d
  double x0_lo = 0.2;
  double x0_hi = 2.0;
  uint64_t seed = 1;
  int eval_every = 10;
  int eval_batch = 100;
  int threads = 1;
  // nonlinear CG
  int cg_iters = 60;
  double armijo_c = 1e-4;
  int max_halvings = 40;
  double init_step = 1.0;
};

struct TrainResult {
  std::vector<double> theta;         // best parameters under the eval batch
  std::vector<double> final_theta;   // last iterate
  std::vector<double> loss_history;  // per-iteration training loss
  std::vector<double> eval_history;  // eval loss at each evaluation point
  std::vector<double> grad_norms;    // |g| per iteration (CG fills this)
  double best_eval = 0.0;
  int iterations = 0;
};

// Samples `n` (x0, noise) pairs; sample k draws from substream(seed, k).
TrainBatch sample_batch(const ModelConfig& cfg, const TrainConfig& tc, uint64_t seed, int n);

// Mean pathwise cost over the batch: identical to model::simulate's cost
// functional with the network as feedback policy.
double batch_loss(const PolicyNet& net, const ModelConfig& cfg, std::span<const double> theta,
                  const TrainBatch& batch, int threads = 1);

// Exact reverse-mode gradient of batch_loss through the Euler recursion
// (backpropagation through time). Returns the loss; writes the gradient.
double batch_grad(const PolicyNet& net, const ModelConfig& cfg, std::span<const double> theta,
                  const TrainBatch& batch, std::span<double> grad, int threads = 1);

TrainResult train_adam(const NetSpec& spec, const ModelConfig& cfg, const TrainConfig& tc);

// Full-batch Polak-Ribiere nonlinear CG with Armijo backtracking; requires
// exactly one hidden layer.
TrainResult train_cg(const NetSpec& spec, const ModelConfig& cfg, const TrainConfig& tc);

}  // namespace fishctl
