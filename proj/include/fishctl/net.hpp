#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <string>
#include <vector>

#include "fishctl/policy.hpp"

namespace fishctl {

/// Fully connected feedforward policy network. Input is (X/L, t/T), every
/// layer applies a sigmoid, and the final activations are mapped affinely to
/// (u_min, u_max), so the output is always strictly feasible.
struct NetSpec {
  int d = 1;                     // species count (output width; input is d+1)
  std::vector<int> hidden;       // hidden layer widths
  double domain = 3.0;           // X normalization scale L
  double horizon = 2.0;          // t normalization scale T
  double u_min = 0.5, u_max = 1.0;

  int input_width() const { return d + 1; }
  std::vector<int> widths() const;  // d+1, hidden..., d
  void validate() const;
};

/// Per-evaluation activation storage, reusable across calls.
struct NetWorkspace {
  std::vector<double> act;    // concatenated layer activations incl. input
  std::vector<double> delta;  // scratch for backward
};

class PolicyNet {
 public:
  explicit PolicyNet(NetSpec spec);

  const NetSpec& spec() const { return spec_; }
  std::size_t param_count() const { return n_params_; }
  std::size_t activation_size() const { return act_size_; }

  // Centered uniform init with per-layer scale 1/sqrt(fan-in).
  std::vector<double> init_params(uint64_t seed) const;

  // u = squash(net(X/L, t/T)); activations are left in ws for backward.
  void forward(std::span<const double> theta, std::span<const double> x, double t,
               std::span<double> u, NetWorkspace& ws) const;

  // Reverse pass for the evaluation recorded in ws: given du = dJ/du,
  // accumulates (+=) into dtheta and, when non-empty, writes dJ/dX into dx.
  void backward(std::span<const double> theta, NetWorkspace& ws, std::span<const double> du,
                std::span<double> dtheta, std::span<double> dx) const;

 private:
  NetSpec spec_;
  std::vector<int> widths_;
  std::vector<std::size_t> w_off_, b_off_;  // per-layer offsets into theta
  std::vector<std::size_t> a_off_;          // per-layer offsets into ws.act
  std::size_t n_params_ = 0, act_size_ = 0;
};

class NetworkPolicy final : public PolicyField {
 public:
  NetworkPolicy(NetSpec spec, std::vector<double> theta);

  void evaluate(std::span<const double> x, double t, std::span<double> u) const override;
  int dim() const override { return net_.spec().d; }
  std::string backing() const override { return "network"; }

  const PolicyNet& net() const { return net_; }
  const std::vector<double>& theta() const { return theta_; }

 private:
  PolicyNet net_;
  std::vector<double> theta_;
};

// Checkpoint: one ASCII header line, then the flat parameters as
// little-endian doubles.
void save_checkpoint(const NetSpec& spec, std::span<const double> theta, const std::string& path);
std::pair<NetSpec, std::vector<double>> load_checkpoint(const std::string& path);

// Human-readable export: one `layer row col value` line per weight,
// `layer row bias value` per bias.
void export_params_tsv(const NetSpec& spec, std::span<const double> theta,
                       const std::string& path);

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace fishctl
