#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace fishctl {

/// Quadrature nodes and weights approximating a standard normal in `dim`
/// dimensions. Immutable after construction.
struct QuantGrid {
  int dim = 1;
  int order = 0;                // number of nodes
  std::vector<double> nodes;    // order*dim, row-major
  std::vector<double> weights;  // order

  double node(int q, int i) const { return nodes[static_cast<size_t>(q) * dim + i]; }
};

// Stationary (Lloyd) quantizer of N(0,1): each node is the conditional mean
// of its Voronoi cell, weights are cell probabilities. Deterministic
// fixed-point iteration from quantile-spaced initial nodes until max node
// movement < 1e-12 (at most 1e5 sweeps). Throws on non-convergence.
QuantGrid generate_1d(int order);

// d-fold tensor product of a 1D grid; weights multiply.
QuantGrid product_grid(const QuantGrid& g, int dim);

// TSV format, one row per node: d coordinates then the weight. '#' comments
// allowed. Weights off by < 1e-6 from 1 are renormalized, otherwise the
// file is rejected.
QuantGrid load_grid(const std::string& path);
void save_grid(const QuantGrid& g, const std::string& path);

// sum_q w_q f(z_q)
double expect(const QuantGrid& g, const std::function<double(std::span<const double>)>& f);

// Standard normal pdf/cdf (shared with the stationarity checks).
double normal_pdf(double z);
double normal_cdf(double z);

}  // namespace fishctl
