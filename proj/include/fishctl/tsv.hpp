#pragma once

#include <string>
#include <vector>

#include "fishctl/assess.hpp"
#include "fishctl/model.hpp"

namespace fishctl {

// `time x_1..x_d u_1..u_d` rows (the final row has no control columns).
void write_trajectory_tsv(const ModelConfig& cfg, const Trajectory& traj,
                          const std::string& path);

/// One scalar surface value(x, t) sampled on a rectangular sweep.
struct Surface {
  std::vector<double> xs;      // spatial samples
  std::vector<double> ts;      // time samples
  std::vector<double> values;  // ts.size() * xs.size(), scanlines by t
};

// `x t value` rows, scanlines ordered by t then x, blank line between
// scanlines (plot-tool friendly); round-trips through read_surface_tsv.
void write_surface_tsv(const Surface& s, const std::string& path);
Surface read_surface_tsv(const std::string& path);

// Cost table: `x0 policy mean stderr` (x0 joined with commas for d > 1);
// failed cells carry `nan nan # error`.
void write_cost_table_tsv(const std::vector<CostCell>& table, const std::string& path);

// Samples policy component `comp` on an (nx+1) x (nt+1) sweep of
// ([0,L] along `axis`, [0,T]); other coordinates held at `fixed`.
Surface sample_policy_surface(const PolicyField& policy, int axis, std::vector<double> fixed,
                              int comp, double domain, double horizon, int nx, int nt);

}  // namespace fishctl
