#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "fishctl/sdp.hpp"

using namespace fishctl;

namespace {

// Naive recursion over node values: no tables, no memoization; continuation
// evaluated by recursing into the bracketing nodes of the advected point.
// Structurally an exhaustive enumeration of level sequences.
double naive_value(const ModelConfig& cfg, const SdpOptions& opts, int levels, int m, int j) {
  if (m == cfg.steps) return 0.0;
  const double h = cfg.h();
  const double L = opts.domain;
  const int J = opts.grid_points;
  const double x = L * j / J;
  double best = 1e300;
  for (int k = 0; k < levels; ++k) {
    const double u = cfg.u_min + (cfg.u_max - cfg.u_min) * k / (levels - 1);
    const double adv = x - cfg.x_desired[0] + h * x * (cfg.r[0] - cfg.kappa[0] * x - u);
    double cost = h * (adv * adv + h * cfg.sigma[0] * x * cfg.sigma[0] * x) - h * cfg.alpha[0] * u;
    // continuation at the drifted point (sigma = 0 path), linear between
    // bracketing nodes with the same clamping/extrapolation rule
    const double zeta = std::max(x * (1.0 + (cfg.r[0] - u - cfg.kappa[0] * x) * h), 0.0);
    const double dx = L / J;
    int jj = static_cast<int>(std::floor(zeta / dx));
    jj = std::min(std::max(jj, 0), J - 1);
    const double s = (zeta - jj * dx) / dx;
    const double v0 = naive_value(cfg, opts, levels, m + 1, jj);
    const double v1 = naive_value(cfg, opts, levels, m + 1, jj + 1);
    cost += v0 + s * (v1 - v0);
    best = std::min(best, cost);
  }
  return best;
}

}  // namespace

TEST_CASE("interp_row is exact for linear data and extrapolates past L") {
  std::vector<double> row = {1.0, 3.0, 5.0, 7.0};  // 2x + 1 on [0,3]
  CHECK(interp_row(row, 3.0, 0.0) == 1.0);
  CHECK(interp_row(row, 3.0, 1.25) == doctest::Approx(3.5).epsilon(1e-15));
  CHECK(interp_row(row, 3.0, 3.0) == 7.0);
  CHECK(interp_row(row, 3.0, 3.5) == doctest::Approx(8.0).epsilon(1e-15));  // extrapolation
}

TEST_CASE("dichotomic search finds interior and boundary minima") {
  auto quad = [](double u) { return (u - 0.73) * (u - 0.73) + 0.2; };
  auto [xi, fi] = dichotomic_min(quad, 0.5, 1.0, 60);
  // locating a quadratic minimum is limited to ~sqrt(machine eps)
  CHECK(xi == doctest::Approx(0.73).epsilon(1e-6));
  CHECK(fi == doctest::Approx(0.2).epsilon(1e-12));

  auto inc = [](double u) { return 3.0 * u; };
  auto [xl, fl] = dichotomic_min(inc, 0.5, 1.0, 60);
  CHECK(xl == 0.5);  // boundary returned exactly
  CHECK(fl == 1.5);

  auto dec = [](double u) { return -u; };
  auto [xh, fh] = dichotomic_min(dec, 0.5, 1.0, 60);
  CHECK(xh == 1.0);
  CHECK(fh == -1.0);
}

TEST_CASE("stage objective matches a hand-expanded expression") {
  ModelConfig cfg;
  cfg.steps = 10;  // h = 0.2
  QuantGrid q = generate_1d(2);
  std::vector<double> v_next = {0.0, 0.1, 0.4, 0.9, 1.6};  // J = 4
  std::vector<double> u_next = {0.5, 0.6, 0.7, 0.8, 0.9};
  const double x = 1.5, u = 0.7, L = 3.0;
  const double h = 0.2, sqh = std::sqrt(h);

  const double adv = x - 1.0 + h * x * (2.0 - 1.2 * x - u);
  double expected = h * (adv * adv + h * 0.1 * x * 0.1 * x) - h * 0.01 * u;
  for (int k = 0; k < 2; ++k) {
    const double zeta = x * (1.0 + (2.0 - u - 1.2 * x) * h + 0.1 * sqh * q.nodes[k]);
    const double du = interp_row(u_next, L, zeta) - u;
    expected += q.weights[k] * (interp_row(v_next, L, zeta) + 0.1 * du * du);
  }
  CHECK(stage_objective(cfg, x, u, v_next, u_next, q, L) ==
        doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("level-restricted DP equals the naive exhaustive recursion") {
  ModelConfig cfg;
  cfg.sigma = {0.0};
  cfg.beta = 0.0;
  cfg.alpha = {0.0};
  cfg.steps = 2;
  cfg.horizon = 2.0 * 2 / 50;  // keep h at the reference value
  SdpOptions opts;
  opts.grid_points = 4;
  opts.control_levels = 5;
  QuantGrid q = generate_1d(1);  // sigma = 0: one node suffices
  ValueControlGrid g = sdp_solve(cfg, opts, q);
  for (int j = 0; j <= opts.grid_points; ++j) {
    const double ref = naive_value(cfg, opts, 5, 0, j);
    CHECK(g.value_row(0)[j] == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("backward recursion produces bounded controls and zero terminal value") {
  ModelConfig cfg;
  SdpOptions opts;
  QuantGrid q = generate_1d(11);
  ValueControlGrid g = sdp_solve(cfg, opts, q);
  for (double v : g.value_row(cfg.steps)) CHECK(v == 0.0);
  for (double u : g.controls) {
    CHECK(u >= cfg.u_min);
    CHECK(u <= cfg.u_max);
  }
  // far above the target the quota should be maximal at t = 0
  const auto u0 = g.control_row(0);
  CHECK(u0[opts.grid_points] == doctest::Approx(cfg.u_max).epsilon(1e-6));
  // near the target the value is tiny (the alpha quota reward can push it
  // slightly negative); far from it the tracking term dominates
  CHECK(std::abs(g.value_row(0)[13]) < 0.05);  // X = 0.975
  CHECK(g.value_row(0)[0] > 0.5);              // X = 0 is absorbed, tracking accrues

}

TEST_CASE("sdp policy interpolates the control rows") {
  ModelConfig cfg;
  SdpOptions opts;
  QuantGrid q = generate_1d(5);
  ValueControlGrid g = sdp_solve(cfg, opts, q);
  auto pol = sdp_policy(g);
  const double dx = opts.domain / opts.grid_points;
  const double x[1] = {dx * 10.5};
  double u[1];
  pol->evaluate({x, 1}, 0.0, {u, 1});
  const auto row = g.control_row(0);
  CHECK(u[0] == doctest::Approx(0.5 * (row[10] + row[11])).epsilon(1e-12));
}

TEST_CASE("sdp grid files round-trip") {
  ModelConfig cfg;
  cfg.steps = 5;
  SdpOptions opts;
  opts.grid_points = 8;
  QuantGrid q = generate_1d(5);
  ValueControlGrid g = sdp_solve(cfg, opts, q);
  const std::string path = "test_sdp_grid.txt";
  save_sdp_grid(g, path);
  ValueControlGrid h = load_sdp_grid(path);
  CHECK(h.grid_points == g.grid_points);
  CHECK(h.time_steps == g.time_steps);
  CHECK(h.values == g.values);
  CHECK(h.controls == g.controls);
  std::remove(path.c_str());
}
