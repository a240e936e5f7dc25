#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fishctl/config.hpp"
#include "fishctl/tsv.hpp"

using namespace fishctl;

TEST_CASE("config round-trips through text") {
  ModelConfig cfg;
  cfg.d = 3;
  cfg.r = {2.0, 2.1, 1.9};
  cfg.kappa = {1.2, -0.1, 0.0, 0.2, 1.2, 0.0, 0.1, 0.1, 1.0};
  cfg.sigma = {0.1, 0.1, 0.1};
  cfg.alpha = {0.01, 0.02, 0.01};
  cfg.x_desired = {1.0, 1.0, 1.0};
  cfg.beta = 0.05;
  cfg.steps = 80;
  ModelConfig back = config_from_string(config_to_string(cfg));
  CHECK(back.d == cfg.d);
  CHECK(back.r == cfg.r);
  CHECK(back.kappa == cfg.kappa);
  CHECK(back.alpha == cfg.alpha);
  CHECK(back.beta == cfg.beta);
  CHECK(back.steps == cfg.steps);
}

TEST_CASE("config scalars broadcast and bad input throws") {
  ModelConfig cfg = config_from_string("d = 3\nsigma = 0.2\nkappa = 1.5\n");
  CHECK(cfg.sigma == std::vector<double>{0.2, 0.2, 0.2});
  CHECK(cfg.kappa[0] == 1.5);
  CHECK(cfg.kappa[1] == 0.0);
  CHECK(cfg.kappa[4] == 1.5);
  CHECK_THROWS(config_from_string("sigma = 0.1\n"));            // missing d
  CHECK_THROWS(config_from_string("d = 2\nr = 1 2 3\n"));       // wrong length
  CHECK_THROWS(config_from_string("d = 1\nu_min = 0\n"));       // bound violation
  CHECK_THROWS(config_from_string("d = 1\nhorizon = -1\n"));
}

TEST_CASE("trajectory TSV has a row per step with controls") {
  ModelConfig cfg;
  cfg.steps = 4;
  cfg.horizon = 0.16;
  ConstantPolicy pol({0.8}, cfg.u_min, cfg.u_max);
  const double x0[1] = {0.9};
  Trajectory traj = simulate(cfg, pol, {x0, 1}, make_noise(cfg, 9));
  const std::string path = "test_traj.tsv";
  write_trajectory_tsv(cfg, traj, path);
  std::ifstream f(path);
  std::string line;
  int rows = 0, cols_first = 0;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    double v;
    int cols = 0;
    while (is >> v) ++cols;
    if (rows == 0) cols_first = cols;
    ++rows;
  }
  CHECK(rows == cfg.steps + 1);
  CHECK(cols_first == 3);  // time, x, u
  std::remove(path.c_str());
}

TEST_CASE("surface TSV round-trips exactly") {
  Surface s;
  s.xs = {0.0, 1.5, 3.0};
  s.ts = {0.0, 1.0};
  s.values = {0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  const std::string path = "test_surface.tsv";
  write_surface_tsv(s, path);
  Surface back = read_surface_tsv(path);
  CHECK(back.xs == s.xs);
  CHECK(back.ts == s.ts);
  CHECK(back.values == s.values);
  std::remove(path.c_str());
}

TEST_CASE("policy surfaces sample the right slice") {
  ConstantPolicy pol({0.6, 0.9}, 0.5, 1.0);
  Surface s = sample_policy_surface(pol, 0, {0.0, 1.0}, 1, 3.0, 2.0, 4, 2);
  CHECK(s.xs.size() == 5);
  CHECK(s.ts.size() == 3);
  for (double v : s.values) CHECK(v == 0.9);
  CHECK_THROWS(sample_policy_surface(pol, 2, {0.0, 1.0}, 0, 3.0, 2.0, 4, 2));
}

TEST_CASE("cost tables carry failures inline") {
  std::vector<CostCell> table(2);
  table[0].policy = "sdp";
  table[0].x0 = {0.7};
  table[0].mean = 0.123;
  table[0].stderr_ = 0.004;
  table[0].ok = true;
  table[1].policy = "nn";
  table[1].x0 = {0.7};
  table[1].error = "diverged";
  const std::string path = "test_cost.tsv";
  write_cost_table_tsv(table, path);
  std::ifstream f(path);
  std::string all((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  CHECK(all.find("sdp\t0.123") != std::string::npos);
  CHECK(all.find("nan\tnan\t# diverged") != std::string::npos);
  std::remove(path.c_str());
}
