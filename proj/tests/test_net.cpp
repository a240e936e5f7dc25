#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "fishctl/net.hpp"
#include "fishctl/rng.hpp"
#include "fishctl/train.hpp"

using namespace fishctl;

namespace {

NetSpec spec_1d(std::vector<int> hidden) {
  NetSpec s;
  s.d = 1;
  s.hidden = std::move(hidden);
  return s;
}

}  // namespace

TEST_CASE("zero parameters give the midpoint control 0.75") {
  NetSpec s = spec_1d({8, 8});
  PolicyNet net(s);
  std::vector<double> theta(net.param_count(), 0.0);
  NetWorkspace ws;
  const double x[1] = {1.3};
  double u[1];
  net.forward(theta, {x, 1}, 0.7, {u, 1}, ws);
  CHECK(u[0] == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("outputs stay strictly inside the control bounds") {
  NetSpec s = spec_1d({16});
  PolicyNet net(s);
  auto theta = net.init_params(4);
  for (auto& t : theta) t *= 50.0;  // saturate the units
  NetWorkspace ws;
  double u[1];
  for (double x0 : {0.0, 0.5, 1.5, 3.0}) {
    const double x[1] = {x0};
    net.forward(theta, {x, 1}, 1.0, {u, 1}, ws);
    CHECK(u[0] > 0.5);
    CHECK(u[0] < 1.0);
  }
}

TEST_CASE("one-hidden-unit forward pass matches the hand computation") {
  NetSpec s = spec_1d({1});
  PolicyNet net(s);
  // layout: W0 (1x2), b0 (1), W1 (1x1), b1 (1)
  std::vector<double> theta = {0.3, -0.2, 0.1, 0.7, -0.4};
  NetWorkspace ws;
  const double x[1] = {0.9};
  double u[1];
  net.forward(theta, {x, 1}, 0.5, {u, 1}, ws);
  const double z0 = 0.3 * (0.9 / 3.0) - 0.2 * (0.5 / 2.0) + 0.1;
  const double a0 = 1.0 / (1.0 + std::exp(-z0));
  const double z1 = 0.7 * a0 - 0.4;
  const double expected = 0.5 + 0.5 / (1.0 + std::exp(-z1));
  CHECK(u[0] == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("BPTT gradient matches central finite differences") {
  ModelConfig cfg;
  cfg.steps = 8;
  cfg.horizon = 8.0 * 2 / 50;
  NetSpec s = spec_1d({5, 4});
  PolicyNet net(s);
  auto theta = net.init_params(11);
  TrainConfig tc;
  TrainBatch batch = sample_batch(cfg, tc, 77, 3);

  std::vector<double> g(net.param_count());
  batch_grad(net, cfg, theta, batch, g);

  NormalRng pick(123);
  const double eps = 1e-5;
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t i =
        static_cast<std::size_t>(pick.uniform() * static_cast<double>(net.param_count() - 1));
    auto tp = theta, tm = theta;
    tp[i] += eps;
    tm[i] -= eps;
    const double fd = (batch_loss(net, cfg, tp, batch) - batch_loss(net, cfg, tm, batch)) /
                      (2.0 * eps);
    const double scale = std::max({std::abs(fd), std::abs(g[i]), 1e-8});
    CHECK(std::abs(g[i] - fd) / scale < 1e-6);  // well inside the 1e-5 gate
  }
}

TEST_CASE("dead units have zero gradient upstream") {
  ModelConfig cfg;
  cfg.steps = 5;
  cfg.horizon = 0.2;
  NetSpec s = spec_1d({3});
  PolicyNet net(s);
  auto theta = net.init_params(2);
  // unit 1's outgoing weight lives in layer 1's W (1x3) at column 1
  const std::size_t w1_off = 3 * 2 + 3;  // after layer-0 W and b
  theta[w1_off + 1] = 0.0;
  TrainConfig tc;
  TrainBatch batch = sample_batch(cfg, tc, 5, 2);
  std::vector<double> g(net.param_count());
  batch_grad(net, cfg, theta, batch, g);
  // incoming weights of unit 1: layer-0 W rows are 2 wide
  CHECK(g[1 * 2 + 0] == 0.0);
  CHECK(g[1 * 2 + 1] == 0.0);
  // its bias too
  CHECK(g[3 * 2 + 1] == 0.0);
}

TEST_CASE("batch_loss equals the simulated cost of the same policy") {
  ModelConfig cfg;
  NetSpec s = spec_1d({6});
  PolicyNet net(s);
  auto theta = net.init_params(9);
  TrainConfig tc;
  TrainBatch batch = sample_batch(cfg, tc, 31, 4);
  const double loss = batch_loss(net, cfg, theta, batch);

  NetworkPolicy pol(s, theta);
  double mean = 0.0;
  for (const auto& sample : batch)
    mean += simulate(cfg, pol, sample.x0, sample.noise).total_cost;
  mean /= static_cast<double>(batch.size());
  CHECK(loss == doctest::Approx(mean).epsilon(1e-15));
}

TEST_CASE("batch operations are thread-count invariant") {
  ModelConfig cfg;
  cfg.steps = 10;
  cfg.horizon = 0.4;
  NetSpec s = spec_1d({8});
  PolicyNet net(s);
  auto theta = net.init_params(3);
  TrainConfig tc;
  TrainBatch batch = sample_batch(cfg, tc, 55, 16);
  CHECK(batch_loss(net, cfg, theta, batch, 1) == batch_loss(net, cfg, theta, batch, 4));
  std::vector<double> g1(net.param_count()), g4(net.param_count());
  batch_grad(net, cfg, theta, batch, g1, 1);
  batch_grad(net, cfg, theta, batch, g4, 4);
  // ordered reduction differs only in partial-sum grouping
  for (std::size_t i = 0; i < g1.size(); ++i)
    CHECK(g1[i] == doctest::Approx(g4[i]).epsilon(1e-12));
}

TEST_CASE("ADAM first step follows the bias-corrected update exactly") {
  ModelConfig cfg;
  cfg.steps = 6;
  cfg.horizon = 6.0 * 2 / 50;
  NetSpec s = spec_1d({4});
  PolicyNet net(s);
  TrainConfig tc;
  tc.iters = 1;
  tc.eval_every = 1;
  tc.batch = 4;
  tc.eval_batch = 4;
  tc.seed = 17;
  TrainResult res = train_adam(s, cfg, tc);

  auto theta0 = net.init_params(tc.seed);
  TrainBatch b1 = sample_batch(cfg, tc, substream(tc.seed, 1), tc.batch);
  std::vector<double> g(net.param_count());
  batch_grad(net, cfg, theta0, b1, g);
  for (std::size_t i = 0; i < theta0.size(); ++i) {
    // p_hat = g, q_hat = g^2 after bias correction at n = 1
    const double expect = theta0[i] - tc.adam_step * g[i] / (std::abs(g[i]) + tc.adam_eps);
    CHECK(res.final_theta[i] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("ADAM training is reproducible and tracks the best eval loss") {
  ModelConfig cfg;
  cfg.steps = 10;
  cfg.horizon = 0.4;
  NetSpec s = spec_1d({6});
  TrainConfig tc;
  tc.iters = 30;
  tc.batch = 8;
  tc.eval_batch = 8;
  tc.eval_every = 5;
  tc.seed = 99;
  TrainResult a = train_adam(s, cfg, tc);
  TrainResult b = train_adam(s, cfg, tc);
  CHECK(a.loss_history == b.loss_history);
  CHECK(a.theta == b.theta);
  CHECK(static_cast<int>(a.loss_history.size()) == tc.iters);
  for (double e : a.eval_history) CHECK(a.best_eval <= e);
}

TEST_CASE("CG decreases the loss monotonically across accepted steps") {
  ModelConfig cfg;
  NetSpec s = spec_1d({10});
  TrainConfig tc;
  tc.batch = 16;
  tc.cg_iters = 15;
  tc.seed = 7;
  TrainResult res = train_cg(s, cfg, tc);
  REQUIRE(res.loss_history.size() >= 2);
  for (std::size_t i = 1; i < res.loss_history.size(); ++i)
    CHECK(res.loss_history[i] <= res.loss_history[i - 1] + 1e-15);
  CHECK(res.grad_norms.back() < res.grad_norms.front());
  CHECK_THROWS(train_cg(spec_1d({4, 4}), cfg, tc));  // single hidden layer only
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  NetSpec s;
  s.d = 3;
  s.hidden = {5, 4};
  PolicyNet net(s);
  auto theta = net.init_params(21);
  const std::string path = "test_nn_ckpt.bin";
  save_checkpoint(s, theta, path);
  auto [s2, theta2] = load_checkpoint(path);
  CHECK(s2.d == 3);
  CHECK(s2.hidden == s.hidden);
  CHECK(theta2 == theta);
  std::remove(path.c_str());

  const std::string tsv = "test_nn_params.tsv";
  export_params_tsv(s, theta, tsv);
  FILE* f = fopen(tsv.c_str(), "r");
  REQUIRE(f);
  int lines = 0;
  for (int c; (c = fgetc(f)) != EOF;)
    if (c == '\n') ++lines;
  fclose(f);
  CHECK(lines == static_cast<int>(net.param_count()));
  std::remove(tsv.c_str());
}

TEST_CASE("non-finite parameters are rejected") {
  NetSpec s = spec_1d({2});
  PolicyNet net(s);
  std::vector<double> theta(net.param_count(), 0.0);
  theta[0] = std::nan("");
  CHECK_THROWS(NetworkPolicy(s, theta));
  ModelConfig cfg;
  TrainConfig tc;
  TrainBatch batch = sample_batch(cfg, tc, 1, 1);
  CHECK_THROWS(batch_loss(net, cfg, theta, batch));
}
