#include <cmath>

#include "doctest.h"
#include "fishctl/assess.hpp"

using namespace fishctl;

namespace {

// 3-species interaction matrix used across the multi-species experiments
const std::vector<double> kKappa3 = {1.2, -0.1, 0.0, 0.2, 1.2, 0.0, 0.1, 0.1, 1.0};
const std::vector<double> kKappa5 = {
    1.2, -0.1, 0.0, 0.0,  -0.1,  //
    0.2, 1.2,  0.0, 0.0,  -0.1,  //
    0.0, 0.2,  1.2, -0.1, 0.0,   //
    0.0, 0.0,  0.1, 1.2,  0.0,   //
    0.1, 0.1,  0.0, 0.0,  1.2};

// unclamped 1D test policy v(y, t) = y (test-only; real policies clamp)
class IdentityPolicy final : public PolicyField {
 public:
  void evaluate(std::span<const double> x, double, std::span<double> u) const override {
    u[0] = x[0];
  }
  int dim() const override { return 1; }
  std::string backing() const override { return "test-identity"; }
};

// bang-bang 1D policy with switch at y = 1
class BangBang final : public PolicyField {
 public:
  void evaluate(std::span<const double> x, double, std::span<double> u) const override {
    u[0] = x[0] < 1.0 ? 0.5 : 1.0;
  }
  int dim() const override { return 1; }
  std::string backing() const override { return "test-bangbang"; }
};

ModelConfig cfg_nd(int d, const std::vector<double>& kappa) {
  ModelConfig cfg;
  cfg.d = d;
  cfg.r.assign(static_cast<size_t>(d), 2.0);
  cfg.sigma.assign(static_cast<size_t>(d), 0.1);
  cfg.alpha.assign(static_cast<size_t>(d), 0.01);
  cfg.x_desired.assign(static_cast<size_t>(d), 1.0);
  cfg.kappa = kappa;
  return cfg;
}

}  // namespace

TEST_CASE("matrix inverse and condition estimate") {
  const std::vector<double> a = {4.0, 7.0, 2.0, 6.0};
  const auto inv = mat_inverse(a, 2);
  CHECK(inv[0] == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(inv[1] == doctest::Approx(-0.7).epsilon(1e-14));
  CHECK(inv[2] == doctest::Approx(-0.2).epsilon(1e-14));
  CHECK(inv[3] == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(condition_estimate(a, 2) == doctest::Approx(11.0 * 1.3).epsilon(1e-12));
  const std::vector<double> sing = {1.0, 2.0, 2.0, 4.0};
  CHECK_THROWS(mat_inverse(sing, 2));
}

TEST_CASE("identity kappa lifts componentwise") {
  OracleSpec spec;
  spec.d = 3;
  spec.kappa = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  spec.one_d_policy = std::make_shared<IdentityPolicy>();
  auto pol = lift_policy(spec);
  const double x[3] = {0.3, 1.1, 2.4};
  double u[3];
  pol->evaluate({x, 3}, 0.0, {u, 3});
  CHECK(u[0] == 0.3);
  CHECK(u[1] == 1.1);
  CHECK(u[2] == 2.4);
}

TEST_CASE("3-species lift evaluates v at the kappa-scaled coordinates") {
  OracleSpec spec;
  spec.d = 3;
  spec.kappa = kKappa3;
  spec.one_d_policy = std::make_shared<IdentityPolicy>();
  auto pol = lift_policy(spec);
  const double x1 = 0.9;
  const double x[3] = {x1, 0.685, 0.839};
  double u[3];
  pol->evaluate({x, 3}, 0.0, {u, 3});
  CHECK(u[0] == doctest::Approx(1.2 * x1 - 0.1 * 0.685).epsilon(1e-14));
  CHECK(u[1] == doctest::Approx(0.2 * x1 + 1.2 * 0.685).epsilon(1e-14));
  CHECK(u[2] == doctest::Approx(0.1 * x1 + 0.1 * 0.685 + 0.839).epsilon(1e-14));
}

TEST_CASE("commutation is exact under common noise, broken by independent noise") {
  for (const auto& [d, kappa] : {std::pair<int, std::vector<double>>{3, kKappa3},
                                 {5, kKappa5}}) {
    CAPTURE(d);
    ModelConfig cfg = cfg_nd(d, kappa);
    OracleSpec spec;
    spec.d = d;
    spec.kappa = kappa;
    spec.one_d_policy = std::make_shared<BangBang>();
    spec.common_noise = true;
    CHECK(verify_commutation(cfg, spec, 0.8, 2024) < 1e-12);
    spec.common_noise = false;
    CHECK(verify_commutation(cfg, spec, 0.8, 2024) > 1e-3);
  }
}

TEST_CASE("commutation with zero volatility is deterministic") {
  ModelConfig cfg = cfg_nd(3, kKappa3);
  cfg.sigma.assign(3, 0.0);
  OracleSpec spec;
  spec.d = 3;
  spec.kappa = kKappa3;
  spec.one_d_policy = std::make_shared<BangBang>();
  spec.common_noise = true;
  CHECK(verify_commutation(cfg, spec, 1.3, 5) < 1e-13);
}

TEST_CASE("predicted thresholds satisfy (kappa X)_j = y* when substituted back") {
  const double fixed[3] = {0.0, 0.685, 0.839};
  auto th = predict_thresholds(kKappa3, 3, 0, {fixed, 3}, 1.0, 3.0);
  REQUIRE(th.size() == 3);
  for (int j = 0; j < 3; ++j) {
    REQUIRE(th[static_cast<size_t>(j)].slope != 0.0);
    double x[3] = {th[static_cast<size_t>(j)].location, 0.685, 0.839};
    double kx = 0.0;
    for (int k = 0; k < 3; ++k) kx += kKappa3[static_cast<size_t>(j) * 3 + k] * x[k];
    CHECK(kx == doctest::Approx(1.0).epsilon(1e-12));
  }
  // a zero coefficient flags the component constant on the slice
  auto th3 = predict_thresholds(kKappa3, 3, 2, {fixed, 3}, 1.0, 3.0);
  CHECK(th3[0].slope == 0.0);
  CHECK_FALSE(th3[0].has_switch);
  CHECK(th3[1].slope == 0.0);
  CHECK(th3[2].slope == 1.0);
}

TEST_CASE("compare_policies: CRN makes duplicates identical and order irrelevant") {
  ModelConfig cfg;
  auto lo = std::make_shared<ConstantPolicy>(std::vector<double>{0.6}, 0.5, 1.0);
  auto hi = std::make_shared<ConstantPolicy>(std::vector<double>{1.0}, 0.5, 1.0);
  std::vector<std::vector<double>> x0s = {{0.7}, {1.0}, {1.3}};

  auto t1 = compare_policies(cfg, {{"a", lo}, {"b", hi}, {"a2", lo}}, x0s, 40, 7);
  auto t2 = compare_policies(cfg, {{"b", hi}, {"a", lo}}, x0s, 40, 7);
  for (size_t i = 0; i < x0s.size(); ++i) {
    const auto& a = t1[i * 3 + 0];
    const auto& a2 = t1[i * 3 + 2];
    CHECK(a.mean == a2.mean);
    CHECK(a.stderr_ == a2.stderr_);
    // same cell, different table order
    CHECK(t1[i * 3 + 1].mean == t2[i * 2 + 0].mean);
    CHECK(a.mean == t2[i * 2 + 1].mean);
    CHECK(a.ok);
  }
}

TEST_CASE("compare_policies records per-cell failures without aborting") {
  ModelConfig cfg;
  auto good = std::make_shared<ConstantPolicy>(std::vector<double>{0.8}, 0.5, 1.0);
  auto wrong_dim = std::make_shared<ConstantPolicy>(std::vector<double>{0.8, 0.8}, 0.5, 1.0);
  auto table = compare_policies(cfg, {{"good", good}, {"bad", wrong_dim}}, {{1.0}}, 10, 3);
  CHECK(table[0].ok);
  CHECK_FALSE(table[1].ok);
  CHECK(!table[1].error.empty());
}
