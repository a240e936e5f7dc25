#include "fishctl/assess.hpp"

#include <cmath>
#include <stdexcept>

#include "fishctl/rng.hpp"

namespace fishctl {

void OracleSpec::validate() const {
  if (d < 1) throw std::invalid_argument("oracle: d must be >= 1");
  if (kappa.size() != static_cast<size_t>(d) * d)
    throw std::invalid_argument("oracle: kappa must be d*d");
  if (!one_d_policy || one_d_policy->dim() != 1)
    throw std::invalid_argument("oracle: needs a one-dimensional policy");
  mat_inverse(kappa, d);  // throws if singular
}

std::vector<double> mat_inverse(std::span<const double> a, int n) {
  std::vector<double> m(a.begin(), a.end());
  std::vector<double> inv(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) inv[static_cast<size_t>(i) * n + i] = 1.0;
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(m[static_cast<size_t>(r) * n + col]) >
          std::abs(m[static_cast<size_t>(piv) * n + col]))
        piv = r;
    if (std::abs(m[static_cast<size_t>(piv) * n + col]) < 1e-14)
      throw std::invalid_argument("mat_inverse: singular matrix");
    if (piv != col)
      for (int c = 0; c < n; ++c) {
        std::swap(m[static_cast<size_t>(piv) * n + c], m[static_cast<size_t>(col) * n + c]);
        std::swap(inv[static_cast<size_t>(piv) * n + c], inv[static_cast<size_t>(col) * n + c]);
      }
    const double p = m[static_cast<size_t>(col) * n + col];
    for (int c = 0; c < n; ++c) {
      m[static_cast<size_t>(col) * n + c] /= p;
      inv[static_cast<size_t>(col) * n + c] /= p;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = m[static_cast<size_t>(r) * n + col];
      if (f == 0.0) continue;
      for (int c = 0; c < n; ++c) {
        m[static_cast<size_t>(r) * n + c] -= f * m[static_cast<size_t>(col) * n + c];
        inv[static_cast<size_t>(r) * n + c] -= f * inv[static_cast<size_t>(col) * n + c];
      }
    }
  }
  return inv;
}

double condition_estimate(std::span<const double> a, int n) {
  auto norm_inf = [n](std::span<const double> m) {
    double best = 0.0;
    for (int i = 0; i < n; ++i) {
      double row = 0.0;
      for (int j = 0; j < n; ++j) row += std::abs(m[static_cast<size_t>(i) * n + j]);
      best = std::max(best, row);
    }
    return best;
  };
  const auto inv = mat_inverse(a, n);
  return norm_inf(a) * norm_inf(inv);
}

namespace {

class LiftedPolicy final : public PolicyField {
 public:
  explicit LiftedPolicy(OracleSpec spec) : spec_(std::move(spec)) {}

  void evaluate(std::span<const double> x, double t, std::span<double> u) const override {
    double y[1], v[1];
    for (int i = 0; i < spec_.d; ++i) {
      double yi = 0.0;
      for (int j = 0; j < spec_.d; ++j)
        yi += spec_.kappa[static_cast<size_t>(i) * spec_.d + j] * x[j];
      y[0] = yi;
      spec_.one_d_policy->evaluate({y, 1}, t, {v, 1});
      u[i] = v[0];
    }
  }
  int dim() const override { return spec_.d; }
  std::string backing() const override { return "kappa-lift"; }

 private:
  OracleSpec spec_;
};

}  // namespace

PolicyPtr lift_policy(const OracleSpec& spec) {
  spec.validate();
  return std::make_shared<LiftedPolicy>(spec);
}

double verify_commutation(const ModelConfig& cfg, const OracleSpec& spec, double y0,
                          uint64_t seed) {
  // The deviation is zero (up to roundoff) only under common noise; running
  // with spec.common_noise unset measures how fast independent noise breaks
  // the commutation.
  spec.validate();
  if (cfg.d != spec.d) throw std::invalid_argument("verify_commutation: dimension mismatch");
  for (int i = 1; i < cfg.d; ++i)
    if (cfg.sigma[i] != cfg.sigma[0] || cfg.r[i] != cfg.r[0])
      throw std::invalid_argument("verify_commutation: sigma_i and r_i must be equal");
  if (cfg.kappa != spec.kappa)
    throw std::invalid_argument("verify_commutation: config kappa differs from oracle kappa");

  const auto inv = mat_inverse(spec.kappa, spec.d);
  std::vector<double> x0(static_cast<size_t>(cfg.d));
  for (int i = 0; i < cfg.d; ++i) {
    double acc = 0.0;
    for (int j = 0; j < cfg.d; ++j) acc += inv[static_cast<size_t>(i) * cfg.d + j] * y0;
    x0[static_cast<size_t>(i)] = acc;
  }

  const NoisePath noise = make_noise(cfg, seed, spec.common_noise);
  const auto lifted = lift_policy(spec);
  const Trajectory traj_d = simulate(cfg, *lifted, x0, noise);

  // 1D reference: unit self-interaction, same scalar noise.
  ModelConfig cfg1;
  cfg1.d = 1;
  cfg1.r = {cfg.r[0]};
  cfg1.kappa = {1.0};
  cfg1.sigma = {cfg.sigma[0]};
  cfg1.alpha = {cfg.alpha[0]};
  cfg1.beta = cfg.beta;
  cfg1.x_desired = {spec.y_target};
  cfg1.horizon = cfg.horizon;
  cfg1.u_min = cfg.u_min;
  cfg1.u_max = cfg.u_max;
  cfg1.steps = cfg.steps;
  NoisePath noise1;
  noise1.steps = cfg.steps;
  noise1.d = 1;
  noise1.seed = seed;
  noise1.increments.resize(static_cast<size_t>(cfg.steps));
  for (int m = 0; m < cfg.steps; ++m) noise1.increments[static_cast<size_t>(m)] = noise.at(m, 0);
  const double y0v[1] = {y0};
  const Trajectory traj_1 = simulate(cfg1, *spec.one_d_policy, {y0v, 1}, noise1);

  double dev = 0.0;
  for (int m = 0; m <= cfg.steps; ++m) {
    const auto xm = traj_d.state(m);
    const double ym = traj_1.state(m)[0];
    for (int i = 0; i < cfg.d; ++i) {
      double yi = 0.0;
      for (int j = 0; j < cfg.d; ++j)
        yi += spec.kappa[static_cast<size_t>(i) * cfg.d + j] * xm[j];
      dev = std::max(dev, std::abs(yi - ym));
    }
  }
  return dev;
}

std::vector<Threshold> predict_thresholds(std::span<const double> kappa, int d, int axis,
                                          std::span<const double> fixed, double y_star,
                                          double domain) {
  if (axis < 0 || axis >= d) throw std::invalid_argument("predict_thresholds: bad axis");
  if (kappa.size() != static_cast<size_t>(d) * d || fixed.size() != static_cast<size_t>(d))
    throw std::invalid_argument("predict_thresholds: shape mismatch");
  std::vector<Threshold> out(static_cast<size_t>(d));
  for (int j = 0; j < d; ++j) {
    Threshold& th = out[static_cast<size_t>(j)];
    th.slope = kappa[static_cast<size_t>(j) * d + axis];
    th.level = 0.0;
    for (int k = 0; k < d; ++k)
      if (k != axis) th.level += kappa[static_cast<size_t>(j) * d + k] * fixed[k];
    if (th.slope != 0.0) {
      th.location = (y_star - th.level) / th.slope;
      th.has_switch = th.location > 0.0 && th.location < domain;
    }
  }
  return out;
}

std::vector<CostCell> compare_policies(const ModelConfig& cfg,
                                       const std::vector<std::pair<std::string, PolicyPtr>>& pols,
                                       const std::vector<std::vector<double>>& x0s, int K,
                                       uint64_t seed, int threads) {
  if (pols.empty()) throw std::invalid_argument("compare_policies: no policies");
  std::vector<uint64_t> seeds(static_cast<size_t>(K), seed);
  std::vector<CostCell> table;
  for (const auto& x0 : x0s) {
    for (const auto& [name, pol] : pols) {
      CostCell cell;
      cell.policy = name;
      cell.x0 = x0;
      try {
        const McCost mc = mc_cost(cfg, *pol, x0, seeds, threads);
        cell.mean = mc.mean;
        cell.stderr_ = mc.stderr_;
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      table.push_back(std::move(cell));
    }
  }
  return table;
}

}  // namespace fishctl
