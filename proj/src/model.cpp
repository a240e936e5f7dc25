#include "fishctl/model.hpp"

#include <cmath>
#include <thread>

#include "fishctl/rng.hpp"

namespace fishctl {

NoisePath make_noise(const ModelConfig& cfg, uint64_t seed, bool common) {
  NoisePath np;
  np.steps = cfg.steps;
  np.d = cfg.d;
  np.seed = seed;
  np.increments.resize(static_cast<size_t>(cfg.steps) * cfg.d);
  NormalRng rng(seed);
  const double sqh = std::sqrt(cfg.h());
  for (int m = 0; m < cfg.steps; ++m) {
    if (common) {
      const double z = sqh * rng.normal();
      for (int i = 0; i < cfg.d; ++i) np.increments[static_cast<size_t>(m) * cfg.d + i] = z;
    } else {
      for (int i = 0; i < cfg.d; ++i)
        np.increments[static_cast<size_t>(m) * cfg.d + i] = sqh * rng.normal();
    }
  }
  return np;
}

void drift(const ModelConfig& cfg, std::span<const double> x, std::span<const double> u,
           std::span<double> out) {
  const auto n = static_cast<size_t>(cfg.d);
  if (x.size() != n || u.size() != n || out.size() != n)
    throw std::invalid_argument("drift: dimension mismatch");
  for (int i = 0; i < cfg.d; ++i) {
    double kx = 0.0;
    for (int j = 0; j < cfg.d; ++j) kx += cfg.kappa_at(i, j) * x[j];
    out[i] = x[i] * (cfg.r[i] - u[i] - kx);
  }
}

void euler_step(const ModelConfig& cfg, std::span<const double> x, std::span<const double> u,
                std::span<const double> z, double h, std::span<double> out) {
  const auto n = static_cast<size_t>(cfg.d);
  if (x.size() != n || u.size() != n || z.size() != n || out.size() != n)
    throw std::invalid_argument("euler_step: dimension mismatch");
  for (int i = 0; i < cfg.d; ++i) {
    double kx = 0.0;
    for (int j = 0; j < cfg.d; ++j) kx += cfg.kappa_at(i, j) * x[j];
    out[i] = x[i] * (1.0 + (cfg.r[i] - u[i] - kx) * h + cfg.sigma[i] * z[i]);
  }
}

Trajectory simulate(const ModelConfig& cfg, const PolicyField& policy,
                    std::span<const double> x0, const NoisePath& noise) {
  const int d = cfg.d;
  const int M = cfg.steps;
  if (noise.steps != M || noise.d != d)
    throw std::invalid_argument("simulate: noise path shape does not match config");
  if (x0.size() != static_cast<size_t>(d)) throw std::invalid_argument("simulate: x0 length");
  if (policy.dim() != d) throw std::invalid_argument("simulate: policy dimension mismatch");

  Trajectory traj;
  traj.d = d;
  traj.steps = M;
  traj.states.resize(static_cast<size_t>(M + 1) * d);
  traj.controls.resize(static_cast<size_t>(M) * d);

  const double h = cfg.h();
  std::copy(x0.begin(), x0.end(), traj.states.begin());

  std::vector<double> u(static_cast<size_t>(d));
  for (int m = 0; m < M; ++m) {
    std::span<const double> xm{traj.states.data() + static_cast<size_t>(m) * d,
                               static_cast<size_t>(d)};
    policy.evaluate(xm, m * h, u);
    for (int i = 0; i < d; ++i) traj.controls[static_cast<size_t>(m) * d + i] = u[i];
    std::span<const double> zm{noise.increments.data() + static_cast<size_t>(m) * d,
                               static_cast<size_t>(d)};
    std::span<double> xn{traj.states.data() + static_cast<size_t>(m + 1) * d,
                         static_cast<size_t>(d)};
    euler_step(cfg, xm, u, zm, h, xn);
    for (int i = 0; i < d; ++i)
      if (!std::isfinite(xn[i])) throw SimulationDiverged(m + 1);
  }

  // Cost accumulation; see model.hpp for the index conventions.
  double tracking = 0.0, quota = 0.0, variation = 0.0;
  for (int m = 1; m <= M; ++m) {
    auto xm = traj.state(m);
    for (int i = 0; i < d; ++i) {
      const double e = xm[i] - cfg.x_desired[i];
      tracking += e * e;
    }
    auto um = traj.control(std::min(m, M - 1));
    for (int i = 0; i < d; ++i) quota += cfg.alpha[i] * um[i];
  }
  for (int m = 1; m < M; ++m) {
    auto a = traj.control(m);
    auto b = traj.control(m - 1);
    for (int i = 0; i < d; ++i) {
      const double du = a[i] - b[i];
      variation += du * du;
    }
  }
  traj.cost_tracking = h * tracking;
  traj.cost_quota = -h * quota;
  traj.cost_variation = cfg.beta * variation;
  traj.total_cost = traj.cost_tracking + traj.cost_quota + traj.cost_variation;
  return traj;
}

double qv_penalty(const ModelConfig& cfg, const Trajectory& traj) {
  double variation = 0.0;
  for (int m = 1; m < traj.steps; ++m) {
    auto a = traj.control(m);
    auto b = traj.control(m - 1);
    for (int i = 0; i < traj.d; ++i) {
      const double du = a[i] - b[i];
      variation += du * du;
    }
  }
  return cfg.beta * variation;
}

McCost mc_cost(const ModelConfig& cfg, const PolicyField& policy, std::span<const double> x0,
               std::span<const uint64_t> seeds, int threads, bool common_noise) {
  const int K = static_cast<int>(seeds.size());
  if (K < 1) throw std::invalid_argument("mc_cost: need at least one seed");
  std::vector<double> costs(static_cast<size_t>(K));
  std::exception_ptr error;

  auto run_range = [&](int lo, int hi) {
    try {
      for (int k = lo; k < hi; ++k) {
        NoisePath np = make_noise(cfg, substream(seeds[k], static_cast<uint64_t>(k)), common_noise);
        costs[static_cast<size_t>(k)] = simulate(cfg, policy, x0, np).total_cost;
      }
    } catch (...) {
      error = std::current_exception();
    }
  };

  if (threads <= 1 || K == 1) {
    run_range(0, K);
  } else {
    const int n = std::min(threads, K);
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) {
      const int lo = K * t / n, hi = K * (t + 1) / n;
      pool.emplace_back(run_range, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  // Ordered reduction: the mean is identical regardless of thread count.
  double mean = 0.0;
  for (double c : costs) mean += c;
  mean /= K;
  double var = 0.0;
  for (double c : costs) var += (c - mean) * (c - mean);
  McCost out;
  out.mean = mean;
  out.stderr_ = K > 1 ? std::sqrt(var / (K - 1)) / std::sqrt(static_cast<double>(K)) : 0.0;
  out.samples = K;
  return out;
}

double negative_fraction(const ModelConfig& cfg, const PolicyField& policy,
                         std::span<const double> x0, uint64_t seed, int n_paths) {
  int bad = 0;
  for (int k = 0; k < n_paths; ++k) {
    NoisePath np = make_noise(cfg, substream(seed, static_cast<uint64_t>(k)));
    try {
      Trajectory traj = simulate(cfg, policy, x0, np);
      bool neg = false;
      for (double x : traj.states)
        if (x < 0.0) neg = true;
      if (neg) ++bad;
    } catch (const SimulationDiverged&) {
      ++bad;
    }
  }
  return static_cast<double>(bad) / n_paths;
}

}  // namespace fishctl
