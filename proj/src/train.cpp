#include "fishctl/train.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "fishctl/rng.hpp"

namespace fishctl {

namespace {

struct PathWork {
  std::vector<double> states;    // (M+1)*d
  std::vector<double> controls;  // M*d
  std::vector<NetWorkspace> ws;  // one per step
  std::vector<double> gX, gXn, gu, dxnet;
};

// Forward simulation with the network policy plus (optionally) exact
// reverse-mode gradient accumulation into dtheta. The cost accumulation
// mirrors model::simulate term for term (see model.hpp for the
// conventions), so batch_loss equals the MC cost of a NetworkPolicy.
double path_cost(const PolicyNet& net, const ModelConfig& cfg, std::span<const double> theta,
                 const TrainSample& s, std::span<double> dtheta, PathWork& w) {
  const int d = cfg.d;
  const int M = cfg.steps;
  const double h = cfg.h();
  const bool want_grad = !dtheta.empty();

  w.states.resize(static_cast<size_t>(M + 1) * d);
  w.controls.resize(static_cast<size_t>(M) * d);
  if (want_grad) w.ws.resize(static_cast<size_t>(M));
  std::copy(s.x0.begin(), s.x0.end(), w.states.begin());

  NetWorkspace scratch;
  for (int m = 0; m < M; ++m) {
    const double* x = w.states.data() + static_cast<size_t>(m) * d;
    double* u = w.controls.data() + static_cast<size_t>(m) * d;
    NetWorkspace& ws = want_grad ? w.ws[static_cast<size_t>(m)] : scratch;
    net.forward(theta, {x, static_cast<size_t>(d)}, m * h, {u, static_cast<size_t>(d)}, ws);
    double* xn = w.states.data() + static_cast<size_t>(m + 1) * d;
    for (int i = 0; i < d; ++i) {
      double kx = 0.0;
      for (int j = 0; j < d; ++j) kx += cfg.kappa_at(i, j) * x[j];
      xn[i] = x[i] * (1.0 + (cfg.r[i] - u[i] - kx) * h + cfg.sigma[i] * s.noise.at(m, i));
      if (!std::isfinite(xn[i])) throw SimulationDiverged(m + 1);
    }
  }

  double tracking = 0.0, quota = 0.0, variation = 0.0;
  for (int m = 1; m <= M; ++m) {
    const double* xm = w.states.data() + static_cast<size_t>(m) * d;
    for (int i = 0; i < d; ++i) {
      const double e = xm[i] - cfg.x_desired[i];
      tracking += e * e;
    }
    const double* um = w.controls.data() + static_cast<size_t>(std::min(m, M - 1)) * d;
    for (int i = 0; i < d; ++i) quota += cfg.alpha[i] * um[i];
  }
  for (int m = 1; m < M; ++m) {
    const double* a = w.controls.data() + static_cast<size_t>(m) * d;
    const double* b = w.controls.data() + static_cast<size_t>(m - 1) * d;
    for (int i = 0; i < d; ++i) {
      const double du = a[i] - b[i];
      variation += du * du;
    }
  }
  const double cost = h * tracking - h * quota + cfg.beta * variation;
  if (!want_grad) return cost;

  // Backpropagation through time.
  w.gX.assign(static_cast<size_t>(d), 0.0);
  w.gXn.assign(static_cast<size_t>(d), 0.0);
  w.gu.assign(static_cast<size_t>(d), 0.0);
  w.dxnet.assign(static_cast<size_t>(d), 0.0);
  {
    const double* xM = w.states.data() + static_cast<size_t>(M) * d;
    for (int i = 0; i < d; ++i) w.gX[static_cast<size_t>(i)] = 2.0 * h * (xM[i] - cfg.x_desired[i]);
  }
  for (int m = M - 1; m >= 0; --m) {
    const double* x = w.states.data() + static_cast<size_t>(m) * d;
    const double* u = w.controls.data() + static_cast<size_t>(m) * d;

    // direct dJ/du^m: quota weight (how many cost steps reference u^m) and
    // the variation coupling to the neighbouring controls
    const int qw = (m >= 1 && m <= M - 1 ? 1 : 0) + (m == M - 1 ? 1 : 0);
    for (int i = 0; i < d; ++i) {
      double gu = -h * cfg.alpha[i] * qw;
      if (m >= 1) {
        const double* b = w.controls.data() + static_cast<size_t>(m - 1) * d;
        gu += 2.0 * cfg.beta * (u[i] - b[i]);
      }
      if (m + 1 <= M - 1) {
        const double* a = w.controls.data() + static_cast<size_t>(m + 1) * d;
        gu -= 2.0 * cfg.beta * (a[i] - u[i]);
      }
      gu += w.gX[static_cast<size_t>(i)] * (-h * x[i]);  // via the dynamics
      w.gu[static_cast<size_t>(i)] = gu;
    }

    // state sensitivity through the Euler step
    for (int j = 0; j < d; ++j) {
      double kx = 0.0;
      for (int k = 0; k < d; ++k) kx += cfg.kappa_at(j, k) * x[k];
      const double A = 1.0 + (cfg.r[j] - u[j] - kx) * h + cfg.sigma[j] * s.noise.at(m, j);
      double acc = w.gX[static_cast<size_t>(j)] * A;
      for (int i = 0; i < d; ++i) acc -= h * w.gX[static_cast<size_t>(i)] * x[i] * cfg.kappa_at(i, j);
      w.gXn[static_cast<size_t>(j)] = acc;
    }

    net.backward(theta, w.ws[static_cast<size_t>(m)], w.gu, dtheta, w.dxnet);
    for (int j = 0; j < d; ++j) {
      double acc = w.gXn[static_cast<size_t>(j)] + w.dxnet[static_cast<size_t>(j)];
      if (m >= 1) acc += 2.0 * h * (x[j] - cfg.x_desired[j]);
      w.gX[static_cast<size_t>(j)] = acc;
    }
  }
  return cost;
}

void check_finite(std::span<const double> theta) {
  for (double v : theta)
    if (!std::isfinite(v)) throw std::invalid_argument("network parameters are non-finite");
}

}  // namespace

TrainBatch sample_batch(const ModelConfig& cfg, const TrainConfig& tc, uint64_t seed, int n) {
  TrainBatch batch(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    const uint64_t sk = substream(seed, static_cast<uint64_t>(k));
    NormalRng rng(sk);
    auto& s = batch[static_cast<size_t>(k)];
    s.x0.resize(static_cast<size_t>(cfg.d));
    for (int i = 0; i < cfg.d; ++i)
      s.x0[static_cast<size_t>(i)] = tc.x0_lo + (tc.x0_hi - tc.x0_lo) * rng.uniform();
    s.noise = make_noise(cfg, substream(sk, 1));
  }
  return batch;
}

double batch_loss(const PolicyNet& net, const ModelConfig& cfg, std::span<const double> theta,
                  const TrainBatch& batch, int threads) {
  check_finite(theta);
  const int K = static_cast<int>(batch.size());
  if (K < 1) throw std::invalid_argument("batch_loss: empty batch");
  std::vector<double> costs(static_cast<size_t>(K));
  std::exception_ptr error;
  auto run = [&](int lo, int hi) {
    try {
      PathWork w;
      for (int k = lo; k < hi; ++k)
        costs[static_cast<size_t>(k)] = path_cost(net, cfg, theta, batch[static_cast<size_t>(k)], {}, w);
    } catch (...) {
      error = std::current_exception();
    }
  };
  if (threads <= 1 || K == 1) {
    run(0, K);
  } else {
    const int n = std::min(threads, K);
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(run, K * t / n, K * (t + 1) / n);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  double mean = 0.0;
  for (double c : costs) mean += c;
  return mean / K;
}

double batch_grad(const PolicyNet& net, const ModelConfig& cfg, std::span<const double> theta,
                  const TrainBatch& batch, std::span<double> grad, int threads) {
  check_finite(theta);
  const int K = static_cast<int>(batch.size());
  if (K < 1) throw std::invalid_argument("batch_grad: empty batch");
  if (grad.size() != net.param_count()) throw std::invalid_argument("batch_grad: gradient size");

  std::vector<double> costs(static_cast<size_t>(K));
  const int n = (threads <= 1 || K == 1) ? 1 : std::min(threads, K);
  std::vector<std::vector<double>> partials(static_cast<size_t>(n));
  std::exception_ptr error;
  auto run = [&](int t, int lo, int hi) {
    try {
      auto& acc = partials[static_cast<size_t>(t)];
      acc.assign(net.param_count(), 0.0);
      PathWork w;
      for (int k = lo; k < hi; ++k)
        costs[static_cast<size_t>(k)] = path_cost(net, cfg, theta, batch[static_cast<size_t>(k)], acc, w);
    } catch (...) {
      error = std::current_exception();
    }
  };
  if (n == 1) {
    run(0, 0, K);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(run, t, K * t / n, K * (t + 1) / n);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  std::fill(grad.begin(), grad.end(), 0.0);
  for (const auto& acc : partials)  // ordered reduction
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += acc[i];
  for (auto& g : grad) g /= K;
  double mean = 0.0;
  for (double c : costs) mean += c;
  return mean / K;
}

TrainResult train_adam(const NetSpec& spec, const ModelConfig& cfg, const TrainConfig& tc) {
  PolicyNet net(spec);
  const std::size_t N = net.param_count();
  TrainResult res;
  res.theta = net.init_params(tc.seed);

  const TrainBatch eval_batch =
      sample_batch(cfg, tc, substream(tc.seed, 0xEEBBULL), tc.eval_batch);
  std::vector<double> best_theta = res.theta;
  double best = batch_loss(net, cfg, res.theta, eval_batch, tc.threads);
  res.eval_history.push_back(best);

  std::vector<double> g(N), p(N, 0.0), q(N, 0.0);
  double pow_m1 = 1.0, pow_m2 = 1.0;
  for (int it = 1; it <= tc.iters; ++it) {
    const TrainBatch batch =
        sample_batch(cfg, tc, substream(tc.seed, static_cast<uint64_t>(it)), tc.batch);
    const double loss = batch_grad(net, cfg, res.theta, batch, g, tc.threads);
    if (!std::isfinite(loss))
      throw std::runtime_error("train_adam: non-finite loss at iteration " + std::to_string(it));
    res.loss_history.push_back(loss);
    double gn = 0.0;
    for (double v : g) gn += v * v;
    res.grad_norms.push_back(std::sqrt(gn));

    pow_m1 *= tc.adam_m1;
    pow_m2 *= tc.adam_m2;
    for (std::size_t i = 0; i < N; ++i) {
      p[i] = tc.adam_m1 * p[i] + (1.0 - tc.adam_m1) * g[i];
      q[i] = tc.adam_m2 * q[i] + (1.0 - tc.adam_m2) * g[i] * g[i];
      const double p_hat = p[i] / (1.0 - pow_m1);
      const double q_hat = q[i] / (1.0 - pow_m2);
      res.theta[i] -= tc.adam_step * p_hat / (std::sqrt(q_hat) + tc.adam_eps);
    }

    if (it % tc.eval_every == 0 || it == tc.iters) {
      const double e = batch_loss(net, cfg, res.theta, eval_batch, tc.threads);
      res.eval_history.push_back(e);
      if (e < best) {
        best = e;
        best_theta = res.theta;
      }
    }
    res.iterations = it;
  }
  res.final_theta = res.theta;
  res.theta = std::move(best_theta);
  res.best_eval = best;
  return res;
}

TrainResult train_cg(const NetSpec& spec, const ModelConfig& cfg, const TrainConfig& tc) {
  if (spec.hidden.size() != 1)
    throw std::invalid_argument("train_cg: requires exactly one hidden layer");
  PolicyNet net(spec);
  const std::size_t N = net.param_count();
  TrainResult res;
  res.theta = net.init_params(tc.seed);

  const TrainBatch batch = sample_batch(cfg, tc, substream(tc.seed, 0xCC66ULL), tc.batch);

  std::vector<double> g(N), g_new(N), dir(N), trial(N);
  double f = batch_grad(net, cfg, res.theta, batch, g, tc.threads);
  std::vector<double> best_theta = res.theta;
  double best = f;
  res.loss_history.push_back(f);
  for (std::size_t i = 0; i < N; ++i) dir[i] = -g[i];
  {
    double gn = 0.0;
    for (double v : g) gn += v * v;
    res.grad_norms.push_back(std::sqrt(gn));
  }

  bool steepest = true;
  for (int it = 1; it <= tc.cg_iters; ++it) {
    double gd = 0.0;
    for (std::size_t i = 0; i < N; ++i) gd += g[i] * dir[i];
    if (gd >= 0.0) {  // not a descent direction: restart
      for (std::size_t i = 0; i < N; ++i) dir[i] = -g[i];
      steepest = true;
      gd = 0.0;
      for (std::size_t i = 0; i < N; ++i) gd += g[i] * dir[i];
      if (gd >= 0.0) break;  // zero gradient
    }

    double t = tc.init_step;
    double f_try = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int halv = 0; halv <= tc.max_halvings; ++halv) {
      for (std::size_t i = 0; i < N; ++i) trial[i] = res.theta[i] + t * dir[i];
      bool finite_trial = true;
      try {
        f_try = batch_loss(net, cfg, trial, batch, tc.threads);
      } catch (const SimulationDiverged&) {
        finite_trial = false;
      }
      if (finite_trial && std::isfinite(f_try) && f_try <= f + tc.armijo_c * t * gd) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      if (steepest) break;  // stuck even on steepest descent: return best-so-far
      for (std::size_t i = 0; i < N; ++i) dir[i] = -g[i];
      steepest = true;
      continue;
    }

    res.theta.swap(trial);
    const double f_new = batch_grad(net, cfg, res.theta, batch, g_new, tc.threads);
    res.loss_history.push_back(f_new);
    double gn = 0.0, gg = 0.0, gy = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      gn += g_new[i] * g_new[i];
      gg += g[i] * g[i];
      gy += g_new[i] * (g_new[i] - g[i]);
    }
    res.grad_norms.push_back(std::sqrt(gn));
    if (f_new < best) {
      best = f_new;
      best_theta = res.theta;
    }

    double beta_pr = gg > 0.0 ? std::max(0.0, gy / gg) : 0.0;
    if (it % static_cast<int>(std::min<std::size_t>(N, 1000)) == 0) beta_pr = 0.0;
    for (std::size_t i = 0; i < N; ++i) dir[i] = -g_new[i] + beta_pr * dir[i];
    steepest = beta_pr == 0.0;
    g.swap(g_new);
    f = f_new;
    res.iterations = it;
  }
  res.eval_history = res.loss_history;
  res.final_theta = res.theta;
  res.theta = std::move(best_theta);
  res.best_eval = best;
  return res;
}

}  // namespace fishctl
