#include "fishctl/sdp.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace fishctl {

double interp_row(std::span<const double> row, double domain, double x) {
  const int J = static_cast<int>(row.size()) - 1;
  const double dx = domain / J;
  int j = static_cast<int>(std::floor(x / dx));
  j = std::clamp(j, 0, J - 1);  // x > L extrapolates from the last segment
  const double s = (x - j * dx) / dx;
  return row[j] + s * (row[j + 1] - row[j]);
}

double stage_objective(const ModelConfig& cfg, double x, double u, std::span<const double> v_next,
                       std::span<const double> u_next, const QuantGrid& quant, double domain) {
  const double h = cfg.h();
  const double r = cfg.r[0], kap = cfg.kappa[0], sig = cfg.sigma[0];
  const double xd = cfg.x_desired[0];
  const double sqh = std::sqrt(h);

  const double adv = x - xd + h * x * (r - kap * x - u);
  double obj = h * (adv * adv + h * sig * x * sig * x) - h * cfg.alpha[0] * u;

  for (int q = 0; q < quant.order; ++q) {
    const double z = quant.node(q, 0);
    const double zeta = x * (1.0 + (r - u - kap * x) * h + sig * sqh * z);
    const double zc = std::max(zeta, 0.0);
    double term = interp_row(v_next, domain, zc);
    if (!u_next.empty()) {
      const double du = interp_row(u_next, domain, zc) - u;
      term += cfg.beta * du * du;
    }
    obj += quant.weights[q] * term;
  }
  return obj;
}

std::pair<double, double> dichotomic_min(const std::function<double(double)>& f, double lo,
                                         double hi, int iters) {
  const double invphi = 0.6180339887498948482045868;
  double a = lo, b = hi;
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iters; ++i) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = f(x2);
    }
  }
  double best_x = 0.5 * (a + b);
  double best_f = f(best_x);
  // The optima here are often at or near the bounds; check both endpoints.
  const double f_lo = f(lo), f_hi = f(hi);
  if (f_hi < best_f) {
    best_x = hi;
    best_f = f_hi;
  }
  if (f_lo <= best_f) {
    best_x = lo;
    best_f = f_lo;
  }
  return {best_x, best_f};
}

ValueControlGrid sdp_solve(const ModelConfig& cfg, const SdpOptions& opts, const QuantGrid& quant) {
  cfg.validate();
  if (cfg.d != 1)
    throw std::invalid_argument("sdp_solve: only d=1 is supported (the control search is scalar)");
  if (quant.dim != 1) throw std::invalid_argument("sdp_solve: quadrature grid must be 1D");

  const int J = opts.grid_points;
  const int M = cfg.steps;
  ValueControlGrid g;
  g.grid_points = J;
  g.domain = opts.domain;
  g.time_steps = M;
  g.horizon = cfg.horizon;
  g.u_min = cfg.u_min;
  g.u_max = cfg.u_max;
  g.values.assign(static_cast<size_t>(M + 1) * (J + 1), 0.0);
  g.controls.assign(static_cast<size_t>(M) * (J + 1), 0.0);

  for (int m = M - 1; m >= 0; --m) {
    const auto v_next = g.value_row(m + 1);
    // At m = M-1 the next control row is the convention u^{M} := u, so the
    // variation term vanishes; signalled by an empty span.
    const std::span<const double> u_next =
        m + 1 < M ? g.control_row(m + 1) : std::span<const double>{};
    for (int j = 0; j <= J; ++j) {
      const double x = opts.domain * j / J;
      auto objective = [&](double u) {
        return stage_objective(cfg, x, u, v_next, u_next, quant, opts.domain);
      };
      double best_u, best_f;
      if (opts.control_levels > 0) {
        const int n = opts.control_levels;
        best_u = cfg.u_min;
        best_f = objective(best_u);
        for (int k = 1; k < n; ++k) {
          const double u = n == 1 ? cfg.u_min : cfg.u_min + (cfg.u_max - cfg.u_min) * k / (n - 1);
          const double fu = objective(u);
          if (fu < best_f) {
            best_f = fu;
            best_u = u;
          }
        }
      } else {
        std::tie(best_u, best_f) = dichotomic_min(objective, cfg.u_min, cfg.u_max, opts.golden_iters);
      }
      g.controls[static_cast<size_t>(m) * (J + 1) + j] = best_u;
      g.values[static_cast<size_t>(m) * (J + 1) + j] = best_f;
    }
  }
  return g;
}

namespace {

class SdpGridPolicy final : public PolicyField {
 public:
  explicit SdpGridPolicy(ValueControlGrid grid) : grid_(std::move(grid)) {}

  void evaluate(std::span<const double> x, double t, std::span<double> u) const override {
    const double h = grid_.horizon / grid_.time_steps;
    int m = static_cast<int>(std::floor(t / h));
    m = std::clamp(m, 0, grid_.time_steps - 1);
    const double v = interp_row(grid_.control_row(m), grid_.domain, std::max(x[0], 0.0));
    u[0] = clamp_control(v, grid_.u_min, grid_.u_max);
  }
  int dim() const override { return 1; }
  std::string backing() const override { return "grid-interpolated"; }

 private:
  ValueControlGrid grid_;
};

}  // namespace

PolicyPtr sdp_policy(const ValueControlGrid& grid) {
  return std::make_shared<SdpGridPolicy>(grid);
}

void save_sdp_grid(const ValueControlGrid& g, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write sdp grid: " + path);
  f << "sdp-grid " << g.grid_points << " " << g.time_steps << "\n";
  char buf[32];
  auto num = [&](double v, char sep) {
    snprintf(buf, sizeof(buf), "%.17g%c", v, sep);
    f << buf;
  };
  num(g.domain, ' ');
  num(g.horizon, ' ');
  num(g.u_min, ' ');
  num(g.u_max, '\n');
  for (double v : g.values) num(v, '\n');
  for (double v : g.controls) num(v, '\n');
}

ValueControlGrid load_sdp_grid(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open sdp grid: " + path);
  std::string tag;
  ValueControlGrid g;
  f >> tag >> g.grid_points >> g.time_steps >> g.domain >> g.horizon >> g.u_min >> g.u_max;
  if (tag != "sdp-grid" || !f) throw std::runtime_error("not an sdp grid file: " + path);
  g.values.resize(static_cast<size_t>(g.time_steps + 1) * (g.grid_points + 1));
  g.controls.resize(static_cast<size_t>(g.time_steps) * (g.grid_points + 1));
  for (auto& v : g.values) f >> v;
  for (auto& v : g.controls) f >> v;
  if (!f) throw std::runtime_error("truncated sdp grid file: " + path);
  return g;
}

}  // namespace fishctl
