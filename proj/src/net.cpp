#include "fishctl/net.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "fishctl/rng.hpp"

namespace fishctl {

std::vector<int> NetSpec::widths() const {
  std::vector<int> w;
  w.push_back(d + 1);
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(d);
  return w;
}

void NetSpec::validate() const {
  if (d < 1) throw std::invalid_argument("net: d must be >= 1");
  for (int h : hidden)
    if (h < 1) throw std::invalid_argument("net: hidden widths must be >= 1");
  if (!(domain > 0.0) || !(horizon > 0.0))
    throw std::invalid_argument("net: normalization scales must be positive");
  if (!(u_min < u_max)) throw std::invalid_argument("net: u_min must be < u_max");
}

PolicyNet::PolicyNet(NetSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  widths_ = spec_.widths();
  const int L = static_cast<int>(widths_.size()) - 1;  // layer count
  a_off_.push_back(0);
  act_size_ = static_cast<std::size_t>(widths_[0]);
  for (int l = 0; l < L; ++l) {
    w_off_.push_back(n_params_);
    n_params_ += static_cast<std::size_t>(widths_[l + 1]) * widths_[l];
    b_off_.push_back(n_params_);
    n_params_ += static_cast<std::size_t>(widths_[l + 1]);
    a_off_.push_back(act_size_);
    act_size_ += static_cast<std::size_t>(widths_[l + 1]);
  }
}

std::vector<double> PolicyNet::init_params(uint64_t seed) const {
  std::vector<double> theta(n_params_);
  NormalRng rng(splitmix64(seed));
  const int L = static_cast<int>(widths_.size()) - 1;
  for (int l = 0; l < L; ++l) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(widths_[l]));
    const std::size_t nw = static_cast<std::size_t>(widths_[l + 1]) * widths_[l];
    for (std::size_t k = 0; k < nw; ++k)
      theta[w_off_[l] + k] = (2.0 * rng.uniform() - 1.0) * scale;
    for (int k = 0; k < widths_[l + 1]; ++k) theta[b_off_[l] + k] = 0.0;
  }
  return theta;
}

void PolicyNet::forward(std::span<const double> theta, std::span<const double> x, double t,
                        std::span<double> u, NetWorkspace& ws) const {
  ws.act.resize(act_size_);
  double* a = ws.act.data();
  for (int i = 0; i < spec_.d; ++i) a[i] = x[i] / spec_.domain;
  a[spec_.d] = t / spec_.horizon;

  const int L = static_cast<int>(widths_.size()) - 1;
  for (int l = 0; l < L; ++l) {
    const double* in = ws.act.data() + a_off_[l];
    double* out = ws.act.data() + a_off_[l + 1];
    const double* W = theta.data() + w_off_[l];
    const double* b = theta.data() + b_off_[l];
    const int ni = widths_[l], no = widths_[l + 1];
    for (int i = 0; i < no; ++i) {
      double z = b[i];
      const double* row = W + static_cast<std::size_t>(i) * ni;
      for (int j = 0; j < ni; ++j) z += row[j] * in[j];
      out[i] = sigmoid(z);
    }
  }
  const double* last = ws.act.data() + a_off_[L];
  const double range = spec_.u_max - spec_.u_min;
  for (int i = 0; i < spec_.d; ++i) u[i] = spec_.u_min + range * last[i];
}

void PolicyNet::backward(std::span<const double> theta, NetWorkspace& ws,
                         std::span<const double> du, std::span<double> dtheta,
                         std::span<double> dx) const {
  const int L = static_cast<int>(widths_.size()) - 1;
  ws.delta.resize(act_size_);
  const double range = spec_.u_max - spec_.u_min;
  {
    double* dl = ws.delta.data() + a_off_[L];
    const double* a = ws.act.data() + a_off_[L];
    for (int i = 0; i < spec_.d; ++i) dl[i] = du[i] * range * a[i] * (1.0 - a[i]);
  }
  for (int l = L - 1; l >= 0; --l) {
    const double* dz = ws.delta.data() + a_off_[l + 1];  // d/d(pre-sigmoid), already scaled
    const double* in = ws.act.data() + a_off_[l];
    const double* W = theta.data() + w_off_[l];
    const int ni = widths_[l], no = widths_[l + 1];
    double* dW = dtheta.data() + w_off_[l];
    double* db = dtheta.data() + b_off_[l];
    double* din = ws.delta.data() + a_off_[l];
    for (int j = 0; j < ni; ++j) din[j] = 0.0;
    for (int i = 0; i < no; ++i) {
      const double d_i = dz[i];
      db[i] += d_i;
      const double* row = W + static_cast<std::size_t>(i) * ni;
      double* drow = dW + static_cast<std::size_t>(i) * ni;
      for (int j = 0; j < ni; ++j) {
        drow[j] += d_i * in[j];
        din[j] += d_i * row[j];
      }
    }
    if (l > 0) {
      // convert d/d(activation) to d/d(pre-sigmoid) of the layer below
      for (int j = 0; j < ni; ++j) din[j] *= in[j] * (1.0 - in[j]);
    }
  }
  if (!dx.empty()) {
    const double* din = ws.delta.data();
    for (int i = 0; i < spec_.d; ++i) dx[i] = din[i] / spec_.domain;
  }
}

NetworkPolicy::NetworkPolicy(NetSpec spec, std::vector<double> theta)
    : net_(std::move(spec)), theta_(std::move(theta)) {
  if (theta_.size() != net_.param_count())
    throw std::invalid_argument("NetworkPolicy: parameter count mismatch");
  for (double v : theta_)
    if (!std::isfinite(v)) throw std::invalid_argument("NetworkPolicy: non-finite parameter");
}

void NetworkPolicy::evaluate(std::span<const double> x, double t, std::span<double> u) const {
  thread_local NetWorkspace ws;
  net_.forward(theta_, x, t, u, ws);
}

void save_checkpoint(const NetSpec& spec, std::span<const double> theta, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
  f << "nn-policy " << spec.d << " " << spec.hidden.size();
  for (int h : spec.hidden) f << " " << h;
  char buf[160];
  snprintf(buf, sizeof(buf), " %.17g %.17g %.17g %.17g %zu\n", spec.domain, spec.horizon,
           spec.u_min, spec.u_max, theta.size());
  f << buf;
  f.write(reinterpret_cast<const char*>(theta.data()),
          static_cast<std::streamsize>(theta.size() * sizeof(double)));
}

std::pair<NetSpec, std::vector<double>> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string tag;
  NetSpec spec;
  std::size_t n_hidden = 0, n_params = 0;
  f >> tag >> spec.d >> n_hidden;
  if (tag != "nn-policy" || !f) throw std::runtime_error("not a checkpoint file: " + path);
  spec.hidden.resize(n_hidden);
  for (auto& h : spec.hidden) f >> h;
  f >> spec.domain >> spec.horizon >> spec.u_min >> spec.u_max >> n_params;
  f.get();  // newline
  PolicyNet net(spec);
  if (n_params != net.param_count())
    throw std::runtime_error("checkpoint parameter count mismatch: " + path);
  std::vector<double> theta(n_params);
  f.read(reinterpret_cast<char*>(theta.data()),
         static_cast<std::streamsize>(n_params * sizeof(double)));
  if (!f) throw std::runtime_error("truncated checkpoint file: " + path);
  return {spec, std::move(theta)};
}

void export_params_tsv(const NetSpec& spec, std::span<const double> theta,
                       const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write parameter export: " + path);
  const auto widths = spec.widths();
  char buf[64];
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int ni = widths[l], no = widths[l + 1];
    for (int i = 0; i < no; ++i)
      for (int j = 0; j < ni; ++j) {
        snprintf(buf, sizeof(buf), "%zu\t%d\t%d\t%.17g\n", l, i, j, theta[off++]);
        f << buf;
      }
    for (int i = 0; i < no; ++i) {
      snprintf(buf, sizeof(buf), "%zu\t%d\tbias\t%.17g\n", l, i, theta[off++]);
      f << buf;
    }
  }
}

}  // namespace fishctl
