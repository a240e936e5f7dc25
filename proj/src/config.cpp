#include "fishctl/config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace fishctl {

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("ModelConfig: " + msg); };
  if (d < 1) fail("d must be >= 1");
  const auto n = static_cast<size_t>(d);
  if (r.size() != n) fail("r must have length d");
  if (kappa.size() != n * n) fail("kappa must be d*d");
  if (sigma.size() != n) fail("sigma must have length d");
  if (alpha.size() != n) fail("alpha must have length d");
  if (x_desired.size() != n) fail("x_desired must have length d");
  if (!(horizon > 0.0)) fail("horizon must be > 0");
  if (steps < 1) fail("steps must be >= 1");
  if (samples < 1) fail("samples must be >= 1");
  if (!(u_min > 0.0) || !(u_min <= u_max)) fail("need 0 < u_min <= u_max");
  if (beta < 0.0) fail("beta must be >= 0");
  for (int i = 0; i < d; ++i) {
    if (sigma[i] < 0.0) fail("sigma entries must be >= 0");
    if (!(r[i] > 0.0)) fail("r entries must be > 0");
    if (!(x_desired[i] > 0.0)) fail("x_desired entries must be > 0");
    if (!(kappa_at(i, i) > 0.0)) fail("kappa diagonal entries must be > 0");
  }
}

namespace {

std::vector<double> parse_numbers(const std::string& s, const std::string& key) {
  std::istringstream is(s);
  std::vector<double> out;
  double v;
  while (is >> v) out.push_back(v);
  if (out.empty()) throw std::invalid_argument("config: no value for key '" + key + "'");
  return out;
}

void write_vector(std::ostream& os, const std::string& key, const std::vector<double>& v) {
  os << key << " =";
  char buf[32];
  for (double x : v) {
    snprintf(buf, sizeof(buf), " %.17g", x);
    os << buf;
  }
  os << "\n";
}

}  // namespace

std::string config_to_string(const ModelConfig& cfg) {
  std::ostringstream os;
  os << "d = " << cfg.d << "\n";
  write_vector(os, "r", cfg.r);
  write_vector(os, "kappa", cfg.kappa);
  write_vector(os, "sigma", cfg.sigma);
  write_vector(os, "alpha", cfg.alpha);
  write_vector(os, "beta", {cfg.beta});
  write_vector(os, "x_desired", cfg.x_desired);
  write_vector(os, "horizon", {cfg.horizon});
  write_vector(os, "u_min", {cfg.u_min});
  write_vector(os, "u_max", {cfg.u_max});
  os << "steps = " << cfg.steps << "\n";
  os << "samples = " << cfg.samples << "\n";
  return os.str();
}

ModelConfig config_from_string(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    key.erase(0, key.find_first_not_of(" \t"));
    key.erase(key.find_last_not_of(" \t") + 1);
    if (key.empty()) throw std::invalid_argument("config: empty key");
    kv[key] = line.substr(eq + 1);
  }

  ModelConfig cfg;
  auto have = [&](const std::string& k) { return kv.count(k) != 0; };
  auto scalar = [&](const std::string& k) {
    auto v = parse_numbers(kv.at(k), k);
    if (v.size() != 1) throw std::invalid_argument("config: key '" + k + "' expects one value");
    return v[0];
  };
  if (!have("d")) throw std::invalid_argument("config: missing key 'd'");
  cfg.d = static_cast<int>(scalar("d"));
  if (cfg.d < 1) throw std::invalid_argument("config: d must be >= 1");

  // Scalars broadcast to all species for the per-species vectors.
  auto vec = [&](const std::string& k, std::vector<double> dflt) {
    if (!have(k)) return dflt;
    auto v = parse_numbers(kv.at(k), k);
    if (v.size() == 1) v.assign(static_cast<size_t>(cfg.d), v[0]);
    return v;
  };
  cfg.r = vec("r", std::vector<double>(cfg.d, 2.0));
  cfg.sigma = vec("sigma", std::vector<double>(cfg.d, 0.1));
  cfg.alpha = vec("alpha", std::vector<double>(cfg.d, 0.01));
  cfg.x_desired = vec("x_desired", std::vector<double>(cfg.d, 1.0));
  if (have("kappa")) {
    auto v = parse_numbers(kv.at("kappa"), "kappa");
    if (v.size() == 1 && cfg.d > 1) {
      // scalar kappa = that value on the diagonal
      std::vector<double> m(static_cast<size_t>(cfg.d) * cfg.d, 0.0);
      for (int i = 0; i < cfg.d; ++i) m[static_cast<size_t>(i) * cfg.d + i] = v[0];
      v = std::move(m);
    }
    cfg.kappa = std::move(v);
  } else {
    cfg.kappa.assign(static_cast<size_t>(cfg.d) * cfg.d, 0.0);
    for (int i = 0; i < cfg.d; ++i) cfg.kappa[static_cast<size_t>(i) * cfg.d + i] = 1.2;
  }
  if (have("beta")) cfg.beta = scalar("beta");
  if (have("horizon")) cfg.horizon = scalar("horizon");
  if (have("u_min")) cfg.u_min = scalar("u_min");
  if (have("u_max")) cfg.u_max = scalar("u_max");
  if (have("steps")) cfg.steps = static_cast<int>(scalar("steps"));
  if (have("samples")) cfg.samples = static_cast<int>(scalar("samples"));
  cfg.validate();
  return cfg;
}

ModelConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return config_from_string(ss.str());
}

void save_config(const ModelConfig& cfg, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write config file: " + path);
  f << config_to_string(cfg);
}

}  // namespace fishctl
