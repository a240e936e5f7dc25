#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "fishctl/assess.hpp"
#include "fishctl/config.hpp"
#include "fishctl/hjb.hpp"
#include "fishctl/model.hpp"
#include "fishctl/net.hpp"
#include "fishctl/quantize.hpp"
#include "fishctl/rng.hpp"
#include "fishctl/sdp.hpp"
#include "fishctl/train.hpp"
#include "fishctl/tsv.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace fishctl;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "fishctl 0.1.0";

struct RunContext {
  std::string command;
  std::string config_path;
  std::string outdir;
  uint64_t seed = 1;
  int threads = 1;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  std::vector<std::string> outputs;

  std::string out(const std::string& name) {
    fs::create_directories(outdir);
    std::string p = (fs::path(outdir) / name).string();
    outputs.push_back(p);
    return p;
  }
};

uint64_t fnv1a_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checksum: cannot open " + path);
  uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof(buf));
    for (std::streamsize i = 0; i < f.gcount(); ++i)
      h = (h ^ static_cast<unsigned char>(buf[i])) * 1099511628211ULL;
  }
  return h;
}

// Written last, atomically. In reproducible mode (--threads 1) the timing
// field is omitted so re-runs are byte-identical, manifest included.
void write_manifest(RunContext& ctx) {
  json m;
  m["tool"] = kVersion;
  m["command"] = ctx.command;
  m["config"] = ctx.config_path;
  m["seed"] = ctx.seed;
  m["threads"] = ctx.threads;
  m["output_dir"] = ctx.outdir;
  if (ctx.threads != 1) {
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - ctx.start)
                        .count();
    m["wall_clock_ms"] = ms;
  }
  json files = json::array();
  for (const auto& p : ctx.outputs) {
    char hex[24];
    snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(fnv1a_file(p)));
    files.push_back({{"path", fs::path(p).filename().string()}, {"fnv1a", hex}});
  }
  m["outputs"] = files;
  const fs::path final_path = fs::path(ctx.outdir) / "manifest.json";
  const fs::path tmp = final_path.string() + ".tmp";
  {
    std::ofstream f(tmp);
    f << m.dump(2) << "\n";
  }
  fs::rename(tmp, final_path);
}

std::vector<double> parse_x0(const std::string& s, int d) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
  if (v.size() == 1) v.assign(static_cast<size_t>(d), v[0]);
  if (v.size() != static_cast<size_t>(d))
    throw std::invalid_argument("x0 '" + s + "' needs 1 or " + std::to_string(d) + " values");
  return v;
}

PolicyPtr parse_policy(const std::string& spec, const ModelConfig& cfg) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("policy spec '" + spec +
                                "' (want const:u | sdp:file | hjb:file | nn:file | oracle:spec)");
  const std::string kind = spec.substr(0, colon);
  const std::string rest = spec.substr(colon + 1);
  if (kind == "const") {
    std::vector<double> u;
    std::stringstream ss(rest);
    std::string tok;
    while (std::getline(ss, tok, ',')) u.push_back(std::stod(tok));
    if (u.size() == 1) u.assign(static_cast<size_t>(cfg.d), u[0]);
    if (u.size() != static_cast<size_t>(cfg.d))
      throw std::invalid_argument("const policy needs 1 or d values");
    return std::make_shared<ConstantPolicy>(std::move(u), cfg.u_min, cfg.u_max);
  }
  if (kind == "sdp") return sdp_policy(load_sdp_grid(rest));
  if (kind == "hjb") return hjb_policy(load_hjb_grid(rest));
  if (kind == "nn") {
    auto [nspec, theta] = load_checkpoint(rest);
    return std::make_shared<NetworkPolicy>(std::move(nspec), std::move(theta));
  }
  if (kind == "oracle") {
    ModelConfig cfg1 = cfg;  // the inner policy is one-dimensional
    cfg1.d = 1;
    cfg1.r = {cfg.r[0]};
    cfg1.kappa = {1.0};
    cfg1.sigma = {cfg.sigma[0]};
    cfg1.alpha = {cfg.alpha[0]};
    cfg1.x_desired = {1.0};
    OracleSpec os;
    os.d = cfg.d;
    os.kappa = cfg.kappa;
    os.one_d_policy = parse_policy(rest, cfg1);
    os.common_noise = true;
    return lift_policy(os);
  }
  throw std::invalid_argument("unknown policy backing '" + kind + "'");
}

// u_i over (X_j, t), other coordinates at X_d, for every (i, j) pair; one
// file for d = 1, the 3x3-style panel set otherwise.
void emit_policy_surfaces(RunContext& ctx, const ModelConfig& cfg, const PolicyField& pol,
                          double domain, int nx, int nt) {
  for (int i = 0; i < cfg.d; ++i)
    for (int j = 0; j < cfg.d; ++j) {
      Surface s = sample_policy_surface(pol, j, cfg.x_desired, i, domain, cfg.horizon, nx, nt);
      std::string name = cfg.d == 1 ? "u_surface.tsv"
                                    : "u" + std::to_string(i + 1) + "_x" + std::to_string(j + 1) +
                                          ".tsv";
      write_surface_tsv(s, ctx.out(name));
    }
}

int run_simulate(RunContext& ctx, const ModelConfig& cfg, const std::string& policy_spec,
                 const std::string& x0_str) {
  const auto pol = parse_policy(policy_spec, cfg);
  const auto x0 = parse_x0(x0_str, cfg.d);
  NoisePath noise = make_noise(cfg, ctx.seed);
  Trajectory traj = simulate(cfg, *pol, x0, noise);
  write_trajectory_tsv(cfg, traj, ctx.out("trajectory.tsv"));
  // no-quota companion on the same noise
  ConstantPolicy noquota(std::vector<double>(static_cast<size_t>(cfg.d), cfg.u_max), cfg.u_min,
                         cfg.u_max);
  Trajectory traj_nq = simulate(cfg, noquota, x0, noise);
  write_trajectory_tsv(cfg, traj_nq, ctx.out("trajectory_noquota.tsv"));
  write_manifest(ctx);
  return 0;
}

int run_solve_sdp(RunContext& ctx, const ModelConfig& cfg, int grid_points, double domain,
                  int quant_order) {
  if (cfg.d != 1) throw std::invalid_argument("solve-sdp supports d = 1 only");
  SdpOptions opts;
  opts.grid_points = grid_points;
  opts.domain = domain;
  QuantGrid q = generate_1d(quant_order);
  ValueControlGrid g = sdp_solve(cfg, opts, q);
  save_sdp_grid(g, ctx.out("sdp_grid.txt"));
  save_grid(q, ctx.out("quant_grid.tsv"));

  const double h = cfg.h();
  Surface us, vs;
  for (int j = 0; j <= g.grid_points; ++j) us.xs.push_back(domain * j / g.grid_points);
  vs.xs = us.xs;
  for (int m = 0; m < g.time_steps; ++m) us.ts.push_back(m * h);
  for (int m = 0; m <= g.time_steps; ++m) vs.ts.push_back(m * h);
  us.values.assign(g.controls.begin(), g.controls.end());
  vs.values.assign(g.values.begin(), g.values.end());
  write_surface_tsv(us, ctx.out("u_surface.tsv"));
  write_surface_tsv(vs, ctx.out("v_surface.tsv"));
  write_manifest(ctx);
  return 0;
}

int run_solve_hjb(RunContext& ctx, const ModelConfig& cfg, std::vector<int> shape, int time_steps,
                  double domain) {
  if (shape.empty()) shape.assign(static_cast<size_t>(cfg.d), cfg.d == 1 ? 41 : 32);
  if (shape.size() == 1 && cfg.d > 1) shape.assign(static_cast<size_t>(cfg.d), shape[0]);
  HjbGridSpec spec;
  spec.shape = std::move(shape);
  spec.time_steps = time_steps;
  spec.domain = domain;
  HjbGrid g = hjb_solve(cfg, spec);
  save_hjb_grid(g, ctx.out("hjb_grid.bin"));

  auto pol = hjb_policy(g);
  emit_policy_surfaces(ctx, cfg, *pol, domain, g.shape[0] - 1, g.time_steps);
  // value slices along each axis, other coordinates at X_d
  const double h = cfg.horizon / g.time_steps;
  for (int j = 0; j < cfg.d; ++j) {
    Surface vs;
    for (int n = 0; n < g.shape[j]; ++n) vs.xs.push_back(domain * n / (g.shape[j] - 1));
    for (int m = 0; m <= g.time_steps; ++m) vs.ts.push_back(m * h);
    std::vector<double> x = cfg.x_desired;
    for (int m = 0; m <= g.time_steps; ++m)
      for (double xi : vs.xs) {
        x[static_cast<size_t>(j)] = xi;
        vs.values.push_back(interp_md(g.value_field(m), g.shape, domain, x));
      }
    write_surface_tsv(vs, ctx.out(cfg.d == 1 ? "v_surface.tsv"
                                             : "v_x" + std::to_string(j + 1) + ".tsv"));
  }
  write_manifest(ctx);
  return 0;
}

int run_train_nn(RunContext& ctx, const ModelConfig& cfg, std::vector<int> hidden,
                 const std::string& optimizer, TrainConfig tc) {
  NetSpec spec;
  spec.d = cfg.d;
  spec.hidden = hidden.empty() ? std::vector<int>{100, 100} : std::move(hidden);
  spec.horizon = cfg.horizon;
  spec.u_min = cfg.u_min;
  spec.u_max = cfg.u_max;
  tc.seed = ctx.seed;
  tc.threads = ctx.threads;
  TrainResult res;
  if (optimizer == "adam") {
    res = train_adam(spec, cfg, tc);
  } else if (optimizer == "cg") {
    if (spec.hidden.size() != 1)
      throw std::invalid_argument("--optimizer cg requires exactly one hidden layer");
    res = train_cg(spec, cfg, tc);
  } else {
    throw std::invalid_argument("unknown optimizer '" + optimizer + "' (adam | cg)");
  }
  save_checkpoint(spec, res.theta, ctx.out("nn_policy.bin"));
  {
    std::ofstream f(ctx.out("loss_history.tsv"));
    f << "# iteration\tloss\tgrad_norm\n";
    char buf[80];
    for (std::size_t i = 0; i < res.loss_history.size(); ++i) {
      snprintf(buf, sizeof(buf), "%zu\t%.17g\t%.17g\n", i, res.loss_history[i],
               i < res.grad_norms.size() ? res.grad_norms[i] : 0.0);
      f << buf;
    }
  }
  NetworkPolicy pol(spec, res.theta);
  emit_policy_surfaces(ctx, cfg, pol, spec.domain, 40, cfg.steps);
  write_manifest(ctx);
  return 0;
}

int run_evaluate(RunContext& ctx, const ModelConfig& cfg,
                 const std::vector<std::string>& policy_specs,
                 const std::vector<std::string>& x0_strs, int K) {
  if (policy_specs.empty()) throw std::invalid_argument("evaluate needs at least one --policy");
  std::vector<std::pair<std::string, PolicyPtr>> pols;
  for (const auto& s : policy_specs) pols.emplace_back(s, parse_policy(s, cfg));
  std::vector<std::vector<double>> x0s;
  if (x0_strs.empty())
    for (double v = 0.5; v < 1.45; v += 0.1) x0s.push_back(parse_x0(std::to_string(v), cfg.d));
  else
    for (const auto& s : x0_strs) x0s.push_back(parse_x0(s, cfg.d));
  auto table = compare_policies(cfg, pols, x0s, K > 0 ? K : cfg.samples, ctx.seed, ctx.threads);
  write_cost_table_tsv(table, ctx.out("cost_table.tsv"));
  write_manifest(ctx);
  return 0;
}

int run_assess(RunContext& ctx, const ModelConfig& cfg, const std::string& policy1d_spec,
               double y0) {
  ModelConfig cfg1 = cfg;
  cfg1.d = 1;
  cfg1.r = {cfg.r[0]};
  cfg1.kappa = {1.0};
  cfg1.sigma = {cfg.sigma[0]};
  cfg1.alpha = {cfg.alpha[0]};
  cfg1.x_desired = {1.0};
  OracleSpec os;
  os.d = cfg.d;
  os.kappa = cfg.kappa;
  os.one_d_policy = parse_policy(policy1d_spec, cfg1);
  os.y_target = 1.0;

  {
    std::ofstream f(ctx.out("deviation.tsv"));
    f << "# noise\tmax_deviation\tcondition_estimate\n";
    char buf[96];
    os.common_noise = true;
    snprintf(buf, sizeof(buf), "common\t%.17g\t%.17g\n",
             verify_commutation(cfg, os, y0, ctx.seed), condition_estimate(cfg.kappa, cfg.d));
    f << buf;
    os.common_noise = false;
    snprintf(buf, sizeof(buf), "independent\t%.17g\t%.17g\n",
             verify_commutation(cfg, os, y0, ctx.seed), condition_estimate(cfg.kappa, cfg.d));
    f << buf;
  }
  {
    std::ofstream f(ctx.out("thresholds.tsv"));
    f << "# axis\tcomponent\tslope\tlevel\tswitch\tlocation\n";
    char buf[128];
    for (int axis = 0; axis < cfg.d; ++axis) {
      auto th = predict_thresholds(cfg.kappa, cfg.d, axis, cfg.x_desired, os.y_target, 3.0);
      for (int j = 0; j < cfg.d; ++j) {
        const auto& t = th[static_cast<size_t>(j)];
        snprintf(buf, sizeof(buf), "%d\t%d\t%.17g\t%.17g\t%s\t%.17g\n", axis + 1, j + 1, t.slope,
                 t.level, t.has_switch ? "yes" : "no", t.location);
        f << buf;
      }
    }
  }
  write_manifest(ctx);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fishing-quota policy solvers for the controlled logistic SDE"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  RunContext ctx;
  ctx.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("FISHCTL_OUT")) ctx.outdir = env;
  if (ctx.outdir.empty()) ctx.outdir = "out";
  app.add_option("--threads", ctx.threads, "worker threads (1 = bit-reproducible)");
  app.add_option("--seed", ctx.seed, "base RNG seed");
  app.add_option("--out", ctx.outdir, "output directory");

  std::string policy_spec, x0_str = "1.0", optimizer = "adam", policy1d_spec;
  std::vector<std::string> policy_specs, x0_strs;
  std::vector<int> shape, hidden;
  int grid_points = 40, quant_order = 11, time_steps = 80, K = 0;
  double domain = 3.0, y0 = 0.8;
  TrainConfig tc;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("config", ctx.config_path, "model config file")->required();
  };

  auto* sim = app.add_subcommand("simulate", "simulate one trajectory plus a no-quota companion");
  add_config(sim);
  sim->add_option("--policy", policy_spec, "const:u | sdp:f | hjb:f | nn:f | oracle:spec")
      ->required();
  sim->add_option("--x0", x0_str, "initial state (scalar broadcasts)");

  auto* ssdp = app.add_subcommand("solve-sdp", "backward dynamic programming (1D)");
  add_config(ssdp);
  ssdp->add_option("--grid-points", grid_points, "spatial intervals J");
  ssdp->add_option("--domain", domain, "domain bound L");
  ssdp->add_option("--quant-order", quant_order, "quadrature nodes Q");

  auto* shjb = app.add_subcommand("solve-hjb", "semi-Lagrangian implicit HJB scheme");
  add_config(shjb);
  shjb->add_option("--shape", shape, "nodes per dimension (single value broadcasts)");
  shjb->add_option("--time-steps", time_steps, "backward time steps");
  shjb->add_option("--domain", domain, "domain bound L");

  auto* tnn = app.add_subcommand("train-nn", "train the network feedback policy");
  add_config(tnn);
  tnn->add_option("--hidden", hidden, "hidden layer widths (default 100 100)");
  tnn->add_option("--optimizer", optimizer, "adam | cg");
  tnn->add_option("--iters", tc.iters, "ADAM iterations");
  tnn->add_option("--cg-iters", tc.cg_iters, "CG iterations");
  tnn->add_option("--batch", tc.batch, "minibatch size");
  tnn->add_option("--eval-every", tc.eval_every, "evaluation cadence");

  auto* ev = app.add_subcommand("evaluate", "common-random-number cost table");
  add_config(ev);
  ev->add_option("--policy", policy_specs, "policy specs (repeatable)");
  ev->add_option("--x0", x0_strs, "sweep points (default 0.5..1.4)");
  ev->add_option("-K,--samples", K, "MC sample count (default from config)");

  auto* as = app.add_subcommand("assess", "kappa-commutation oracle and threshold predictions");
  add_config(as);
  as->add_option("--policy1d", policy1d_spec, "1D policy to lift")->required();
  as->add_option("--y0", y0, "initial 1D state");

  CLI11_PARSE(app, argc, argv);

  try {
    const ModelConfig cfg = load_config(ctx.config_path);
    ctx.command = app.get_subcommands().front()->get_name();
    if (sim->parsed()) return run_simulate(ctx, cfg, policy_spec, x0_str);
    if (ssdp->parsed()) return run_solve_sdp(ctx, cfg, grid_points, domain, quant_order);
    if (shjb->parsed()) return run_solve_hjb(ctx, cfg, shape, time_steps, domain);
    if (tnn->parsed()) return run_train_nn(ctx, cfg, hidden, optimizer, tc);
    if (ev->parsed()) return run_evaluate(ctx, cfg, policy_specs, x0_strs, K);
    if (as->parsed()) return run_assess(ctx, cfg, policy1d_spec, y0);
  } catch (const ResourceLimit& e) {
    std::cerr << "resource limit: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
