#include "fishctl/tsv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fishctl {

namespace {

void put(std::ofstream& f, double v, char sep) {
  char buf[40];
  snprintf(buf, sizeof(buf), "%.17g%c", v, sep);
  f << buf;
}

}  // namespace

void write_trajectory_tsv(const ModelConfig& cfg, const Trajectory& traj,
                          const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write trajectory: " + path);
  f << "# time";
  for (int i = 0; i < traj.d; ++i) f << "\tx" << i + 1;
  for (int i = 0; i < traj.d; ++i) f << "\tu" << i + 1;
  f << "\n";
  const double h = cfg.h();
  for (int m = 0; m <= traj.steps; ++m) {
    put(f, m * h, '\t');
    const auto xm = traj.state(m);
    for (int i = 0; i < traj.d; ++i) put(f, xm[i], '\t');
    if (m < traj.steps) {
      const auto um = traj.control(m);
      for (int i = 0; i < traj.d; ++i) put(f, um[i], i + 1 < traj.d ? '\t' : '\n');
    } else {
      f << "\n";
    }
  }
}

void write_surface_tsv(const Surface& s, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write surface: " + path);
  const std::size_t nx = s.xs.size();
  if (s.values.size() != nx * s.ts.size())
    throw std::invalid_argument("surface: value count mismatch");
  for (std::size_t it = 0; it < s.ts.size(); ++it) {
    for (std::size_t ix = 0; ix < nx; ++ix) {
      put(f, s.xs[ix], '\t');
      put(f, s.ts[it], '\t');
      put(f, s.values[it * nx + ix], '\n');
    }
    if (it + 1 < s.ts.size()) f << "\n";
  }
}

Surface read_surface_tsv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open surface: " + path);
  Surface s;
  std::string line;
  std::size_t nx = 0, row_in_block = 0;
  bool first_block = true;
  while (std::getline(f, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream is(line);
    double x, t, v;
    if (!(is >> x)) {  // blank line: scanline boundary
      if (row_in_block != 0) {
        if (first_block) nx = row_in_block;
        else if (row_in_block != nx)
          throw std::runtime_error("surface: ragged scanline in " + path);
        first_block = false;
        row_in_block = 0;
      }
      continue;
    }
    if (!(is >> t >> v)) throw std::runtime_error("surface: malformed row in " + path);
    if (row_in_block == 0) s.ts.push_back(t);
    if (first_block) s.xs.push_back(x);
    s.values.push_back(v);
    ++row_in_block;
  }
  if (row_in_block != 0) {
    if (first_block) nx = row_in_block;
    else if (row_in_block != nx)
      throw std::runtime_error("surface: ragged scanline in " + path);
  }
  if (s.values.size() != s.xs.size() * s.ts.size())
    throw std::runtime_error("surface: inconsistent grid in " + path);
  return s;
}

void write_cost_table_tsv(const std::vector<CostCell>& table, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write cost table: " + path);
  f << "# x0\tpolicy\tmean\tstderr\n";
  char buf[64];
  for (const auto& cell : table) {
    for (std::size_t i = 0; i < cell.x0.size(); ++i) {
      snprintf(buf, sizeof(buf), "%.17g%s", cell.x0[i], i + 1 < cell.x0.size() ? "," : "\t");
      f << buf;
    }
    f << cell.policy << "\t";
    if (cell.ok) {
      snprintf(buf, sizeof(buf), "%.17g\t%.17g\n", cell.mean, cell.stderr_);
      f << buf;
    } else {
      f << "nan\tnan\t# " << cell.error << "\n";
    }
  }
}

Surface sample_policy_surface(const PolicyField& policy, int axis, std::vector<double> fixed,
                              int comp, double domain, double horizon, int nx, int nt) {
  const int d = policy.dim();
  if (axis < 0 || axis >= d || comp < 0 || comp >= d)
    throw std::invalid_argument("sample_policy_surface: bad axis or component");
  if (fixed.size() != static_cast<size_t>(d))
    throw std::invalid_argument("sample_policy_surface: fixed coordinate length");
  Surface s;
  for (int ix = 0; ix <= nx; ++ix) s.xs.push_back(domain * ix / nx);
  for (int it = 0; it <= nt; ++it) s.ts.push_back(horizon * it / nt);
  std::vector<double> x = fixed, u(static_cast<size_t>(d));
  for (double t : s.ts)
    for (double xi : s.xs) {
      x[static_cast<size_t>(axis)] = xi;
      policy.evaluate(x, t, u);
      s.values.push_back(u[static_cast<size_t>(comp)]);
    }
  return s;
}

}  // namespace fishctl
