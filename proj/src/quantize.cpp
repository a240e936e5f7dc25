#include "fishctl/quantize.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fishctl {

double normal_pdf(double z) { return std::exp(-0.5 * z * z) * 0.3989422804014326779399461; }

double normal_cdf(double z) { return 0.5 * std::erfc(-z * 0.7071067811865475244008444); }

namespace {

double normal_quantile(double p) {
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

QuantGrid generate_1d(int order) {
  if (order < 1) throw std::invalid_argument("generate_1d: order must be >= 1");
  QuantGrid g;
  g.dim = 1;
  g.order = order;
  g.weights.assign(static_cast<size_t>(order), 0.0);
  g.nodes.resize(static_cast<size_t>(order));
  if (order == 1) {
    g.nodes[0] = 0.0;
    g.weights[0] = 1.0;
    return g;
  }
  for (int q = 0; q < order; ++q) g.nodes[q] = normal_quantile((q + 0.5) / order);

  const int max_sweeps = 100000;
  const double tol = 1e-12;
  double residual = 0.0;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    residual = 0.0;
    double cdf_lo = 0.0, pdf_lo = 0.0;  // at -inf
    for (int q = 0; q < order; ++q) {
      double cdf_hi = 1.0, pdf_hi = 0.0;  // at +inf
      if (q + 1 < order) {
        const double b = 0.5 * (g.nodes[q] + g.nodes[q + 1]);
        cdf_hi = normal_cdf(b);
        pdf_hi = normal_pdf(b);
      }
      const double w = cdf_hi - cdf_lo;
      const double z = (pdf_lo - pdf_hi) / w;  // E[Z | cell]
      residual = std::max(residual, std::abs(z - g.nodes[q]));
      g.nodes[q] = z;
      g.weights[q] = w;
      cdf_lo = cdf_hi;
      pdf_lo = pdf_hi;
    }
    if (residual < tol) return g;
  }
  std::ostringstream msg;
  msg << "generate_1d: Lloyd iteration did not converge for Q=" << order
      << " (residual " << residual << ")";
  throw std::runtime_error(msg.str());
}

QuantGrid product_grid(const QuantGrid& g, int dim) {
  if (g.dim != 1) throw std::invalid_argument("product_grid: input grid must be one-dimensional");
  if (dim < 1) throw std::invalid_argument("product_grid: dim must be >= 1");
  double total = 1.0;
  for (int i = 0; i < dim; ++i) {
    total *= g.order;
    if (total > 2e8) throw std::invalid_argument("product_grid: Q^d too large");
  }
  const int n = static_cast<int>(total);
  QuantGrid out;
  out.dim = dim;
  out.order = n;
  out.nodes.resize(static_cast<size_t>(n) * dim);
  out.weights.assign(static_cast<size_t>(n), 1.0);
  for (int q = 0; q < n; ++q) {
    int rem = q;
    for (int i = dim - 1; i >= 0; --i) {
      const int k = rem % g.order;
      rem /= g.order;
      out.nodes[static_cast<size_t>(q) * dim + i] = g.nodes[k];
      out.weights[q] *= g.weights[k];
    }
  }
  return out;
}

void save_grid(const QuantGrid& g, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write grid file: " + path);
  f << "# quantization grid: dim " << g.dim << ", order " << g.order << "\n";
  char buf[32];
  for (int q = 0; q < g.order; ++q) {
    for (int i = 0; i < g.dim; ++i) {
      snprintf(buf, sizeof(buf), "%.17g\t", g.node(q, i));
      f << buf;
    }
    snprintf(buf, sizeof(buf), "%.17g\n", g.weights[q]);
    f << buf;
  }
}

QuantGrid load_grid(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open grid file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream is(line);
    std::vector<double> row;
    double v;
    while (is >> v) row.push_back(v);
    if (!is.eof()) throw std::runtime_error("grid file: malformed row at line " + std::to_string(line_no));
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("grid file: inconsistent row length at line " + std::to_string(line_no));
    if (row.size() < 2) throw std::runtime_error("grid file: row needs at least one coordinate and a weight");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("grid file: no nodes in " + path);

  QuantGrid g;
  g.dim = static_cast<int>(rows.front().size()) - 1;
  g.order = static_cast<int>(rows.size());
  double sum = 0.0;
  for (const auto& row : rows) {
    for (int i = 0; i < g.dim; ++i) g.nodes.push_back(row[i]);
    const double w = row.back();
    if (w < 0.0) throw std::runtime_error("grid file: negative weight");
    g.weights.push_back(w);
    sum += w;
  }
  if (std::abs(sum - 1.0) >= 1e-6)
    throw std::runtime_error("grid file: weights sum to " + std::to_string(sum) + ", rejected");
  for (auto& w : g.weights) w /= sum;
  return g;
}

double expect(const QuantGrid& g, const std::function<double(std::span<const double>)>& f) {
  double acc = 0.0;
  for (int q = 0; q < g.order; ++q) {
    std::span<const double> z{g.nodes.data() + static_cast<size_t>(q) * g.dim,
                              static_cast<size_t>(g.dim)};
    acc += g.weights[q] * f(z);
  }
  return acc;
}

}  // namespace fishctl
