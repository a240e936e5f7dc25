#pragma once

#include <algorithm>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fishctl {

/// Markovian feedback policy u(X, t) -> [u_min, u_max]^d.
/// Implementations must be safe to evaluate concurrently (const, no
/// interior mutability).
class PolicyField {
 public:
  virtual ~PolicyField() = default;

  // Writes the control into `u` (length d), clamped to [u_min, u_max].
  virtual void evaluate(std::span<const double> x, double t, std::span<double> u) const = 0;

  virtual int dim() const = 0;
  virtual std::string backing() const = 0;

  std::vector<double> operator()(std::span<const double> x, double t) const {
    std::vector<double> u(static_cast<size_t>(dim()));
    evaluate(x, t, u);
    return u;
  }
};

inline double clamp_control(double u, double lo, double hi) {
  return std::clamp(u, lo, hi);
}

class ConstantPolicy final : public PolicyField {
 public:
  ConstantPolicy(std::vector<double> u, double u_min, double u_max)
      : u_(std::move(u)), u_min_(u_min), u_max_(u_max) {}

  void evaluate(std::span<const double>, double, std::span<double> u) const override {
    for (size_t i = 0; i < u_.size(); ++i) u[i] = clamp_control(u_[i], u_min_, u_max_);
  }
  int dim() const override { return static_cast<int>(u_.size()); }
  std::string backing() const override { return "constant"; }

 private:
  std::vector<double> u_;
  double u_min_, u_max_;
};

using PolicyPtr = std::shared_ptr<const PolicyField>;

}  // namespace fishctl
