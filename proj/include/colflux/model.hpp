#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "colflux/errors.hpp"
#include "colflux/numerics.hpp"

namespace colflux {

struct ProfileOptions {
  /// Bound on |second divided difference| of k and w, the sampled stand-in
  /// for C^2 regularity.
  double max_second_difference = 1e6;
};

/// Diffusion k(z) and velocity w(z) on a column grid, validated against the
/// standing assumptions. Only `validate_profile` constructs one.
class CoefficientProfile {
 public:
  const ColumnGrid& grid() const noexcept { return grid_; }
  std::span<const double> k() const noexcept { return k_; }
  std::span<const double> w() const noexcept { return w_; }
  double k_at(std::size_t j) const noexcept { return k_[j]; }
  double w_at(std::size_t j) const noexcept { return w_[j]; }
  double k_surface() const noexcept { return k_.front(); }
  /// min k over the nodes
  double epsilon() const noexcept { return epsilon_; }
  double max_abs_w() const noexcept {
    double m = 0.0;
    for (double v : w_) m = std::max(m, std::abs(v));
    return m;
  }

  // interface values k_{j+1/2}, w_{j+1/2}
  double k_half(std::size_t j) const noexcept { return 0.5 * (k_[j] + k_[j + 1]); }
  double w_half(std::size_t j) const noexcept { return 0.5 * (w_[j] + w_[j + 1]); }

 private:
  friend CoefficientProfile validate_profile(std::vector<double>, std::vector<double>,
                                             const ColumnGrid&, ProfileOptions);

  CoefficientProfile(ColumnGrid grid, std::vector<double> k, std::vector<double> w, double eps)
      : grid_(grid), k_(std::move(k)), w_(std::move(w)), epsilon_(eps) {}

  ColumnGrid grid_;
  std::vector<double> k_;
  std::vector<double> w_;
  double epsilon_;
};

namespace detail {

inline double max_second_difference(std::span<const double> v, double dz) {
  double m = 0.0;
  for (std::size_t j = 1; j + 1 < v.size(); ++j) {
    m = std::max(m, std::abs(v[j + 1] - 2.0 * v[j] + v[j - 1]) / (dz * dz));
  }
  return m;
}

}  // namespace detail

inline CoefficientProfile validate_profile(std::vector<double> k, std::vector<double> w,
                                           const ColumnGrid& grid, ProfileOptions options = {}) {
  if (k.size() != grid.size() || w.size() != grid.size()) {
    throw ArgumentError("validate_profile: k and w must have one value per column node");
  }
  for (std::size_t j = 0; j < k.size(); ++j) {
    if (!std::isfinite(k[j]) || !std::isfinite(w[j])) {
      throw AssumptionError("A1", "k and w must be finite (node " + std::to_string(j) + ")");
    }
  }
  for (std::size_t j = 0; j < k.size(); ++j) {
    if (!(k[j] > 0.0)) {
      throw AssumptionError("A2", "k(z) must be positive; k = " + std::to_string(k[j]) +
                                      " at z = " + std::to_string(grid.node(j)));
    }
  }
  double w_scale = 1.0;
  for (double v : w) w_scale = std::max(w_scale, std::abs(v));
  if (std::abs(w.front()) > 1e-12 * w_scale || std::abs(w.back()) > 1e-12 * w_scale) {
    throw AssumptionError("A3", "w must vanish at z = 0 and z = h");
  }
  const double dz = grid.spacing();
  if (detail::max_second_difference(k, dz) > options.max_second_difference ||
      detail::max_second_difference(w, dz) > options.max_second_difference) {
    throw AssumptionError("A1", "second divided differences exceed " +
                                    std::to_string(options.max_second_difference));
  }
  const double eps = *std::min_element(k.begin(), k.end());
  return CoefficientProfile(grid, std::move(k), std::move(w), eps);
}

/// mu(z) = exp of the integral of w/k from 0 to z (cumulative trapezoid), so mu(0) = 1.
inline std::vector<double> mu_weight(const CoefficientProfile& profile) {
  const std::size_t n = profile.grid().size();
  std::vector<double> ratio(n);
  for (std::size_t j = 0; j < n; ++j) ratio[j] = profile.w_at(j) / profile.k_at(j);
  std::vector<double> mu = cumulative_trapezoid(std::span<const double>(ratio), profile.grid());
  for (double& v : mu) v = std::exp(v);
  return mu;
}

}  // namespace colflux
