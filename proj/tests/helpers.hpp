#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "colflux/model.hpp"
#include "colflux/numerics.hpp"

namespace testing_support {

inline colflux::CoefficientProfile constant_profile(std::size_t nz, double h = 1.0, double k = 1.0) {
  const colflux::ColumnGrid g(h, nz);
  return colflux::validate_profile(std::vector<double>(nz, k), std::vector<double>(nz, 0.0), g);
}

inline colflux::CoefficientProfile linear_k_profile(std::size_t nz) {
  const colflux::ColumnGrid g(1.0, nz);
  std::vector<double> k(nz);
  for (std::size_t j = 0; j < nz; ++j) k[j] = 1.0 + 0.5 * g.node(j);
  return colflux::validate_profile(std::move(k), std::vector<double>(nz, 0.0), g);
}

/// Smooth positive k and w vanishing at both ends, drawn from `rng`.
inline colflux::CoefficientProfile random_profile(std::mt19937_64& rng, std::size_t nz) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const colflux::ColumnGrid g(1.0, nz);
  const double k0 = 1.0 + 0.5 * u(rng), k1 = 0.3 * u(rng), k2 = 0.2 * u(rng);
  const double w1 = 0.8 * u(rng), w2 = 0.4 * u(rng);
  std::vector<double> k(nz), w(nz);
  for (std::size_t j = 0; j < nz; ++j) {
    const double z = g.node(j);
    k[j] = k0 + k1 * z + k2 * std::cos(std::numbers::pi * z);
    w[j] = w1 * std::sin(std::numbers::pi * z) + w2 * std::sin(2.0 * std::numbers::pi * z);
  }
  w.front() = 0.0;
  w.back() = 0.0;
  return colflux::validate_profile(std::move(k), std::move(w), g);
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace testing_support
