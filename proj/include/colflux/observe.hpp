#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "colflux/errors.hpp"
#include "colflux/model.hpp"
#include "colflux/numerics.hpp"
#include "colflux/spectral.hpp"
#include "colflux/transport.hpp"

namespace colflux {

enum class Positivity { require, flag };

/// Observation weighting function rho(z). Weights are not normalised:
/// scaling rho by c scales the observation, and each gain direction, by c.
class Weight {
 public:
  Weight(ColumnGrid grid, std::vector<double> values, std::string label = {},
         Positivity positivity = Positivity::require)
      : grid_(grid), values_(std::move(values)), label_(std::move(label)) {
    if (values_.size() != grid_.size()) throw ArgumentError("Weight: one value per column node");
    double scale = 0.0;
    for (double v : values_) {
      if (!std::isfinite(v)) throw ArgumentError("Weight: values must be finite");
      scale = std::max(scale, std::abs(v));
    }
    for (std::size_t j = 0; j < values_.size(); ++j) {
      if (values_[j] < -kNegativityTolerance * std::max(scale, 1.0)) {
        if (positivity == Positivity::require) {
          throw WeightPositivityError("Weight '" + label_ + "' is negative at z = " +
                                      std::to_string(grid_.node(j)));
        }
        negative_ = true;
      }
    }
  }

  const ColumnGrid& grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  const std::string& label() const noexcept { return label_; }
  bool negative() const noexcept { return negative_; }

  const std::optional<std::vector<double>>& coefficients() const noexcept { return coefficients_; }
  void set_coefficients(std::vector<double> a) { coefficients_ = std::move(a); }

 private:
  ColumnGrid grid_;
  std::vector<double> values_;
  std::string label_;
  std::optional<std::vector<double>> coefficients_;
  bool negative_ = false;
};

/// H q = integral of rho q over the column (trapezoid).
inline double apply_observation(const Weight& weight, std::span<const double> column) {
  if (column.size() != weight.grid().size()) {
    throw ArgumentError("apply_observation: column does not match the weight grid");
  }
  std::vector<double> prod(column.size());
  for (std::size_t j = 0; j < column.size(); ++j) prod[j] = weight.values()[j] * column[j];
  return trapezoid(std::span<const double>(prod), weight.grid());
}

/// H* a = a rho.
inline std::vector<double> adjoint_observation(const Weight& weight, double a) {
  std::vector<double> out(weight.values().begin(), weight.values().end());
  for (double& v : out) v *= a;
  return out;
}

/// Trapezoid-weighted rho, i.e. the vector v with dot(v, q) = H q.
inline std::vector<double> observation_functional(const Weight& weight) {
  std::vector<double> v = trapezoid_weights(weight.grid());
  for (std::size_t j = 0; j < v.size(); ++j) v[j] *= weight.values()[j];
  return v;
}

struct CanonicalWeights {
  Weight plus;   // rho_0 + rho_1, loaded towards the surface
  Weight minus;  // rho_0 - rho_1, loaded towards the top
};

inline CanonicalWeights canonical_weights(const EigenSystem& eig) {
  if (eig.size() < 2) throw ArgumentError("canonical_weights: need at least two modes");
  const std::size_t nz = eig.grid().size();
  std::vector<double> p(nz), m(nz);
  for (std::size_t j = 0; j < nz; ++j) {
    p[j] = eig.modes[0][j] + eig.modes[1][j];
    m[j] = eig.modes[0][j] - eig.modes[1][j];
  }
  CanonicalWeights out{Weight(eig.grid(), std::move(p), "rho_plus", Positivity::flag),
                       Weight(eig.grid(), std::move(m), "rho_minus", Positivity::flag)};
  out.plus.set_coefficients({1.0, 1.0});
  out.minus.set_coefficients({1.0, -1.0});
  return out;
}

/// Counter-based generator: the n-th draw of stream `seed` is the SplitMix64
/// finaliser applied to seed + (n + 1) * 0x9E3779B97F4A7C15. Normal deviates
/// use Box-Muller on draws 2i and 2i+1, so observation i owns its substream.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  static std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t bits(std::uint64_t counter) const noexcept {
    return mix(seed_ + (counter + 1) * 0x9E3779B97F4A7C15ULL);
  }

  /// uniform on (0, 1]
  double uniform(std::uint64_t counter) const noexcept {
    return (static_cast<double>(bits(counter) >> 11) + 1.0) * 0x1.0p-53;
  }

  double normal(std::uint64_t index) const noexcept {
    const double u1 = uniform(2 * index);
    const double u2 = uniform(2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t seed_;
};

struct Observation {
  double t = 0.0;
  double y = 0.0;
  double r = 1.0;  // noise standard deviation
};

class ObservationSet {
 public:
  ObservationSet() = default;
  explicit ObservationSet(std::vector<Observation> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (!std::isfinite(e.t) || !std::isfinite(e.y) || !std::isfinite(e.r)) {
        throw ArgumentError("ObservationSet: non-finite entry " + std::to_string(i));
      }
      if (!(e.t > 0.0)) throw ArgumentError("ObservationSet: times must be positive");
      if (!(e.r > 0.0)) throw ArgumentError("ObservationSet: noise levels must be positive");
      if (i > 0 && !(e.t > entries_[i - 1].t)) {
        throw ArgumentError("ObservationSet: times must be strictly increasing");
      }
    }
  }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const Observation& operator[](std::size_t i) const noexcept { return entries_[i]; }
  const std::vector<Observation>& entries() const noexcept { return entries_; }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

 private:
  std::vector<Observation> entries_;
};

namespace detail {

inline void check_observation_times(std::span<const double> times, const TimeGrid& grid) {
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] > 0.0) || times[i] > grid.length() * (1.0 + 1e-12)) {
      throw ArgumentError("observation time " + std::to_string(times[i]) + " outside (0, t_end]");
    }
    if (i > 0 && !(times[i] > times[i - 1])) {
      throw ArgumentError("observation times must be strictly increasing");
    }
    grid.require_node(times[i], "observation time");
  }
}

}  // namespace detail

/// y_i = H_i q^F(., t_i) + r_i xi_i with xi_i = CounterRng(seed).normal(i).
/// A zero noise level yields the noiseless value; the set records r_i as the
/// assumed noise level, which must be positive, so zero levels are stored as 1.
inline ObservationSet synthesize_data(const CoefficientProfile& profile, const FluxSignal& true_flux,
                                      std::span<const double> q0, std::span<const Weight> weights,
                                      std::span<const double> times,
                                      std::span<const double> noise_levels, std::uint64_t seed) {
  const TimeGrid& tg = true_flux.grid();
  if (weights.size() != times.size() || noise_levels.size() != times.size()) {
    throw ArgumentError("synthesize_data: weights, times and noise levels must align");
  }
  detail::check_observation_times(times, tg);
  detail::check_forward_inputs(profile, true_flux, q0);
  std::vector<PointFunctional> fs;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(weights[i].grid() == profile.grid())) {
      throw ArgumentError("synthesize_data: weight grid does not match the profile grid");
    }
    if (!(noise_levels[i] >= 0.0)) throw ArgumentError("synthesize_data: negative noise level");
    fs.push_back({tg.require_node(times[i]), observation_functional(weights[i])});
  }
  const CrankNicolson cn(profile, tg.spacing());
  const std::vector<double> clean = evaluate_functionals(cn, true_flux.values(), q0, fs);
  const CounterRng rng(seed);
  std::vector<Observation> out;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double r = noise_levels[i];
    const double y = r > 0.0 ? clean[i] + r * rng.normal(i) : clean[i];
    out.push_back({times[i], y, r > 0.0 ? r : 1.0});
  }
  return ObservationSet(std::move(out));
}

}  // namespace colflux
