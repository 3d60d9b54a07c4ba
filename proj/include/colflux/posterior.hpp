#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "colflux/errors.hpp"
#include "colflux/model.hpp"
#include "colflux/numerics.hpp"
#include "colflux/observe.hpp"
#include "colflux/prior.hpp"
#include "colflux/spectral.hpp"

namespace colflux {

namespace detail {

/// integral over [0, T] of e^{(a + b)(s - T)}
inline double exp_pair_integral(double a, double b, double T) {
  const double s = a + b;
  if (s * T < 1e-12) return T * (1.0 - 0.5 * s * T);
  return -std::expm1(-s * T) / s;
}

/// Exact L2 norm of the piecewise-linear interpolant.
inline double l2_norm(std::span<const double> g, const TimeGrid& grid) {
  const double dt = grid.spacing();
  double acc = 0.0;
  for (std::size_t j = 0; j + 1 < g.size(); ++j) {
    const double a = g[j], b = g[j + 1];
    acc += dt * (a * a + a * b + b * b) / 3.0;
  }
  return std::sqrt(acc);
}

}  // namespace detail

/// G_i(t) = k(0)/r_i * sum_n a_n e^{lambda_n (t - t_i)} on [0, t_i], zero after.
/// Node values carry the truncated series (finite at t_i); inner products
/// with G_i are done mode by mode with exact exponential integrals.
class GainDirection {
 public:
  GainDirection(TimeGrid grid, double t_obs, double r, double k_surface,
                std::vector<double> coefficients, std::vector<double> lambdas)
      : grid_(grid),
        t_obs_(t_obs),
        obs_index_(grid.require_node(t_obs, "observation time")),
        r_(r),
        k_surface_(k_surface),
        a_(std::move(coefficients)),
        lambdas_(std::move(lambdas)) {
    if (a_.empty()) throw ArgumentError("gain_direction: empty coefficient list");
    if (a_.size() > lambdas_.size()) throw ArgumentError("gain_direction: too many coefficients");
    if (!(r > 0.0)) throw ArgumentError("gain_direction: noise level must be positive");
    if (!(t_obs > 0.0)) throw ArgumentError("gain_direction: observation time must be positive");
    lambdas_.resize(a_.size());
    values_.assign(grid_.size(), 0.0);
    for (std::size_t j = 0; j <= obs_index_; ++j) {
      const double lag = static_cast<double>(obs_index_ - j) * grid_.spacing();
      double acc = 0.0;
      for (std::size_t n = 0; n < a_.size(); ++n) acc += a_[n] * std::exp(-lambdas_[n] * lag);
      values_[j] = scale() * acc;
    }
    truncation_error_.assign(grid_.size(), 0.0);
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  double t_obs() const noexcept { return t_obs_; }
  std::size_t obs_index() const noexcept { return obs_index_; }
  double noise() const noexcept { return r_; }
  double scale() const noexcept { return k_surface_ / r_; }
  std::span<const double> coefficients() const noexcept { return a_; }
  std::span<const double> lambdas() const noexcept { return lambdas_; }
  std::span<const double> truncation_error() const noexcept { return truncation_error_; }
  void set_truncation_error(std::vector<double> e) { truncation_error_ = std::move(e); }

  /// integral of G(t) G_i(t) over [0, t_N] for piecewise-linear G.
  double inner(std::span<const double> g) const {
    double acc = 0.0;
    for (std::size_t n = 0; n < a_.size(); ++n) {
      if (a_[n] == 0.0) continue;
      acc += a_[n] * exp_inner(g, grid_, lambdas_[n], t_obs_);
    }
    return scale() * acc;
  }

  /// ||G_i||^2 from the closed-form Gram entries of the exponentials.
  double norm_squared() const {
    double acc = 0.0;
    for (std::size_t m = 0; m < a_.size(); ++m) {
      for (std::size_t n = 0; n < a_.size(); ++n) {
        acc += a_[m] * a_[n] * detail::exp_pair_integral(lambdas_[m], lambdas_[n], t_obs_);
      }
    }
    return scale() * scale() * acc;
  }

  double norm() const { return std::sqrt(std::max(0.0, norm_squared())); }

  /// Nodal covector c with dot(c, g) = inner(g) for every piecewise-linear g.
  std::vector<double> covector() const {
    std::vector<double> c(grid_.size(), 0.0);
    for (std::size_t n = 0; n < a_.size(); ++n) {
      if (a_[n] == 0.0) continue;
      const std::vector<double> h = exp_hat_weights(grid_, lambdas_[n], t_obs_);
      for (std::size_t j = 0; j < c.size(); ++j) c[j] += scale() * a_[n] * h[j];
    }
    return c;
  }

  /// integral of G_i over [0, t_i]
  double mean_projection() const {
    double acc = 0.0;
    for (std::size_t n = 0; n < a_.size(); ++n) {
      acc += a_[n] * detail::exp_pair_integral(lambdas_[n], 0.0, t_obs_);
    }
    return scale() * acc;
  }

 private:
  TimeGrid grid_;
  double t_obs_;
  std::size_t obs_index_;
  double r_;
  double k_surface_;
  std::vector<double> a_;
  std::vector<double> lambdas_;
  std::vector<double> values_;
  std::vector<double> truncation_error_;
};

/// Builds G_i from the leading coefficients of an expanded weight. When the
/// expansion residual R is supplied, the per-node truncation estimate is
///   k(0)/r * R / sqrt(min_n nu_n) * sqrt( sum_{M <= n < nz} e^{2 lambda_n (t - t_i)} ),
/// a Cauchy-Schwarz bound on the discarded modes with lambda_n extrapolated
/// quadratically from the last computed eigenvalue.
inline GainDirection gain_direction(const EigenSystem& eig, std::span<const double> a, double t_obs,
                                    double r, const TimeGrid& grid,
                                    double expansion_residual = 0.0) {
  if (a.empty()) throw ArgumentError("gain_direction: empty coefficient list");
  if (a.size() > eig.size()) throw ArgumentError("gain_direction: more coefficients than modes");
  GainDirection g(grid, t_obs, r, eig.k_surface(), std::vector<double>(a.begin(), a.end()),
                  std::vector<double>(eig.lambdas.begin(), eig.lambdas.begin() +
                                                               static_cast<std::ptrdiff_t>(a.size())));
  const std::size_t M = a.size();
  const std::size_t nz = eig.grid().size();
  std::vector<double> err(grid.size(), 0.0);
  if (expansion_residual > 0.0 && M < nz) {
    const double nu_min = *std::min_element(eig.mu_norms.begin(), eig.mu_norms.end());
    const double growth =
        M >= 2 ? eig.lambdas[M - 1] / static_cast<double>((M - 1) * (M - 1)) : 0.0;
    const double pref = g.scale() * expansion_residual / std::sqrt(nu_min);
    for (std::size_t j = 0; j <= g.obs_index(); ++j) {
      const double lag = static_cast<double>(g.obs_index() - j) * grid.spacing();
      double s = 0.0;
      for (std::size_t n = M; n < nz; ++n) {
        const double term = std::exp(-2.0 * growth * static_cast<double>(n * n) * lag);
        s += term;
        if (term < 1e-30) break;
      }
      err[j] = pref * std::sqrt(s);
    }
  }
  g.set_truncation_error(std::move(err));
  return g;
}

/// Prior plus the rank-N precision update carried by the gain directions.
class PosteriorModel {
 public:
  explicit PosteriorModel(PriorSpec prior, std::vector<GainDirection> gains = {})
      : prior_(std::move(prior)), gains_(std::move(gains)) {
    for (const auto& g : gains_) check_gain(g);
  }

  const PriorSpec& prior() const noexcept { return prior_; }
  const std::vector<GainDirection>& gains() const noexcept { return gains_; }

  void add(GainDirection g) {
    check_gain(g);
    gains_.push_back(std::move(g));
  }

  double prior_form(std::span<const double> g) const { return prior_.form(g, g); }

  /// ||C1^{-1/2} G||^2 = ||C0^{-1/2} G||^2 + sum_i <G, G_i>^2
  double quadratic_form(std::span<const double> g) const { return bilinear(g, g); }

  double bilinear(std::span<const double> g1, std::span<const double> g2) const {
    double acc = prior_.form(g1, g2);
    for (const auto& gi : gains_) acc += gi.inner(g1) * gi.inner(g2);
    return acc;
  }

  /// C1^{-1} G = C0^{-1} G + sum_i <G, G_i> G_i on the free nodes.
  std::vector<double> precision_apply(std::span<const double> g) const {
    std::vector<double> out = prior_.apply_inverse(g);
    for (const auto& gi : gains_) {
      const double c = gi.inner(g);
      if (c == 0.0) continue;
      const auto v = gi.values();
      for (std::size_t j = 0; j < out.size(); ++j) out[j] += c * v[j];
    }
    // keep only the free coordinates
    std::vector<double> x = prior_.restrict_to_free(out);
    prior_.project(x);
    return prior_.embed(x);
  }

  /// Galerkin form of precision_apply: each rank-one term enters through its
  /// exact hat-function moments divided by the quadrature weights, which is
  /// how a dense discretisation of the same operator represents it.
  std::vector<double> precision_apply_weak(std::span<const double> g) const {
    prior_.check_domain(g);
    std::vector<double> x = prior_.stiffness_multiply(prior_.restrict_to_free(g));
    for (const auto& gi : gains_) {
      const double c = gi.inner(g);
      if (c == 0.0) continue;
      const std::vector<double> cv = prior_.embed_transpose(gi.covector());
      for (std::size_t j = 0; j < x.size(); ++j) x[j] += c * cv[j];
    }
    const std::vector<double> w = prior_.free_weights();
    for (std::size_t j = 0; j < x.size(); ++j) x[j] /= w[j];
    prior_.project(x);
    return prior_.embed(x);
  }

 private:
  void check_gain(const GainDirection& g) const {
    if (!(g.grid() == prior_.grid())) {
      throw ArgumentError("PosteriorModel: gain direction on a different time grid");
    }
  }

  PriorSpec prior_;
  std::vector<GainDirection> gains_;
};

enum class Monotonicity { increasing, decreasing, constant, neither };

inline const char* to_string(Monotonicity m) {
  switch (m) {
    case Monotonicity::increasing: return "increasing";
    case Monotonicity::decreasing: return "decreasing";
    case Monotonicity::constant: return "constant";
    case Monotonicity::neither: return "neither";
  }
  return "neither";
}

/// Classifies successive differences against tol * max|v|.
inline Monotonicity classify_monotone(std::span<const double> v, double rel_tol) {
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  const double tol = rel_tol * scale;
  bool up = true, down = true;
  for (std::size_t j = 0; j + 1 < v.size(); ++j) {
    const double d = v[j + 1] - v[j];
    if (d < -tol) up = false;
    if (d > tol) down = false;
  }
  if (up && down) return Monotonicity::constant;
  if (up) return Monotonicity::increasing;
  if (down) return Monotonicity::decreasing;
  return Monotonicity::neither;
}

struct GainAnalysis {
  double mean_projection = 0.0;
  Monotonicity monotone = Monotonicity::neither;
};

inline constexpr double kMonotoneTolerance = 1e-9;

inline GainAnalysis analyze_gain(const GainDirection& g) {
  const auto support = g.values().first(g.obs_index() + 1);
  return {g.mean_projection(), classify_monotone(support, kMonotoneTolerance)};
}

/// Checks that a monotone weight yields a gain direction monotone in the
/// opposite sense in t (increasing rho gives decreasing G_i and vice versa).
inline bool monotone_weight_check(const CoefficientProfile& profile, const EigenSystem& eig,
                                  const Weight& rho, double t_obs, const TimeGrid& grid,
                                  double r = 1.0) {
  if (!(rho.grid() == profile.grid())) {
    throw ArgumentError("monotone_weight_check: weight grid does not match the profile");
  }
  const Monotonicity sense = classify_monotone(rho.values(), kMonotoneTolerance);
  if (sense == Monotonicity::neither) {
    throw ArgumentError("monotone_weight_check: weight '" + rho.label() + "' is not monotone");
  }
  const WeightExpansion ex = expand_weight(rho.values(), eig);
  const GainDirection g = gain_direction(eig, ex.coefficients, t_obs, r, grid);
  const Monotonicity out = analyze_gain(g).monotone;
  switch (sense) {
    case Monotonicity::increasing:
      return out == Monotonicity::decreasing || out == Monotonicity::constant;
    case Monotonicity::decreasing:
      return out == Monotonicity::increasing || out == Monotonicity::constant;
    case Monotonicity::constant: return out == Monotonicity::constant;
    case Monotonicity::neither: break;
  }
  return false;
}

inline constexpr std::size_t kMaxBlindExponentials = 40;

struct BlindDirection {
  std::vector<double> values;
  /// |<G, e_n>| / (||G|| ||e_n||) for e_n(t) = e^{lambda_n (t - t_obs)}, n < M
  std::vector<double> projections;
  double max_projection = 0.0;
  /// constraints kept after Gram-Schmidt (the rest were numerically dependent)
  std::size_t retained = 0;
  /// extreme eigenvalues and log10 condition of the normalised closed-form Gram matrix
  double gram_min_eigenvalue = 0.0;
  double gram_max_eigenvalue = 0.0;
  double gram_log10_condition = 0.0;
};

/// Orthogonalises `seed` against span{e^{lambda_n (t - t_obs)} : n < M} within
/// the piecewise-linear functions on `grid`: the exact functionals
/// G -> integral of G e_n are represented in the trapezoid inner product and
/// removed by modified Gram-Schmidt with one reorthogonalisation pass.
/// `domain` lists extra nodal functionals (covectors) that must also vanish,
/// e.g. the prior's boundary conditions.
inline BlindDirection blind_direction(const EigenSystem& eig, double t_obs, std::size_t M,
                                      const TimeGrid& grid, std::span<const double> seed,
                                      std::span<const std::vector<double>> domain = {}) {
  if (M == 0 || M > eig.size()) throw ArgumentError("blind_direction: need 1 <= M <= n_modes");
  if (M > kMaxBlindExponentials) {
    throw ArgumentError("blind_direction: M capped at " + std::to_string(kMaxBlindExponentials));
  }
  if (seed.size() != grid.size()) throw ArgumentError("blind_direction: seed length mismatch");
  const double dt = grid.spacing();
  if (eig.lambdas[M - 1] * dt > 20.0) {
    throw ArgumentError("blind_direction: time grid does not resolve e^{lambda_M t} "
                        "(lambda_M dt > 20)");
  }
  grid.require_node(t_obs, "observation time");
  const std::vector<double> w = trapezoid_weights(grid);
  const std::size_t nt = grid.size();
  auto winner = [&](std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t j = 0; j < nt; ++j) acc += w[j] * a[j] * b[j];
    return acc;
  };

  std::vector<std::vector<double>> covectors(domain.begin(), domain.end());
  for (std::size_t n = 0; n < M; ++n) {
    covectors.push_back(exp_hat_weights(grid, std::max(eig.lambdas[n], 0.0), t_obs));
  }
  std::vector<std::vector<double>> basis;
  for (auto& v : covectors) {
    if (v.size() != nt) throw ArgumentError("blind_direction: constraint length mismatch");
    for (std::size_t j = 0; j < nt; ++j) v[j] /= w[j];
    const double norm0 = std::sqrt(winner(v, v));
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& u : basis) {
        const double c = winner(u, v);
        for (std::size_t j = 0; j < nt; ++j) v[j] -= c * u[j];
      }
    }
    const double norm = std::sqrt(winner(v, v));
    if (!(norm > 1e-13 * norm0)) continue;
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }

  BlindDirection out;
  out.retained = basis.size();
  out.values.assign(seed.begin(), seed.end());
  const double seed_norm = std::sqrt(winner(seed, seed));
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& u : basis) {
      const double c = winner(u, out.values);
      for (std::size_t j = 0; j < nt; ++j) out.values[j] -= c * u[j];
    }
  }
  const double g_norm_w = std::sqrt(winner(out.values, out.values));
  if (!(g_norm_w > 1e-10 * seed_norm)) {
    throw DegenerateSeedError("blind_direction: seed lies in the span of the exponentials");
  }

  const double g_norm = detail::l2_norm(out.values, grid);
  for (std::size_t n = 0; n < M; ++n) {
    const double lam = std::max(eig.lambdas[n], 0.0);
    const double e_norm = std::sqrt(detail::exp_pair_integral(lam, lam, t_obs));
    const double p = std::abs(exp_inner(out.values, grid, lam, t_obs)) / (g_norm * e_norm);
    out.projections.push_back(p);
    out.max_projection = std::max(out.max_projection, p);
  }

  Eigen::MatrixXd gram(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t n = 0; n < M; ++n) {
      const double lm = std::max(eig.lambdas[m], 0.0), ln = std::max(eig.lambdas[n], 0.0);
      gram(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n)) =
          detail::exp_pair_integral(lm, ln, t_obs) /
          std::sqrt(detail::exp_pair_integral(lm, lm, t_obs) * detail::exp_pair_integral(ln, ln, t_obs));
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  out.gram_min_eigenvalue = es.eigenvalues().minCoeff();
  out.gram_max_eigenvalue = es.eigenvalues().maxCoeff();
  const double floor = std::numeric_limits<double>::epsilon() * out.gram_max_eigenvalue;
  out.gram_log10_condition =
      std::log10(out.gram_max_eigenvalue / std::max(out.gram_min_eigenvalue, floor));
  return out;
}

/// Direction in which an observation at t_obs informs the initial condition:
/// sum_n a_n e^{-lambda_n t_obs} rho_n(z).
inline std::vector<double> ic_gain_direction(const EigenSystem& eig, std::span<const double> a,
                                             double t_obs) {
  if (!(t_obs > 0.0)) throw ArgumentError("ic_gain_direction: t_obs must be positive");
  if (a.size() > eig.size()) throw ArgumentError("ic_gain_direction: more coefficients than modes");
  std::vector<double> out(eig.grid().size(), 0.0);
  for (std::size_t n = 0; n < a.size(); ++n) {
    const double c = a[n] * std::exp(-eig.lambdas[n] * t_obs);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += c * eig.modes[n][j];
  }
  return out;
}

}  // namespace colflux
