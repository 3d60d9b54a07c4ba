#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Eigenvalues>

#include "colflux/errors.hpp"
#include "colflux/model.hpp"
#include "colflux/numerics.hpp"
#include "colflux/transport.hpp"

namespace colflux {

/// Eigenpairs (lambda_n, rho_n) of the adjoint problem
///   (k p')' + w p' + lambda p = 0,  p'(0) = p'(h) = 0,
/// discretised as the exact transpose of the transport operator. Modes are
/// scaled so rho_n(0) = 1; `mu` is the discrete symmetrising weight, which
/// makes the modes orthogonal in sum_j V_j mu_j rho_m rho_n.
struct EigenSystem {
  CoefficientProfile profile;
  std::vector<double> mu;
  std::vector<double> lambdas;
  std::vector<std::vector<double>> modes;
  std::vector<double> mu_norms;
  std::vector<double> volumes;

  std::size_t size() const noexcept { return lambdas.size(); }
  const ColumnGrid& grid() const noexcept { return profile.grid(); }
  double k_surface() const noexcept { return profile.k_surface(); }

  /// sum_j V_j mu_j f_j g_j
  double mu_inner(std::span<const double> f, std::span<const double> g) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < mu.size(); ++j) acc += volumes[j] * mu[j] * f[j] * g[j];
    return acc;
  }

  /// max/min of the mode norms, the empirical two-sided bound constant.
  double norm_bound_ratio() const {
    const auto [lo, hi] = std::minmax_element(mu_norms.begin(), mu_norms.end());
    return *hi / *lo;
  }
};

namespace detail {

/// Discrete mu from the symmetriser of L^T: mu_{j+1}/mu_j = L(j+1,j)/L(j,j+1).
inline std::vector<double> discrete_mu(const TransportOperator& op) {
  std::vector<double> mu(op.size(), 1.0);
  for (std::size_t j = 0; j + 1 < op.size(); ++j) mu[j + 1] = mu[j] * op.lower[j] / op.upper[j];
  return mu;
}

/// Dirichlet-form Rayleigh quotient; exact zero for constant vectors.
inline double rayleigh(const TransportOperator& op, std::span<const double> mu,
                       std::span<const double> rho) {
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j + 1 < rho.size(); ++j) {
    const double d = rho[j + 1] - rho[j];
    num += mu[j] * op.lower[j] * d * d;
  }
  for (std::size_t j = 0; j < rho.size(); ++j) den += op.volumes[j] * mu[j] * rho[j] * rho[j];
  return num / den;
}

}  // namespace detail

inline EigenSystem eigensystem(const CoefficientProfile& profile, std::size_t n_modes) {
  const std::size_t n = profile.grid().size();
  if (n_modes == 0) throw ArgumentError("eigensystem: n_modes must be positive");
  if (n_modes > n / 8) {
    throw ArgumentError("eigensystem: n_modes = " + std::to_string(n_modes) +
                        " exceeds the resolution guard nz/8 = " + std::to_string(n / 8));
  }
  const TransportOperator op(profile);

  // S = (DV)^{-1/2} (-D L^T) (DV)^{-1/2}, symmetric tridiagonal, PSD.
  Eigen::VectorXd sd(n), se(n - 1);
  for (std::size_t j = 0; j < n; ++j) sd[j] = -op.diag[j] / op.volumes[j];
  for (std::size_t j = 0; j + 1 < n; ++j) {
    se[j] = -std::sqrt(op.lower[j] * op.upper[j] / (op.volumes[j] * op.volumes[j + 1]));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(sd, se, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("eigensystem: tridiagonal QR did not converge");
  }
  const Eigen::VectorXd& evals = solver.eigenvalues();

  EigenSystem es{profile, detail::discrete_mu(op), {}, {}, {}, op.volumes};
  std::vector<double> sqrt_dv(n);
  for (std::size_t j = 0; j < n; ++j) sqrt_dv[j] = std::sqrt(es.mu[j] * op.volumes[j]);

  // Inverse iteration on S for each wanted eigenvalue, with reorthogonalisation
  // against the lower modes in the symmetric (x) coordinates.
  std::vector<std::vector<double>> xs;
  xs.reserve(n_modes);
  std::vector<double> dl(se.data(), se.data() + n - 1);
  for (std::size_t k = 0; k < n_modes; ++k) {
    const double shift = evals[static_cast<Eigen::Index>(k)];
    std::vector<double> d(n);
    for (std::size_t j = 0; j < n; ++j) d[j] = sd[j] - shift;
    std::vector<double> x(n);
    for (std::size_t j = 0; j < n; ++j) {
      // deterministic start with components along every mode
      x[j] = 1.0 + 0.5 * std::sin(0.7 * static_cast<double>(j) + 0.3 * static_cast<double>(k));
    }
    auto orthonormalise = [&] {
      for (int pass = 0; pass < 2; ++pass) {
        for (const auto& prev : xs) {
          double c = 0.0;
          for (std::size_t j = 0; j < n; ++j) c += prev[j] * x[j];
          for (std::size_t j = 0; j < n; ++j) x[j] -= c * prev[j];
        }
      }
      double norm = 0.0;
      for (double v : x) norm += v * v;
      norm = std::sqrt(norm);
      if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw NumericalError("eigensystem: inverse iteration collapsed at mode " + std::to_string(k));
      }
      for (double& v : x) v /= norm;
    };
    orthonormalise();
    for (int it = 0; it < 3; ++it) {
      x = detail::solve_tridiagonal_pivoted(dl, d, dl, x);
      orthonormalise();
    }
    xs.push_back(x);
  }

  for (std::size_t k = 0; k < n_modes; ++k) {
    std::vector<double> rho(n);
    for (std::size_t j = 0; j < n; ++j) rho[j] = xs[k][j] / sqrt_dv[j];
    // rho here has unit mu-norm; the surface value must be bounded away from 0
    if (!(std::abs(rho[0]) >= 1e-8)) {
      throw NumericalError("eigensystem: mode " + std::to_string(k) +
                           " vanishes at the surface and cannot be normalised to rho(0) = 1");
    }
    const double s = 1.0 / rho[0];
    for (double& v : rho) v *= s;
    rho[0] = 1.0;
    es.lambdas.push_back(detail::rayleigh(op, es.mu, rho));
    es.mu_norms.push_back(es.mu_inner(rho, rho));
    es.modes.push_back(std::move(rho));
  }
  for (std::size_t k = 1; k < n_modes; ++k) {
    if (!(es.lambdas[k] > es.lambdas[k - 1])) {
      throw NumericalError("eigensystem: eigenvalues not strictly increasing at index " +
                           std::to_string(k));
    }
  }
  return es;
}

struct WeightExpansion {
  std::vector<double> coefficients;
  /// || rho - sum a_n rho_n || in the discrete L2(mu) norm
  double residual = 0.0;
};

inline constexpr double kNegativityTolerance = 1e-9;

inline WeightExpansion expand_weight(std::span<const double> rho, const EigenSystem& eig) {
  if (rho.size() != eig.grid().size()) throw ArgumentError("expand_weight: length mismatch");
  double scale = 1.0;
  for (double v : rho) scale = std::max(scale, std::abs(v));
  for (std::size_t j = 0; j < rho.size(); ++j) {
    if (!std::isfinite(rho[j])) throw ArgumentError("expand_weight: weight must be finite");
    if (rho[j] < -kNegativityTolerance * scale) {
      throw WeightPositivityError("expand_weight: weight is negative at z = " +
                                  std::to_string(eig.grid().node(j)));
    }
  }
  WeightExpansion out;
  std::vector<double> rem(rho.begin(), rho.end());
  for (std::size_t n = 0; n < eig.size(); ++n) {
    const double a = eig.mu_inner(rho, eig.modes[n]) / eig.mu_norms[n];
    out.coefficients.push_back(a);
    for (std::size_t j = 0; j < rem.size(); ++j) rem[j] -= a * eig.modes[n][j];
  }
  out.residual = std::sqrt(std::max(0.0, eig.mu_inner(rem, rem)));
  return out;
}

/// Relative level below which a weight value counts as negative.

struct SynthesizedWeight {
  std::vector<double> values;
  double min_value = 0.0;
  /// set when the sum dips below zero (beyond rounding); not an error
  bool negative = false;
};

inline SynthesizedWeight synthesize_weight(std::span<const double> a, const EigenSystem& eig) {
  if (a.size() > eig.size()) {
    throw ArgumentError("synthesize_weight: more coefficients than computed modes");
  }
  const std::size_t nz = eig.grid().size();
  SynthesizedWeight out{std::vector<double>(nz, 0.0), 0.0, false};
  double scale = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) {
    if (!std::isfinite(a[n])) throw ArgumentError("synthesize_weight: coefficients must be finite");
    for (std::size_t j = 0; j < nz; ++j) out.values[j] += a[n] * eig.modes[n][j];
    scale += std::abs(a[n]);
  }
  out.min_value = *std::min_element(out.values.begin(), out.values.end());
  out.negative = out.min_value < -kNegativityTolerance * std::max(scale, 1.0);
  return out;
}

struct MuntzSums {
  std::vector<double> parabolic;   // S_M = sum_{n<M} 1/(1+lambda_n)
  std::vector<double> hyperbolic;  // T_M = sum_{n<M} 1/(1+sqrt(lambda_n))
  double growth_constant = 0.0;    // c in lambda_n ~ c n^2 + d
  double growth_offset = 0.0;      // d
  /// S_M plus the tail of the fitted c n^2 law, an estimate of the limit of S
  double parabolic_limit = 0.0;
  /// max over fitted modes of |lambda_n/n^2 - c|
  double max_growth_deviation = 0.0;
};

inline MuntzSums muntz_partial_sums(const EigenSystem& eig) {
  MuntzSums out;
  double s = 0.0, t = 0.0;
  for (double lam : eig.lambdas) {
    const double l = std::max(lam, 0.0);
    s += 1.0 / (1.0 + l);
    t += 1.0 / (1.0 + std::sqrt(l));
    out.parabolic.push_back(s);
    out.hyperbolic.push_back(t);
  }
  // least squares lambda_n = c n^2 + d over n >= 1
  const std::size_t m = eig.size();
  if (m >= 3) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0, cnt = 0;
    for (std::size_t n = 1; n < m; ++n) {
      const double x = static_cast<double>(n * n);
      sx += x;
      sy += eig.lambdas[n];
      sxx += x * x;
      sxy += x * eig.lambdas[n];
      cnt += 1.0;
    }
    out.growth_constant = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    out.growth_offset = (sy - out.growth_constant * sx) / cnt;
  } else if (m == 2) {
    out.growth_constant = eig.lambdas[1];
  }
  for (std::size_t n = 1; n < m; ++n) {
    const double dev =
        std::abs(eig.lambdas[n] / static_cast<double>(n * n) - out.growth_constant);
    out.max_growth_deviation = std::max(out.max_growth_deviation, dev);
  }
  out.parabolic_limit = s;
  if (out.growth_constant > 0.0 && m > 0) {
    // sum_{n >= M} 1/(c n^2) ~ 1/(c (M - 1/2))
    out.parabolic_limit += 1.0 / (out.growth_constant * (static_cast<double>(m) - 0.5));
  }
  return out;
}

}  // namespace colflux
