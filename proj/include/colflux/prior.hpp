#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "colflux/errors.hpp"
#include "colflux/numerics.hpp"
#include "colflux/transport.hpp"

namespace colflux {

enum class PriorKind {
  dirichlet,  // C0 = -sigma^2 (d/dt)^{-2}, G(0) = G(t_N) = 0
  periodic,   // same on periodic zero-mean functions
  diagonal,   // C0 = sigma^2 I
};

inline const char* to_string(PriorKind kind) {
  switch (kind) {
    case PriorKind::dirichlet: return "dirichlet";
    case PriorKind::periodic: return "periodic";
    case PriorKind::diagonal: return "diagonal";
  }
  return "unknown";
}

/// Gaussian prior on the flux. Deviations G = F - F0 live in a "free"
/// coordinate space: interior nodes (dirichlet), nodes 0..N-1 with G_N = G_0
/// and zero sum (periodic), or every node (diagonal). In free coordinates the
/// prior form is x^T K x with K = W A, W the quadrature weights and A the
/// 3-point discretisation of C0^{-1}.
class PriorSpec {
 public:
  PriorSpec(FluxSignal mean, PriorKind kind, double sigma)
      : mean_(std::move(mean)), kind_(kind), sigma_(sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
      throw ArgumentError("PriorSpec: sigma must be positive");
    }
    const std::size_t nt = mean_.size();
    if (kind_ == PriorKind::dirichlet && nt < 3) {
      throw ArgumentError("PriorSpec: dirichlet prior needs at least 3 time nodes");
    }
    if (kind_ == PriorKind::periodic) {
      if (nt < 4) throw ArgumentError("PriorSpec: periodic prior needs at least 4 time nodes");
      std::vector<double> v(mean_.values().begin(), mean_.values().end());
      const double scale = std::max(1.0, std::abs(v.front()) + std::abs(v.back()));
      if (std::abs(v.front() - v.back()) > 1e-10 * scale) {
        throw DomainError("PriorSpec: periodic prior mean must satisfy F0(0) = F0(t_N)");
      }
      const double mean = std::accumulate(v.begin(), v.end() - 1, 0.0) / static_cast<double>(nt - 1);
      for (double& x : v) x -= mean;
      mean_ = FluxSignal(mean_.grid(), std::move(v));
    }
  }

  const FluxSignal& mean() const noexcept { return mean_; }
  PriorKind kind() const noexcept { return kind_; }
  double sigma() const noexcept { return sigma_; }
  const TimeGrid& grid() const noexcept { return mean_.grid(); }
  std::size_t full_size() const noexcept { return mean_.size(); }

  std::size_t free_size() const noexcept {
    const std::size_t nt = full_size();
    switch (kind_) {
      case PriorKind::dirichlet: return nt - 2;
      case PriorKind::periodic: return nt - 1;
      case PriorKind::diagonal: return nt;
    }
    return nt;
  }

  std::size_t free_offset() const noexcept { return kind_ == PriorKind::dirichlet ? 1 : 0; }

  std::vector<double> restrict_to_free(std::span<const double> full) const {
    check_full(full);
    const std::size_t off = free_offset();
    return std::vector<double>(full.begin() + static_cast<std::ptrdiff_t>(off),
                               full.begin() + static_cast<std::ptrdiff_t>(off + free_size()));
  }

  /// E x: non-free nodes zero, periodic end node mirrors node 0.
  std::vector<double> embed(std::span<const double> x) const {
    check_free(x);
    std::vector<double> full(full_size(), 0.0);
    std::copy(x.begin(), x.end(), full.begin() + static_cast<std::ptrdiff_t>(free_offset()));
    if (kind_ == PriorKind::periodic) full.back() = x[0];
    return full;
  }

  /// E^T y for a covector on the full nodes.
  std::vector<double> embed_transpose(std::span<const double> y) const {
    check_full(y);
    std::vector<double> x = restrict_to_free(y);
    if (kind_ == PriorKind::periodic) x[0] += y.back();
    return x;
  }

  /// Quadrature weights of the free nodes.
  std::vector<double> free_weights() const {
    const double dt = grid().spacing();
    if (kind_ == PriorKind::diagonal) return trapezoid_weights(grid());
    return std::vector<double>(free_size(), dt);
  }

  /// Throws DomainError unless G is an admissible deviation from the mean.
  void check_domain(std::span<const double> g, const char* what = "function") const {
    check_full(g);
    double scale = 1.0;
    for (double v : g) scale = std::max(scale, std::abs(v));
    const double tol = 1e-10 * scale;
    if (kind_ == PriorKind::dirichlet) {
      if (std::abs(g.front()) > tol || std::abs(g.back()) > tol) {
        throw DomainError(std::string(what) + " must vanish at both ends for the dirichlet prior");
      }
    } else if (kind_ == PriorKind::periodic) {
      if (std::abs(g.front() - g.back()) > tol) {
        throw DomainError(std::string(what) + " must be periodic for the periodic prior");
      }
      const double s = std::accumulate(g.begin(), g.end() - 1, 0.0);
      if (std::abs(s) > tol * static_cast<double>(g.size())) {
        throw DomainError(std::string(what) + " must have zero mean for the periodic prior");
      }
    }
  }

  /// Discrete C0^{-1} G on the full nodes (zero at non-free nodes).
  std::vector<double> apply_inverse(std::span<const double> g) const {
    check_domain(g);
    const std::size_t nt = full_size();
    const double dt = grid().spacing();
    const double c = 1.0 / (sigma_ * sigma_);
    std::vector<double> out(nt, 0.0);
    switch (kind_) {
      case PriorKind::diagonal:
        for (std::size_t j = 0; j < nt; ++j) out[j] = c * g[j];
        break;
      case PriorKind::dirichlet:
        for (std::size_t j = 1; j + 1 < nt; ++j) {
          out[j] = c * (2.0 * g[j] - g[j - 1] - g[j + 1]) / (dt * dt);
        }
        break;
      case PriorKind::periodic: {
        const std::size_t n = nt - 1;
        for (std::size_t j = 0; j < n; ++j) {
          const double left = g[(j + n - 1) % n];
          const double right = g[(j + 1) % n];
          out[j] = c * (2.0 * g[j] - left - right) / (dt * dt);
        }
        out[n] = out[0];
        break;
      }
    }
    return out;
  }

  /// <C0^{-1/2} g1, C0^{-1/2} g2>; exact for piecewise-linear functions.
  double form(std::span<const double> g1, std::span<const double> g2) const {
    check_domain(g1);
    check_domain(g2);
    const double dt = grid().spacing();
    const double c = 1.0 / (sigma_ * sigma_);
    if (kind_ == PriorKind::diagonal) {
      const auto w = trapezoid_weights(grid());
      double acc = 0.0;
      for (std::size_t j = 0; j < w.size(); ++j) acc += w[j] * g1[j] * g2[j];
      return c * acc;
    }
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < g1.size(); ++j) {
      acc += (g1[j + 1] - g1[j]) * (g2[j + 1] - g2[j]);
    }
    return c * acc / dt;
  }

  /// K x in free coordinates.
  std::vector<double> stiffness_multiply(std::span<const double> x) const {
    check_free(x);
    const std::size_t n = x.size();
    const double dt = grid().spacing();
    const double c = 1.0 / (sigma_ * sigma_);
    std::vector<double> y(n, 0.0);
    if (kind_ == PriorKind::diagonal) {
      const auto w = free_weights();
      for (std::size_t j = 0; j < n; ++j) y[j] = c * w[j] * x[j];
      return y;
    }
    const bool cyclic = kind_ == PriorKind::periodic;
    for (std::size_t j = 0; j < n; ++j) {
      double left = j > 0 ? x[j - 1] : (cyclic ? x[n - 1] : 0.0);
      double right = j + 1 < n ? x[j + 1] : (cyclic ? x[0] : 0.0);
      y[j] = c * (2.0 * x[j] - left - right) / dt;
    }
    return y;
  }

  /// Pseudo-inverse of K: solves K x = b (b projected onto the range first for
  /// the periodic kind; the returned x then has zero sum).
  std::vector<double> covariance_solve(std::span<const double> b) const {
    check_free(b);
    const std::size_t n = b.size();
    const double dt = grid().spacing();
    const double c = 1.0 / (sigma_ * sigma_);
    if (kind_ == PriorKind::diagonal) {
      const auto w = free_weights();
      std::vector<double> x(n);
      for (std::size_t j = 0; j < n; ++j) x[j] = b[j] / (c * w[j]);
      return x;
    }
    if (kind_ == PriorKind::dirichlet) {
      std::vector<double> lo(n - 1, -c / dt), di(n, 2.0 * c / dt), up(n - 1, -c / dt);
      return solve_tridiagonal(lo, di, up, b);
    }
    // periodic: pin x_0 = 0, the remaining rows form a dirichlet-type system
    std::vector<double> rhs(b.begin(), b.end());
    project(rhs);
    const std::size_t m = n - 1;
    std::vector<double> lo(m - 1, -c / dt), di(m, 2.0 * c / dt), up(m - 1, -c / dt);
    std::vector<double> sub(rhs.begin() + 1, rhs.end());
    TridiagonalLU(lo, di, up).solve_in_place(sub);
    std::vector<double> x(n, 0.0);
    std::copy(sub.begin(), sub.end(), x.begin() + 1);
    project(x);
    return x;
  }

  /// Removes the constant component (periodic kind only).
  void project(std::span<double> x) const {
    if (kind_ != PriorKind::periodic) return;
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    for (double& v : x) v -= mean;
  }

  /// Nodal functionals that vanish exactly on the admissible deviations.
  std::vector<std::vector<double>> domain_functionals() const {
    const std::size_t nt = full_size();
    std::vector<std::vector<double>> out;
    if (kind_ == PriorKind::dirichlet) {
      out.emplace_back(nt, 0.0);
      out.back().front() = 1.0;
      out.emplace_back(nt, 0.0);
      out.back().back() = 1.0;
    } else if (kind_ == PriorKind::periodic) {
      out.emplace_back(nt, 0.0);
      out.back().front() = 1.0;
      out.back().back() = -1.0;
      out.emplace_back(nt, 1.0);
      out.back().back() = 0.0;
    }
    return out;
  }

  Eigen::MatrixXd stiffness_matrix() const {
    const std::size_t n = free_size();
    Eigen::MatrixXd K(n, n);
    std::vector<double> e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      e[j] = 1.0;
      const auto col = stiffness_multiply(e);
      for (std::size_t i = 0; i < n; ++i) K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
      e[j] = 0.0;
    }
    return K;
  }

  /// Orthonormal basis of the constraint subspace in free coordinates
  /// (identity unless periodic).
  Eigen::MatrixXd constraint_basis() const {
    const auto n = static_cast<Eigen::Index>(free_size());
    if (kind_ != PriorKind::periodic) return Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(n, 1);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(ones);
    Eigen::MatrixXd q = qr.householderQ();
    return q.rightCols(n - 1);
  }

 private:
  void check_full(std::span<const double> v) const {
    if (v.size() != full_size()) throw ArgumentError("prior: expected one value per time node");
  }
  void check_free(std::span<const double> v) const {
    if (v.size() != free_size()) throw ArgumentError("prior: expected free-coordinate vector");
  }

  FluxSignal mean_;
  PriorKind kind_;
  double sigma_;
};

/// C0^{-1} G, the prior precision applied to an admissible function.
inline std::vector<double> prior_apply_inverse(const PriorSpec& spec, std::span<const double> g) {
  return spec.apply_inverse(g);
}

}  // namespace colflux
