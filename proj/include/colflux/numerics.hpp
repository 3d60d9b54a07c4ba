#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "colflux/errors.hpp"

namespace colflux {

struct ColumnTag {
  static constexpr std::size_t min_nodes = 3;
  static constexpr const char* name = "column grid";
};

struct TimeTag {
  static constexpr std::size_t min_nodes = 2;
  static constexpr const char* name = "time grid";
};

/// Uniform grid on [0, length]. The tag keeps column (z) and time (t) grids
/// from being mixed up at compile time.
template <typename Tag>
class UniformGrid {
 public:
  UniformGrid(double length, std::size_t n_nodes) : length_(length), n_(n_nodes) {
    if (!(length > 0.0) || !std::isfinite(length)) {
      throw ArgumentError(std::string(Tag::name) + ": length must be positive and finite");
    }
    if (n_nodes < Tag::min_nodes) {
      throw ArgumentError(std::string(Tag::name) + ": needs at least " +
                          std::to_string(Tag::min_nodes) + " nodes");
    }
  }

  double length() const noexcept { return length_; }
  std::size_t size() const noexcept { return n_; }
  double spacing() const noexcept { return length_ / static_cast<double>(n_ - 1); }

  double node(std::size_t i) const noexcept {
    // last node is pinned to the exact length
    return i + 1 == n_ ? length_ : static_cast<double>(i) * spacing();
  }

  std::vector<double> nodes() const {
    std::vector<double> out(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = node(i);
    return out;
  }

  /// Index of the node at `x`, if `x` lies on the grid (to 1e-9 of a cell).
  std::optional<std::size_t> index_of(double x) const noexcept {
    if (!std::isfinite(x)) return std::nullopt;
    const double s = x / spacing();
    const double r = std::round(s);
    if (r < 0.0 || r > static_cast<double>(n_ - 1)) return std::nullopt;
    if (std::abs(s - r) > 1e-9) return std::nullopt;
    return static_cast<std::size_t>(r);
  }

  std::size_t require_node(double x, const char* what = "value") const {
    auto idx = index_of(x);
    if (!idx) {
      throw ArgumentError(std::string(what) + " " + std::to_string(x) + " is not a node of the " +
                          Tag::name);
    }
    return *idx;
  }

  bool operator==(const UniformGrid& other) const noexcept {
    return n_ == other.n_ && length_ == other.length_;
  }

 private:
  double length_;
  std::size_t n_;
};

using ColumnGrid = UniformGrid<ColumnTag>;
using TimeGrid = UniformGrid<TimeTag>;

template <typename Tag>
std::vector<double> trapezoid_weights(const UniformGrid<Tag>& grid) {
  std::vector<double> w(grid.size(), grid.spacing());
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

template <typename Tag>
double trapezoid(std::span<const double> values, const UniformGrid<Tag>& grid) {
  if (values.size() != grid.size()) {
    throw ArgumentError("trapezoid: " + std::to_string(values.size()) + " values for a grid of " +
                        std::to_string(grid.size()) + " nodes");
  }
  double interior = 0.0;
  for (std::size_t i = 1; i + 1 < values.size(); ++i) interior += values[i];
  return grid.spacing() * (interior + 0.5 * (values.front() + values.back()));
}

/// Running trapezoid integral, out[i] = integral over [x_0, x_i].
template <typename Tag>
std::vector<double> cumulative_trapezoid(std::span<const double> values,
                                         const UniformGrid<Tag>& grid) {
  if (values.size() != grid.size()) throw ArgumentError("cumulative_trapezoid: length mismatch");
  std::vector<double> out(values.size(), 0.0);
  const double h = grid.spacing();
  for (std::size_t i = 1; i < values.size(); ++i) {
    out[i] = out[i - 1] + 0.5 * h * (values[i - 1] + values[i]);
  }
  return out;
}

namespace detail {

/// Below this value of lambda*dt the segment integrals use their Taylor series.
inline constexpr double kExpSeriesThreshold = 1e-6;

// Integrals over tau in [0,1] of (1 - tau) e^{-x tau} and tau e^{-x tau}.
inline double phi_far(double x) noexcept {
  if (x < kExpSeriesThreshold) return 0.5 - x / 6.0 + x * x / 24.0;
  return (x + std::expm1(-x)) / (x * x);
}

inline double phi_near(double x) noexcept {
  if (x < kExpSeriesThreshold) return 0.5 - x / 3.0 + x * x / 8.0;
  return (-std::expm1(-x) - x * std::exp(-x)) / (x * x);
}

}  // namespace detail

/// Hat-function weights l such that dot(l, g) is the exact integral
/// over [0, t_obs] of g(s) e^{lambda (s - t_obs)} for the piecewise-linear
/// interpolant of g. Entries past t_obs are zero.
inline std::vector<double> exp_hat_weights(const TimeGrid& grid, double lambda, double t_obs) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ArgumentError("exp_inner: lambda must be finite and nonnegative");
  }
  const std::size_t m = grid.require_node(t_obs, "observation time");
  const double dt = grid.spacing();
  const double x = lambda * dt;
  const double far = detail::phi_far(x) * dt;
  const double near = detail::phi_near(x) * dt;
  std::vector<double> l(grid.size(), 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    // segment [t_j, t_{j+1}], right end sits (m - j - 1) cells before t_obs
    const double e = std::exp(-x * static_cast<double>(m - j - 1));
    if (e == 0.0) continue;
    l[j + 1] += e * far;
    l[j] += e * near;
  }
  return l;
}

/// Exact integral of g(s) e^{lambda (s - t_obs)} over [0, t_obs] for
/// piecewise-linear g on the time grid.
inline double exp_inner(std::span<const double> g, const TimeGrid& grid, double lambda,
                        double t_obs) {
  if (g.size() != grid.size()) throw ArgumentError("exp_inner: length mismatch");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ArgumentError("exp_inner: lambda must be finite and nonnegative");
  }
  const std::size_t m = grid.require_node(t_obs, "observation time");
  const double dt = grid.spacing();
  const double x = lambda * dt;
  const double far = detail::phi_far(x);
  const double near = detail::phi_near(x);
  const double decay = std::exp(-x);
  double acc = 0.0;
  double e = 1.0;
  for (std::size_t j = m; j-- > 0;) {
    acc += e * (far * g[j + 1] + near * g[j]);
    e *= decay;
    if (e < 1e-300) break;
  }
  return acc * dt;
}

/// LU factorisation of a tridiagonal matrix without pivoting; used where the
/// matrix is diagonally dominant (Crank-Nicolson operators).
///
/// Conventions: lower[i] = A(i+1, i), upper[i] = A(i, i+1), both length n-1.
class TridiagonalLU {
 public:
  TridiagonalLU() = default;

  TridiagonalLU(std::span<const double> lower, std::span<const double> diag,
                std::span<const double> upper) {
    const std::size_t n = diag.size();
    if (n == 0 || lower.size() + 1 != n || upper.size() + 1 != n) {
      throw ArgumentError("tridiagonal: band lengths do not match");
    }
    l_.assign(n, 0.0);
    u_.assign(n, 0.0);
    c_.assign(upper.begin(), upper.end());
    u_[0] = diag[0];
    check_pivot(0, std::abs(diag[0]) + (n > 1 ? std::abs(upper[0]) : 0.0));
    for (std::size_t i = 1; i < n; ++i) {
      l_[i] = lower[i - 1] / u_[i - 1];
      u_[i] = diag[i] - l_[i] * upper[i - 1];
      const double scale = std::abs(diag[i]) + std::abs(lower[i - 1]) +
                           (i + 1 < n ? std::abs(upper[i]) : 0.0);
      check_pivot(i, scale);
    }
  }

  std::size_t size() const noexcept { return u_.size(); }

  void solve_in_place(std::span<double> x) const {
    const std::size_t n = u_.size();
    if (x.size() != n) throw ArgumentError("tridiagonal solve: rhs length mismatch");
    for (std::size_t i = 1; i < n; ++i) x[i] -= l_[i] * x[i - 1];
    x[n - 1] /= u_[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = (x[i] - c_[i] * x[i + 1]) / u_[i];
  }

  /// Solves A^T x = b with the same factors.
  void solve_transpose_in_place(std::span<double> x) const {
    const std::size_t n = u_.size();
    if (x.size() != n) throw ArgumentError("tridiagonal solve: rhs length mismatch");
    x[0] /= u_[0];
    for (std::size_t i = 1; i < n; ++i) x[i] = (x[i] - c_[i - 1] * x[i - 1]) / u_[i];
    for (std::size_t i = n - 1; i-- > 0;) x[i] -= l_[i + 1] * x[i + 1];
  }

 private:
  void check_pivot(std::size_t i, double scale) const {
    if (!(std::abs(u_[i]) > 1e-14 * scale) || !std::isfinite(u_[i])) {
      throw SingularityError("tridiagonal: zero pivot at row " + std::to_string(i));
    }
  }

  std::vector<double> l_;  // multipliers, l_[0] unused
  std::vector<double> u_;  // pivots
  std::vector<double> c_;  // superdiagonal
};

inline std::vector<double> solve_tridiagonal(std::span<const double> lower,
                                             std::span<const double> diag,
                                             std::span<const double> upper,
                                             std::span<const double> rhs) {
  if (rhs.size() != diag.size()) throw ArgumentError("solve_tridiagonal: rhs length mismatch");
  TridiagonalLU lu(lower, diag, upper);
  std::vector<double> x(rhs.begin(), rhs.end());
  lu.solve_in_place(x);
  return x;
}

/// y = A x for a tridiagonal A in the same band convention.
inline void tridiagonal_multiply(std::span<const double> lower, std::span<const double> diag,
                                 std::span<const double> upper, std::span<const double> x,
                                 std::span<double> y) {
  const std::size_t n = diag.size();
  for (std::size_t i = 0; i < n; ++i) {
    double v = diag[i] * x[i];
    if (i > 0) v += lower[i - 1] * x[i - 1];
    if (i + 1 < n) v += upper[i] * x[i + 1];
    y[i] = v;
  }
}

namespace detail {

/// Gaussian elimination with partial pivoting (LAPACK gtsv scheme) for
/// indefinite shifted systems. Exact zero pivots are replaced by a tiny
/// multiple of the matrix scale, which is what inverse iteration wants.
inline std::vector<double> solve_tridiagonal_pivoted(std::vector<double> dl, std::vector<double> d,
                                                     std::vector<double> du,
                                                     std::vector<double> b) {
  const std::size_t n = d.size();
  double scale = 0.0;
  for (double v : d) scale = std::max(scale, std::abs(v));
  for (double v : dl) scale = std::max(scale, std::abs(v));
  for (double v : du) scale = std::max(scale, std::abs(v));
  const double tiny = std::numeric_limits<double>::epsilon() * std::max(scale, 1e-300);
  if (n == 1) {
    return {b[0] / (d[0] != 0.0 ? d[0] : tiny)};
  }
  std::vector<double> du2(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (std::abs(d[i]) >= std::abs(dl[i])) {
      if (d[i] == 0.0) d[i] = tiny;
      const double fact = dl[i] / d[i];
      d[i + 1] -= fact * du[i];
      b[i + 1] -= fact * b[i];
      du2[i] = 0.0;
    } else {
      const double fact = d[i] / dl[i];
      d[i] = dl[i];
      const double temp = d[i + 1];
      d[i + 1] = du[i] - fact * temp;
      if (i + 2 < n) {
        du2[i] = du[i + 1];
        du[i + 1] = -fact * du2[i];
      }
      du[i] = temp;
      const double tb = b[i];
      b[i] = b[i + 1];
      b[i + 1] = tb - fact * b[i + 1];
    }
  }
  if (d[n - 1] == 0.0) d[n - 1] = tiny;
  b[n - 1] /= d[n - 1];
  b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
  for (std::size_t i = n - 2; i-- > 0;) {
    b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
  }
  return b;
}

}  // namespace detail

}  // namespace colflux
