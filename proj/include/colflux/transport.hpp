#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "colflux/errors.hpp"
#include "colflux/model.hpp"
#include "colflux/numerics.hpp"

namespace colflux {

/// Surface flux F(t) sampled on a time grid; the piecewise-linear
/// interpolant is the continuous object. Positive F adds tracer to the column.
class FluxSignal {
 public:
  FluxSignal(TimeGrid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) {
      throw ArgumentError("FluxSignal: one value per time node required");
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw ArgumentError("FluxSignal: values must be finite");
    }
  }

  static FluxSignal constant(TimeGrid grid, double value) {
    return FluxSignal(grid, std::vector<double>(grid.size(), value));
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t m) const noexcept { return values_[m]; }

  double value_at(double t) const {
    const double dt = grid_.spacing();
    const double s = std::clamp(t / dt, 0.0, static_cast<double>(grid_.size() - 1));
    const auto i = std::min(static_cast<std::size_t>(s), grid_.size() - 2);
    const double frac = s - static_cast<double>(i);
    return (1.0 - frac) * values_[i] + frac * values_[i + 1];
  }

 private:
  TimeGrid grid_;
  std::vector<double> values_;
};

/// q(z_j, t_m) for all column and time nodes; time slices are contiguous.
class MixingRatioField {
 public:
  MixingRatioField(ColumnGrid column, TimeGrid time)
      : column_(column), time_(time), data_(column.size() * time.size(), 0.0) {}

  const ColumnGrid& column_grid() const noexcept { return column_; }
  const TimeGrid& time_grid() const noexcept { return time_; }

  double at(std::size_t j, std::size_t m) const noexcept { return data_[m * column_.size() + j]; }

  std::span<const double> slice(std::size_t m) const noexcept {
    return {data_.data() + m * column_.size(), column_.size()};
  }
  std::span<double> slice(std::size_t m) noexcept {
    return {data_.data() + m * column_.size(), column_.size()};
  }

 private:
  ColumnGrid column_;
  TimeGrid time_;
  std::vector<double> data_;
};

/// Flux-form semi-discretisation V dq/dt = L q + k(0) F e_0 on the nodes,
/// with half cells at both ends. Interface flux at z_{j+1/2}:
///   k_{j+1/2} (q_{j+1} - q_j)/dz - w_{j+1/2} (q_j + q_{j+1})/2.
/// Columns of L sum to zero, so total mass changes only through F.
struct TransportOperator {
  std::vector<double> lower;    // L(j+1, j)
  std::vector<double> diag;     // L(j, j)
  std::vector<double> upper;    // L(j, j+1)
  std::vector<double> volumes;  // trapezoid weights of the column grid
  double k_surface = 0.0;

  explicit TransportOperator(const CoefficientProfile& profile) {
    const std::size_t n = profile.grid().size();
    const double dz = profile.grid().spacing();
    lower.assign(n - 1, 0.0);
    upper.assign(n - 1, 0.0);
    diag.assign(n, 0.0);
    for (std::size_t j = 0; j + 1 < n; ++j) {
      const double kappa = profile.k_half(j) / dz;
      const double omega = 0.5 * profile.w_half(j);
      if (!(kappa - omega > 0.0) || !(kappa + omega > 0.0)) {
        throw NumericalError("cell Peclet number |w| dz / k reaches 2 at z = " +
                             std::to_string(profile.grid().node(j)) + "; refine the column grid");
      }
      upper[j] = kappa - omega;
      lower[j] = kappa + omega;
      diag[j] -= kappa + omega;
      diag[j + 1] -= kappa - omega;
    }
    volumes = trapezoid_weights(profile.grid());
    k_surface = profile.k_surface();
  }

  std::size_t size() const noexcept { return diag.size(); }
};

/// One Crank-Nicolson step of the flux-form system, with F averaged over the step:
///   (V - dt/2 L) q^{m+1} = (V + dt/2 L) q^m + dt k(0) (F^m + F^{m+1})/2 e_0.
class CrankNicolson {
 public:
  CrankNicolson(const CoefficientProfile& profile, double dt) : op_(profile), dt_(dt) {
    const std::size_t n = op_.size();
    std::vector<double> bl(n - 1), bd(n), bu(n - 1);
    al_.resize(n - 1);
    ad_.resize(n);
    au_.resize(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      bd[j] = op_.volumes[j] - 0.5 * dt * op_.diag[j];
      ad_[j] = op_.volumes[j] + 0.5 * dt * op_.diag[j];
    }
    for (std::size_t j = 0; j + 1 < n; ++j) {
      bl[j] = -0.5 * dt * op_.lower[j];
      bu[j] = -0.5 * dt * op_.upper[j];
      al_[j] = 0.5 * dt * op_.lower[j];
      au_[j] = 0.5 * dt * op_.upper[j];
    }
    implicit_ = TridiagonalLU(bl, bd, bu);
  }

  std::size_t size() const noexcept { return op_.size(); }
  double dt() const noexcept { return dt_; }
  const TransportOperator& op() const noexcept { return op_; }
  const std::vector<double>& volumes() const noexcept { return op_.volumes; }

  void step(std::span<const double> q, double f_now, double f_next, std::span<double> out) const {
    tridiagonal_multiply(al_, ad_, au_, q, out);
    out[0] += dt_ * op_.k_surface * 0.5 * (f_now + f_next);
    implicit_.solve_in_place(out);
  }

  /// Transpose of `step`. Given the sensitivity p_next of a linear functional
  /// to q^{m+1}, writes its sensitivity to q^m into p_out and returns the
  /// sensitivity to each of F^m and F^{m+1} (they enter symmetrically).
  double adjoint_step(std::span<const double> p_next, std::span<double> p_out,
                      std::span<double> work) const {
    std::copy(p_next.begin(), p_next.end(), work.begin());
    implicit_.solve_transpose_in_place(work);
    // A^T: swap the off-diagonal bands
    tridiagonal_multiply(au_, ad_, al_, work, p_out);
    return dt_ * op_.k_surface * 0.5 * work[0];
  }

 private:
  TransportOperator op_;
  double dt_;
  TridiagonalLU implicit_;
  std::vector<double> al_, ad_, au_;
};

/// A linear functional of the state at one time node: dot(weights, q^{step}).
struct PointFunctional {
  std::size_t step = 0;
  std::vector<double> weights;
};

namespace detail {

inline void check_finite(std::span<const double> q, std::size_t step) {
  for (double v : q) {
    if (!std::isfinite(v)) throw StabilityError(step, "forward solve produced non-finite values");
  }
}

}  // namespace detail

/// Runs the stepper and evaluates each functional at its time node. Stops
/// at the last requested step.
inline std::vector<double> evaluate_functionals(const CrankNicolson& cn, std::span<const double> flux,
                                                std::span<const double> q0,
                                                std::span<const PointFunctional> functionals) {
  std::vector<double> out(functionals.size(), 0.0);
  if (functionals.empty()) return out;
  std::size_t last = 0;
  for (const auto& f : functionals) last = std::max(last, f.step);
  if (last >= flux.size()) throw ArgumentError("functional step beyond the time grid");
  const std::size_t n = cn.size();
  std::vector<double> q(q0.begin(), q0.end()), next(n);
  auto record = [&](std::size_t m) {
    for (std::size_t i = 0; i < functionals.size(); ++i) {
      if (functionals[i].step != m) continue;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += functionals[i].weights[j] * q[j];
      out[i] = acc;
    }
  };
  record(0);
  for (std::size_t m = 0; m < last; ++m) {
    cn.step(q, flux[m], flux[m + 1], next);
    q.swap(next);
    detail::check_finite(q, m + 1);
    record(m + 1);
  }
  return out;
}

struct AdjointResult {
  std::vector<double> flux_gradient;  // d/dF^m for every time node
  std::vector<double> q0_gradient;
};

/// Gradient of sum_i coeffs[i] * functional_i(q) with respect to the nodal
/// flux values and the initial state; the exact transpose of the stepper.
inline AdjointResult adjoint_functionals(const CrankNicolson& cn, std::size_t n_time,
                                         std::span<const PointFunctional> functionals,
                                         std::span<const double> coeffs) {
  const std::size_t n = cn.size();
  AdjointResult res{std::vector<double>(n_time, 0.0), std::vector<double>(n, 0.0)};
  if (functionals.empty()) return res;
  std::size_t last = 0;
  for (const auto& f : functionals) last = std::max(last, f.step);
  if (last >= n_time) throw ArgumentError("functional step beyond the time grid");
  std::vector<double> p(n, 0.0), prev(n), work(n);
  auto inject = [&](std::size_t m) {
    for (std::size_t i = 0; i < functionals.size(); ++i) {
      if (functionals[i].step != m) continue;
      for (std::size_t j = 0; j < n; ++j) p[j] += coeffs[i] * functionals[i].weights[j];
    }
  };
  inject(last);
  for (std::size_t m = last; m-- > 0;) {
    const double g = cn.adjoint_step(p, prev, work);
    res.flux_gradient[m] += g;
    res.flux_gradient[m + 1] += g;
    p.swap(prev);
    inject(m);
  }
  res.q0_gradient = p;
  return res;
}

namespace detail {

inline void check_forward_inputs(const CoefficientProfile& profile, const FluxSignal& flux,
                                 std::span<const double> q0) {
  if (q0.size() != profile.grid().size()) {
    throw ArgumentError("initial condition must have one value per column node");
  }
  for (double v : q0) {
    if (!std::isfinite(v)) throw ArgumentError("initial condition must be finite");
  }
  (void)flux;
}

}  // namespace detail

inline MixingRatioField solve_forward(const CoefficientProfile& profile, const FluxSignal& flux,
                                      std::span<const double> q0) {
  detail::check_forward_inputs(profile, flux, q0);
  const TimeGrid& tg = flux.grid();
  CrankNicolson cn(profile, tg.spacing());
  MixingRatioField field(profile.grid(), tg);
  std::copy(q0.begin(), q0.end(), field.slice(0).begin());
  for (std::size_t m = 0; m + 1 < tg.size(); ++m) {
    cn.step(field.slice(m), flux[m], flux[m + 1], field.slice(m + 1));
    detail::check_finite(field.slice(m + 1), m + 1);
  }
  return field;
}

/// r(t_m) = mass(t_m) - mass(0) - k(0) * integral of F over [0, t_m].
inline std::vector<double> mass_balance_residual(const MixingRatioField& field,
                                                 const CoefficientProfile& profile,
                                                 const FluxSignal& flux) {
  const TimeGrid& tg = field.time_grid();
  if (!(flux.grid() == tg)) throw ArgumentError("mass_balance_residual: time grid mismatch");
  const ColumnGrid& cg = field.column_grid();
  const double mass0 = trapezoid(field.slice(0), cg);
  const std::vector<double> inflow = cumulative_trapezoid(flux.values(), tg);
  std::vector<double> r(tg.size());
  for (std::size_t m = 0; m < tg.size(); ++m) {
    r[m] = trapezoid(field.slice(m), cg) - mass0 - profile.k_surface() * inflow[m];
  }
  return r;
}

struct EnergyFitOptions {
  double cap = 1e3;
  double rel_tol = 1e-3;
};

/// Smallest K >= 0 (to rel_tol) with
///   ||q(t)||^2 <= K e^{Kt} [ (1+t) ||q0||^2 + (1+t^2) ||F||^2_{L2(0,t)} ]
/// at every time node.
inline double energy_fit(const MixingRatioField& field, const FluxSignal& flux,
                         std::span<const double> q0, EnergyFitOptions options = {}) {
  const TimeGrid& tg = field.time_grid();
  const ColumnGrid& cg = field.column_grid();
  const std::size_t nt = tg.size();
  std::vector<double> lhs(nt), base(nt), tt(nt);
  std::vector<double> sq(cg.size());
  for (std::size_t j = 0; j < cg.size(); ++j) sq[j] = q0[j] * q0[j];
  const double q0_norm2 = trapezoid(std::span<const double>(sq), cg);
  double flux_norm2 = 0.0;
  const double dt = tg.spacing();
  for (std::size_t m = 0; m < nt; ++m) {
    if (m > 0) {
      const double a = flux[m - 1], b = flux[m];
      flux_norm2 += dt * (a * a + a * b + b * b) / 3.0;
    }
    auto slice = field.slice(m);
    for (std::size_t j = 0; j < cg.size(); ++j) sq[j] = slice[j] * slice[j];
    lhs[m] = trapezoid(std::span<const double>(sq), cg);
    tt[m] = tg.node(m);
    base[m] = (1.0 + tt[m]) * q0_norm2 + (1.0 + tt[m] * tt[m]) * flux_norm2;
  }
  auto admissible = [&](double K) {
    for (std::size_t m = 0; m < nt; ++m) {
      if (lhs[m] > K * std::exp(K * tt[m]) * base[m] * (1.0 + 1e-12)) return false;
    }
    return true;
  };
  if (admissible(0.0)) return 0.0;
  if (!admissible(options.cap)) {
    throw DiagnosticError("energy_fit: no admissible constant below " + std::to_string(options.cap));
  }
  double lo = 0.0, hi = options.cap;
  while (hi - lo > options.rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    (admissible(mid) ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace colflux
