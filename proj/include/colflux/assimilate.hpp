#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "colflux/errors.hpp"
#include "colflux/model.hpp"
#include "colflux/numerics.hpp"
#include "colflux/observe.hpp"
#include "colflux/posterior.hpp"
#include "colflux/prior.hpp"
#include "colflux/spectral.hpp"
#include "colflux/transport.hpp"

namespace colflux {

/// J(F) = 1/2 sum_i r_i^-2 (H_i q^F(t_i) - y_i)^2 + 1/2 ||C0^{-1/2}(F - F0)||^2
class AssimilationProblem {
 public:
  AssimilationProblem(CoefficientProfile profile, std::vector<double> q0, ObservationSet obs,
                      std::vector<Weight> weights, PriorSpec prior)
      : profile_(std::move(profile)),
        q0_(std::move(q0)),
        obs_(std::move(obs)),
        weights_(std::move(weights)),
        prior_(std::move(prior)),
        cn_(profile_, prior_.grid().spacing()) {
    if (q0_.size() != profile_.grid().size()) {
      throw ArgumentError("AssimilationProblem: q0 must have one value per column node");
    }
    if (weights_.size() != obs_.size()) {
      throw ArgumentError("AssimilationProblem: one weight per observation required");
    }
    const TimeGrid& tg = prior_.grid();
    for (std::size_t i = 0; i < obs_.size(); ++i) {
      if (!(weights_[i].grid() == profile_.grid())) {
        throw ArgumentError("AssimilationProblem: weight grid does not match the profile grid");
      }
      if (obs_[i].t > tg.length() * (1.0 + 1e-12)) {
        throw ArgumentError("AssimilationProblem: observation after the end of the time grid");
      }
      functionals_.push_back({tg.require_node(obs_[i].t, "observation time"),
                              observation_functional(weights_[i])});
    }
  }

  const CoefficientProfile& profile() const noexcept { return profile_; }
  std::span<const double> q0() const noexcept { return q0_; }
  const ObservationSet& observations() const noexcept { return obs_; }
  const std::vector<Weight>& weights() const noexcept { return weights_; }
  const PriorSpec& prior() const noexcept { return prior_; }
  const TimeGrid& time_grid() const noexcept { return prior_.grid(); }
  const CrankNicolson& stepper() const noexcept { return cn_; }
  const std::vector<PointFunctional>& functionals() const noexcept { return functionals_; }
  std::size_t size() const noexcept { return obs_.size(); }

  /// H_i q(t_i) for the flux given at every time node, with initial state q0
  /// (or zero when `with_q0` is false).
  std::vector<double> predict(std::span<const double> flux, bool with_q0 = true) const {
    if (flux.size() != time_grid().size()) throw ArgumentError("predict: flux length mismatch");
    const std::vector<double> zero(q0_.size(), 0.0);
    return evaluate_functionals(cn_, flux, with_q0 ? std::span<const double>(q0_) : zero,
                                functionals_);
  }

  /// G^T c as nodal sensitivities: d/dF_m of sum_i c_i H_i q(t_i).
  std::vector<double> predict_transpose(std::span<const double> c) const {
    return adjoint_functionals(cn_, time_grid().size(), functionals_, c).flux_gradient;
  }

  double cost(const FluxSignal& F) const {
    const std::vector<double> g = deviation(F);
    const std::vector<double> pred = predict(F.values());
    double misfit = 0.0;
    for (std::size_t i = 0; i < obs_.size(); ++i) {
      const double d = (pred[i] - obs_[i].y) / obs_[i].r;
      misfit += d * d;
    }
    return 0.5 * misfit + 0.5 * prior_.form(g, g);
  }

  /// L2 gradient of J on the time grid: zero at nodes fixed by the prior,
  /// C0^{-1}(F - F0) plus the adjoint trace divided by the quadrature weight elsewhere.
  std::vector<double> gradient(const FluxSignal& F) const {
    const std::vector<double> g = deviation(F);
    const std::vector<double> pred = predict(F.values());
    std::vector<double> c(obs_.size());
    for (std::size_t i = 0; i < obs_.size(); ++i) {
      c[i] = (pred[i] - obs_[i].y) / (obs_[i].r * obs_[i].r);
    }
    std::vector<double> x = prior_.embed_transpose(predict_transpose(c));
    const std::vector<double> w = prior_.free_weights();
    const std::vector<double> kx = prior_.stiffness_multiply(prior_.restrict_to_free(g));
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = (x[j] + kx[j]) / w[j];
    prior_.project(x);
    return prior_.embed(x);
  }

  /// D^2 J (G, G) = sum_i r_i^-2 (H_i q0^G(t_i))^2 + ||C0^{-1/2} G||^2 with q0^G the
  /// solution driven by G from a zero initial state.
  double hessian_form(std::span<const double> g) const {
    prior_.check_domain(g, "direction");
    const std::vector<double> pred = predict(g, false);
    double acc = 0.0;
    for (std::size_t i = 0; i < obs_.size(); ++i) acc += pred[i] * pred[i] / (obs_[i].r * obs_[i].r);
    return acc + prior_.form(g, g);
  }

  /// Hessian of J in free coordinates: (K + E^T G^T R^-1 G E) x.
  std::vector<double> hessian_apply(std::span<const double> x) const {
    const std::vector<double> full = prior_.embed(x);
    const std::vector<double> pred = predict(full, false);
    std::vector<double> c(obs_.size());
    for (std::size_t i = 0; i < obs_.size(); ++i) c[i] = pred[i] / (obs_[i].r * obs_[i].r);
    std::vector<double> out = prior_.embed_transpose(predict_transpose(c));
    const std::vector<double> kx = prior_.stiffness_multiply(x);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += kx[j];
    prior_.project(out);
    return out;
  }

  /// -dJ/dx at x = 0 (F = F0) in free coordinates.
  std::vector<double> normal_rhs() const {
    const std::vector<double> pred = predict(prior_.mean().values());
    std::vector<double> c(obs_.size());
    for (std::size_t i = 0; i < obs_.size(); ++i) {
      c[i] = (obs_[i].y - pred[i]) / (obs_[i].r * obs_[i].r);
    }
    std::vector<double> b = prior_.embed_transpose(predict_transpose(c));
    prior_.project(b);
    return b;
  }

  FluxSignal flux_from_free(std::span<const double> x) const {
    std::vector<double> v = prior_.embed(x);
    const auto m = prior_.mean().values();
    for (std::size_t j = 0; j < v.size(); ++j) v[j] += m[j];
    return FluxSignal(time_grid(), std::move(v));
  }

 private:
  std::vector<double> deviation(const FluxSignal& F) const {
    if (!(F.grid() == time_grid())) throw ArgumentError("flux is not on the prior time grid");
    std::vector<double> g(F.values().begin(), F.values().end());
    const auto m = prior_.mean().values();
    for (std::size_t j = 0; j < g.size(); ++j) g[j] -= m[j];
    prior_.check_domain(g, "F - F0");
    return g;
  }

  CoefficientProfile profile_;
  std::vector<double> q0_;
  ObservationSet obs_;
  std::vector<Weight> weights_;
  PriorSpec prior_;
  CrankNicolson cn_;
  std::vector<PointFunctional> functionals_;
};

struct CgOptions {
  double rel_tol = 1e-10;
  /// a run that ends above this relative residual is a failure
  double accept_tol = 1e-8;
  /// 0 means 2 N_t
  std::size_t max_iterations = 0;
};

struct MapResult {
  FluxSignal flux;
  std::size_t iterations = 0;
  std::vector<double> residual_history;
  bool converged = false;
};

/// Minimiser of J by conjugate gradients on the normal equations, preconditioned
/// with the prior covariance (whitened iteration).
inline MapResult map_estimate(const AssimilationProblem& problem, CgOptions options = {}) {
  const PriorSpec& prior = problem.prior();
  const std::size_t n = prior.free_size();
  const std::size_t max_it = options.max_iterations ? options.max_iterations : 2 * prior.full_size();
  const std::vector<double> b = problem.normal_rhs();
  auto dot = [](std::span<const double> a, std::span<const double> c) {
    return std::inner_product(a.begin(), a.end(), c.begin(), 0.0);
  };
  std::vector<double> x(n, 0.0);
  MapResult out{problem.flux_from_free(x), 0, {}, false};
  const double b_norm = std::sqrt(dot(b, b));
  if (b_norm == 0.0) {
    out.converged = true;
    out.residual_history.push_back(0.0);
    return out;
  }
  std::vector<double> r = b;
  std::vector<double> z = prior.covariance_solve(r);
  std::vector<double> p = z;
  double rz = dot(r, z);
  double rel = 1.0;
  for (std::size_t it = 0; it < max_it; ++it) {
    const std::vector<double> hp = problem.hessian_apply(p);
    const double php = dot(p, hp);
    if (!(php > 0.0) || !std::isfinite(php)) {
      throw NumericalError("map_estimate: non-positive curvature p^T H p = " + std::to_string(php) +
                           " at iteration " + std::to_string(it));
    }
    const double alpha = rz / php;
    for (std::size_t j = 0; j < n; ++j) {
      x[j] += alpha * p[j];
      r[j] -= alpha * hp[j];
    }
    rel = std::sqrt(dot(r, r)) / b_norm;
    out.residual_history.push_back(rel);
    out.iterations = it + 1;
    if (rel <= options.rel_tol) break;
    z = prior.covariance_solve(r);
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t j = 0; j < n; ++j) p[j] = z[j] + beta * p[j];
  }
  out.converged = rel <= options.accept_tol;
  if (!out.converged) {
    throw NumericalError("map_estimate: CG stagnated at relative residual " + std::to_string(rel) +
                         " after " + std::to_string(out.iterations) + " iterations");
  }
  prior.project(x);
  out.flux = problem.flux_from_free(x);
  return out;
}

inline constexpr std::size_t kDenseTimeCap = 2048;

/// Discrete forward map on the full time nodes, one row per observation
/// (row i = d/dF_m of H_i q(t_i)), from one adjoint solve per observation.
inline Eigen::MatrixXd forward_map_adjoint(const AssimilationProblem& problem) {
  const std::size_t nt = problem.time_grid().size();
  Eigen::MatrixXd g(static_cast<Eigen::Index>(problem.size()), static_cast<Eigen::Index>(nt));
  for (std::size_t i = 0; i < problem.size(); ++i) {
    std::vector<double> c(problem.size(), 0.0);
    c[i] = 1.0;
    const std::vector<double> row = problem.predict_transpose(c);
    for (std::size_t m = 0; m < nt; ++m) {
      g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) = row[m];
    }
  }
  return g;
}

/// The same matrix column by column, one forward solve per nodal hat function.
inline Eigen::MatrixXd forward_map_forward(const AssimilationProblem& problem) {
  const std::size_t nt = problem.time_grid().size();
  std::size_t last = 0;
  for (const auto& f : problem.functionals()) last = std::max(last, f.step);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(problem.size()),
                                            static_cast<Eigen::Index>(nt));
  std::vector<double> hat(nt, 0.0);
  for (std::size_t m = 0; m <= last && m < nt; ++m) {
    hat[m] = 1.0;
    const std::vector<double> col = problem.predict(hat, false);
    hat[m] = 0.0;
    for (std::size_t i = 0; i < col.size(); ++i) {
      g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) = col[i];
    }
  }
  return g;
}

struct OracleOptions {
  bool check_forward_path = true;
  std::size_t continuity_samples = 8;
  std::uint64_t seed = 0;
};

struct OracleResult {
  FluxSignal mean;
  /// posterior covariance in free coordinates
  Eigen::MatrixXd covariance;
  /// posterior precision K + E^T G^T R^-1 G E in free coordinates
  Eigen::MatrixXd precision;
  /// pointwise posterior variance on the full time nodes
  std::vector<double> variance;
  /// forward map on full time nodes (adjoint path)
  Eigen::MatrixXd forward_map;
  /// max |G_adj - G_fwd| / max |G_adj|; negative when the forward path was skipped
  double path_agreement = -1.0;
  /// largest ||delta mean|| / ||delta y|| over the perturbation sweep
  double continuity_constant = 0.0;
};

/// Exact discrete Gaussian posterior by dense linear algebra.
inline OracleResult oracle_bayes(const AssimilationProblem& problem, OracleOptions options = {}) {
  const PriorSpec& prior = problem.prior();
  const std::size_t nt = prior.full_size();
  if (nt > kDenseTimeCap) {
    throw CapacityError("oracle_bayes: " + std::to_string(nt) + " time nodes exceed the dense cap of " +
                        std::to_string(kDenseTimeCap));
  }
  const auto nf = static_cast<Eigen::Index>(prior.free_size());
  const auto no = static_cast<Eigen::Index>(problem.size());

  OracleResult out{prior.mean(), {}, {}, {}, forward_map_adjoint(problem), -1.0, 0.0};
  if (options.check_forward_path && no > 0) {
    const Eigen::MatrixXd fwd = forward_map_forward(problem);
    const double scale = out.forward_map.cwiseAbs().maxCoeff();
    out.path_agreement =
        scale > 0.0 ? (out.forward_map - fwd).cwiseAbs().maxCoeff() / scale : 0.0;
  }

  // restrict the map to free coordinates: G E
  Eigen::MatrixXd gf(no, nf);
  for (Eigen::Index i = 0; i < no; ++i) {
    std::vector<double> row(nt);
    for (std::size_t m = 0; m < nt; ++m) row[m] = out.forward_map(i, static_cast<Eigen::Index>(m));
    const std::vector<double> r = prior.embed_transpose(row);
    for (Eigen::Index j = 0; j < nf; ++j) gf(i, j) = r[static_cast<std::size_t>(j)];
  }
  Eigen::VectorXd rinv(no), y(no);
  const std::vector<double> pred0 = problem.predict(prior.mean().values());
  for (Eigen::Index i = 0; i < no; ++i) {
    const auto& ob = problem.observations()[static_cast<std::size_t>(i)];
    rinv[i] = 1.0 / (ob.r * ob.r);
    y[i] = ob.y - pred0[static_cast<std::size_t>(i)];
  }

  out.precision = prior.stiffness_matrix() + gf.transpose() * rinv.asDiagonal() * gf;
  const Eigen::MatrixXd z = prior.constraint_basis();
  const Eigen::MatrixXd hz = z.transpose() * out.precision * z;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(hz);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0)) {
    throw NumericalError("oracle_bayes: posterior precision is not positive definite");
  }
  out.covariance = z * ldlt.solve(z.transpose());
  const Eigen::MatrixXd gain = out.covariance * gf.transpose() * rinv.asDiagonal();
  const Eigen::VectorXd x = gain * y;
  out.mean = problem.flux_from_free(std::vector<double>(x.data(), x.data() + nf));

  std::vector<double> diag(static_cast<std::size_t>(nf));
  for (Eigen::Index j = 0; j < nf; ++j) diag[static_cast<std::size_t>(j)] = out.covariance(j, j);
  out.variance = prior.embed(diag);

  if (no > 0) {
    const CounterRng rng(options.seed ^ 0xC0FFEEULL);
    std::uint64_t k = 0;
    for (std::size_t s = 0; s < options.continuity_samples; ++s) {
      Eigen::VectorXd delta(no);
      for (Eigen::Index i = 0; i < no; ++i) delta[i] = rng.normal(k++);
      const double dn = delta.norm();
      if (dn > 0.0) out.continuity_constant = std::max(out.continuity_constant, (gain * delta).norm() / dn);
    }
  }
  return out;
}

/// Row i of R^{-1/2} G as a function of time: nodal sensitivities divided by the
/// trapezoid weights of the support [0, t_i].
inline std::vector<double> representer_function(const AssimilationProblem& problem,
                                                const Eigen::MatrixXd& forward_map, std::size_t i) {
  const TimeGrid& tg = problem.time_grid();
  const std::size_t last = problem.functionals()[i].step;
  const double dt = tg.spacing();
  const double r = problem.observations()[i].r;
  std::vector<double> out(tg.size(), 0.0);
  for (std::size_t m = 0; m <= last; ++m) {
    const double w = (m == 0 || m == last) ? 0.5 * dt : dt;
    out[m] = forward_map(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) / (r * w);
  }
  return out;
}

/// Gain directions of every observation from the spectral series.
inline PosteriorModel spectral_posterior(const AssimilationProblem& problem, const EigenSystem& eig) {
  PosteriorModel model(problem.prior());
  for (std::size_t i = 0; i < problem.size(); ++i) {
    const Weight& w = problem.weights()[i];
    std::vector<double> a;
    double residual = 0.0;
    if (w.coefficients()) {
      a = *w.coefficients();
    } else {
      WeightExpansion ex = expand_weight(w.values(), eig);
      a = std::move(ex.coefficients);
      residual = ex.residual;
    }
    model.add(gain_direction(eig, a, problem.observations()[i].t, problem.observations()[i].r,
                             problem.time_grid(), residual));
  }
  return model;
}

}  // namespace colflux
