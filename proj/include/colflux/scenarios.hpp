#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "colflux/assimilate.hpp"
#include "colflux/config.hpp"
#include "colflux/io.hpp"
#include "colflux/model.hpp"
#include "colflux/numerics.hpp"
#include "colflux/observe.hpp"
#include "colflux/posterior.hpp"
#include "colflux/prior.hpp"
#include "colflux/spectral.hpp"
#include "colflux/transport.hpp"

#ifndef COLFLUX_VERSION
#define COLFLUX_VERSION "0.1.0"
#endif

namespace colflux {

inline constexpr const char* kVersion = COLFLUX_VERSION;

/// Relative L2 difference ||a - b|| / ||b|| (trapezoid weights).
inline double relative_l2(std::span<const double> a, std::span<const double> b,
                          std::span<const double> weights) {
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    num += weights[j] * d * d;
    den += weights[j] * b[j] * b[j];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

/// Nonnegative weight rho = sum_{n<M} a_n rho_n with random a_n for n >= 1 and
/// a_0 lifted so that min rho equals a random fraction of a_0.
inline Weight random_resolved_weight(const EigenSystem& eig, std::size_t M, const CounterRng& rng,
                                     std::uint64_t stream, const std::string& label) {
  std::vector<double> a(M, 0.0);
  for (std::size_t n = 1; n < M; ++n) {
    a[n] = rng.normal(stream * 1024 + n) / static_cast<double>((n + 1) * (n + 1));
  }
  const std::size_t nz = eig.grid().size();
  std::vector<double> v(nz, 0.0);
  for (std::size_t n = 1; n < M; ++n) {
    for (std::size_t j = 0; j < nz; ++j) v[j] += a[n] * eig.modes[n][j];
  }
  const double lo = *std::min_element(v.begin(), v.end());
  const double lift = 0.1 + rng.uniform(2 * (stream * 1024 + 1023));
  a[0] = std::max(0.0, -lo) + lift;
  for (double& x : v) x += a[0];
  Weight w(eig.grid(), std::move(v), label);
  w.set_coefficients(std::move(a));
  return w;
}

/// Smooth random function in the prior's form domain: a sine series that
/// vanishes at both ends (dirichlet), is periodic with zero mean (periodic),
/// or has a free mean and slope (diagonal).
inline std::vector<double> random_admissible(const PriorSpec& prior, const CounterRng& rng,
                                             std::uint64_t stream, std::size_t terms = 8) {
  const TimeGrid& tg = prior.grid();
  const double T = tg.length();
  std::vector<double> g(tg.size(), 0.0);
  for (std::size_t k = 1; k <= terms; ++k) {
    const double c = rng.normal(stream * 64 + k) / static_cast<double>(k);
    const double freq = prior.kind() == PriorKind::periodic ? 2.0 * static_cast<double>(k)
                                                            : static_cast<double>(k);
    for (std::size_t m = 0; m < tg.size(); ++m) {
      g[m] += c * std::sin(std::numbers::pi * freq * tg.node(m) / T);
    }
  }
  if (prior.kind() == PriorKind::dirichlet) {
    g.front() = 0.0;
    g.back() = 0.0;
  } else if (prior.kind() == PriorKind::periodic) {
    g.back() = g.front();
    double mean = 0.0;
    for (std::size_t m = 0; m + 1 < g.size(); ++m) mean += g[m];
    mean /= static_cast<double>(g.size() - 1);
    for (double& v : g) v -= mean;
  } else {
    const double a = rng.normal(stream * 64 + 62), b = rng.normal(stream * 64 + 63);
    for (std::size_t m = 0; m < tg.size(); ++m) g[m] += a + b * tg.node(m) / T;
  }
  return g;
}

/// Everything a scenario needs, built from a validated configuration.
class Experiment {
 public:
  Experiment(ExperimentConfig config, std::filesystem::path config_dir = {})
      : config_(std::move(config)),
        config_dir_(std::move(config_dir)),
        column_(config_.model.h, config_.grid.nz),
        time_(config_.grid.t_end, config_.grid.nt + 1),
        profile_(make_profile()) {}

  const ExperimentConfig& config() const noexcept { return config_; }
  const CoefficientProfile& profile() const noexcept { return profile_; }
  const ColumnGrid& column() const noexcept { return column_; }
  const TimeGrid& time() const noexcept { return time_; }

  const EigenSystem& eig() {
    if (!eig_) eig_ = eigensystem(profile_, config_.spectral.n_modes);
    return *eig_;
  }

  std::vector<double> q0() const { return config_.initial.sample(column_); }
  FluxSignal truth() const { return FluxSignal(time_, config_.truth.sample(time_)); }

  PriorSpec prior() const {
    return PriorSpec(FluxSignal(time_, config_.prior.mean.sample(time_)), config_.prior.kind,
                     config_.prior.sigma);
  }

  Weight weight(const WeightSpec& spec) {
    const double h = column_.length();
    if (spec.builtin) {
      if (spec.label == "rho_plus") return canonical_weights(eig()).plus;
      if (spec.label == "rho_minus") return canonical_weights(eig()).minus;
      std::vector<double> v(column_.size());
      for (std::size_t j = 0; j < v.size(); ++j) {
        const double s = column_.node(j) / h;
        v[j] = spec.label == "uniform" ? 1.0 / h : spec.label == "surface" ? 1.0 - s : s;
      }
      return Weight(column_, std::move(v), spec.label);
    }
    return Weight(column_, spec.function.sample(column_), spec.label);
  }

  /// Configured weights, one per observation (a single weight is broadcast).
  std::vector<Weight> observation_weights(std::size_t n_obs) {
    const auto& specs = config_.observations.weights;
    std::vector<Weight> out;
    for (std::size_t i = 0; i < n_obs; ++i) out.push_back(weight(specs.size() == 1 ? specs[0] : specs[i]));
    return out;
  }

  /// Data from the CSV file when configured, else synthesised from the truth flux.
  ObservationSet observations() {
    const auto& oc = config_.observations;
    if (!oc.file.empty()) {
      const std::filesystem::path p = config_dir_ / oc.file;
      return io::parse_observations_csv(io::read_file(p));
    }
    const std::size_t n = oc.times.size();
    std::vector<double> noise(n, 0.0);
    for (std::size_t i = 0; i < n && !oc.noise.empty(); ++i) {
      noise[i] = oc.noise.size() == 1 ? oc.noise[0] : oc.noise[i];
    }
    const std::vector<Weight> ws = observation_weights(n);
    return synthesize_data(profile_, truth(), q0(), ws, oc.times, noise, config_.seed);
  }

  AssimilationProblem problem() {
    ObservationSet obs = observations();
    std::vector<Weight> ws = observation_weights(obs.size());
    return AssimilationProblem(profile_, q0(), std::move(obs), std::move(ws), prior());
  }

  double t_obs_or_end(double t) const { return t > 0.0 ? t : time_.length(); }

 private:
  CoefficientProfile make_profile() const {
    ProfileOptions opt;
    opt.max_second_difference = config_.model.max_second_difference;
    return validate_profile(config_.model.k.sample(column_), config_.model.w.sample(column_),
                            column_, opt);
  }

  ExperimentConfig config_;
  std::filesystem::path config_dir_;
  ColumnGrid column_;
  TimeGrid time_;
  CoefficientProfile profile_;
  std::optional<EigenSystem> eig_;
};

/// Collects the files of one run and writes them with a manifest.
class RunOutput {
 public:
  void add(const std::string& name, std::string content) { files_[name] = std::move(content); }
  void add_json(const std::string& name, const nlohmann::json& j) { add(name, j.dump(2) + "\n"); }
  const std::map<std::string, std::string>& files() const noexcept { return files_; }

  const std::string& at(const std::string& name) const { return files_.at(name); }

  nlohmann::json manifest(const ExperimentConfig& config) const {
    nlohmann::json m;
    nlohmann::json hashed = to_json(config);
    hashed.erase("output");
    m["config_hash"] = io::hex64(io::fnv1a(hashed.dump()));
    m["seed"] = config.seed;
    m["scenario"] = to_string(config.scenario);
    m["version"] = kVersion;
    m["float_format"] = "shortest round-trip decimal";
    m["rng"] = "splitmix64 counter stream, Box-Muller";
    nlohmann::json files = nlohmann::json::object();
    for (const auto& [name, content] : files_) files[name] = io::hex64(io::fnv1a(content));
    m["files"] = files;
    return m;
  }

  void write(const std::filesystem::path& dir, const ExperimentConfig& config) const {
    std::filesystem::create_directories(dir);
    for (const auto& [name, content] : files_) io::write_file(dir / name, content);
    io::write_file(dir / "manifest.json", manifest(config).dump(2) + "\n");
  }

 private:
  std::map<std::string, std::string> files_;
};

namespace detail {

inline nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline void run_validate(Experiment& ex, RunOutput& out) {
  const auto& p = ex.profile();
  const std::vector<double> mu = mu_weight(p);
  io::CsvWriter csv({"z", "k", "w", "mu"});
  for (std::size_t j = 0; j < mu.size(); ++j) csv.row({p.grid().node(j), p.k_at(j), p.w_at(j), mu[j]});
  out.add("profile.csv", csv.str());
  double peclet = 0.0;
  for (std::size_t j = 0; j + 1 < mu.size(); ++j) {
    peclet = std::max(peclet, std::abs(p.w_half(j)) * p.grid().spacing() / p.k_half(j));
  }
  out.add_json("summary.json", {{"epsilon", p.epsilon()},
                                {"k_surface", p.k_surface()},
                                {"max_abs_w", p.max_abs_w()},
                                {"mu_min", *std::min_element(mu.begin(), mu.end())},
                                {"mu_max", *std::max_element(mu.begin(), mu.end())},
                                {"max_cell_peclet", peclet},
                                {"assumptions", {"A1", "A2", "A3"}}});
}

inline void run_simulate(Experiment& ex, RunOutput& out) {
  const FluxSignal flux = ex.truth();
  const std::vector<double> q0 = ex.q0();
  const MixingRatioField field = solve_forward(ex.profile(), flux, q0);
  const TimeGrid& tg = ex.time();
  const ColumnGrid& cg = ex.column();
  const std::size_t stride = ex.config().simulate.stride;
  std::vector<std::string> header{"z"};
  std::vector<std::size_t> steps;
  for (std::size_t m = 0; m < tg.size(); m += stride) steps.push_back(m);
  if (steps.back() != tg.size() - 1) steps.push_back(tg.size() - 1);
  for (std::size_t m : steps) header.push_back(io::format_double(tg.node(m)));
  io::CsvWriter csv(header);
  std::vector<double> row(steps.size() + 1);
  for (std::size_t j = 0; j < cg.size(); ++j) {
    row[0] = cg.node(j);
    for (std::size_t s = 0; s < steps.size(); ++s) row[s + 1] = field.at(j, steps[s]);
    csv.row(row);
  }
  out.add("field.csv", csv.str());

  const std::vector<double> r = mass_balance_residual(field, ex.profile(), flux);
  io::CsvWriter mb({"t", "residual"});
  double max_r = 0.0;
  for (std::size_t m = 0; m < r.size(); ++m) {
    mb.row({tg.node(m), r[m]});
    max_r = std::max(max_r, std::abs(r[m]));
  }
  out.add("mass_balance.csv", mb.str());
  double q_norm = 0.0, f_norm = 0.0;
  for (double v : q0) q_norm = std::max(q_norm, std::abs(v));
  for (double v : flux.values()) f_norm = std::max(f_norm, std::abs(v));
  const double K = energy_fit(field, flux, q0);
  out.add_json("summary.json", {{"max_mass_residual", max_r},
                                {"residual_scale", 1.0 + q_norm + f_norm},
                                {"energy_constant", K},
                                {"final_column_mass", trapezoid(field.slice(tg.size() - 1), cg)}});
}

inline void run_eigen(Experiment& ex, RunOutput& out) {
  const EigenSystem& eig = ex.eig();
  const std::size_t nz = eig.grid().size();
  std::vector<std::string> header{"n", "lambda", "mu_norm"};
  for (std::size_t j = 0; j < nz; ++j) header.push_back("z_" + std::to_string(j));
  io::CsvWriter csv(header);
  std::vector<double> row(nz + 3);
  for (std::size_t n = 0; n < eig.size(); ++n) {
    row[0] = static_cast<double>(n);
    row[1] = eig.lambdas[n];
    row[2] = eig.mu_norms[n];
    std::copy(eig.modes[n].begin(), eig.modes[n].end(), row.begin() + 3);
    csv.row(row);
  }
  out.add("eig.csv", csv.str());
  const MuntzSums ms = muntz_partial_sums(eig);
  io::CsvWriter mcsv({"M", "lambda", "S_M", "T_M"});
  for (std::size_t n = 0; n < eig.size(); ++n) {
    mcsv.row({static_cast<double>(n + 1), eig.lambdas[n], ms.parabolic[n], ms.hyperbolic[n]});
  }
  out.add("muntz.csv", mcsv.str());
  double max_orth = 0.0;
  for (std::size_t m = 0; m < eig.size(); ++m) {
    for (std::size_t n = m + 1; n < eig.size(); ++n) {
      max_orth = std::max(max_orth, std::abs(eig.mu_inner(eig.modes[m], eig.modes[n])) /
                                        std::sqrt(eig.mu_norms[m] * eig.mu_norms[n]));
    }
  }
  out.add_json("summary.json", {{"n_modes", eig.size()},
                                {"lambda_0", eig.lambdas[0]},
                                {"lambda_1", eig.lambdas[1]},
                                {"growth_constant", ms.growth_constant},
                                {"growth_offset", ms.growth_offset},
                                {"max_growth_deviation", ms.max_growth_deviation},
                                {"norm_bound_ratio", eig.norm_bound_ratio()},
                                {"max_orthogonality_residual", max_orth},
                                {"parabolic_sum", ms.parabolic.back()},
                                {"parabolic_limit_estimate", ms.parabolic_limit},
                                {"hyperbolic_sum", ms.hyperbolic.back()}});
}

inline void run_weights(Experiment& ex, RunOutput& out) {
  std::vector<WeightSpec> specs = ex.config().observations.weights;
  if (specs.empty()) {
    for (const auto& label : builtin_weight_labels()) specs.push_back({label, true, {}});
  }
  const EigenSystem& eig = ex.eig();
  std::vector<Weight> ws;
  for (const auto& s : specs) ws.push_back(ex.weight(s));
  std::vector<std::string> header{"z"};
  for (const auto& w : ws) header.push_back(w.label());
  io::CsvWriter values(header);
  std::vector<double> row(ws.size() + 1);
  for (std::size_t j = 0; j < ex.column().size(); ++j) {
    row[0] = ex.column().node(j);
    for (std::size_t i = 0; i < ws.size(); ++i) row[i + 1] = ws[i].values()[j];
    values.row(row);
  }
  out.add("weights.csv", values.str());

  header[0] = "n";
  io::CsvWriter coeffs(header);
  nlohmann::json summary = nlohmann::json::object();
  std::vector<std::vector<double>> a;
  for (const auto& w : ws) {
    nlohmann::json entry;
    if (w.negative()) {
      // negative weights cannot be expanded; report the synthesised coefficients only
      a.push_back(w.coefficients() ? *w.coefficients() : std::vector<double>{});
      entry["residual"] = nullptr;
    } else {
      WeightExpansion e = expand_weight(w.values(), eig);
      entry["residual"] = e.residual;
      a.push_back(std::move(e.coefficients));
    }
    const SynthesizedWeight syn = synthesize_weight(a.back(), eig);
    entry["negative"] = w.negative() || syn.negative;
    entry["min_synthesized"] = syn.min_value;
    summary[w.label()] = entry;
  }
  for (std::size_t n = 0; n < eig.size(); ++n) {
    row[0] = static_cast<double>(n);
    for (std::size_t i = 0; i < ws.size(); ++i) row[i + 1] = n < a[i].size() ? a[i][n] : 0.0;
    coeffs.row(row);
  }
  out.add("coefficients.csv", coeffs.str());
  out.add_json("summary.json", summary);
}

inline std::vector<double> weight_coefficients(const Weight& w, const EigenSystem& eig,
                                               double* residual = nullptr) {
  if (w.coefficients()) {
    if (residual) *residual = 0.0;
    return *w.coefficients();
  }
  WeightExpansion e = expand_weight(w.values(), eig);
  if (residual) *residual = e.residual;
  return e.coefficients;
}

inline std::string gain_csv(const GainDirection& g) {
  io::CsvWriter csv({"t", "G", "truncation_error"});
  for (std::size_t m = 0; m < g.grid().size(); ++m) {
    csv.row({g.grid().node(m), g.values()[m], g.truncation_error()[m]});
  }
  return csv.str();
}

inline void run_gains(Experiment& ex, RunOutput& out) {
  const EigenSystem& eig = ex.eig();
  const AssimilationProblem prob = ex.problem();
  nlohmann::json list = nlohmann::json::array();
  for (std::size_t i = 0; i < prob.size(); ++i) {
    double residual = 0.0;
    const Weight& w = prob.weights()[i];
    const auto a = weight_coefficients(w, eig, &residual);
    const auto& ob = prob.observations()[i];
    const GainDirection g = gain_direction(eig, a, ob.t, ob.r, ex.time(), residual);
    const GainAnalysis an = analyze_gain(g);
    out.add("gain_" + std::to_string(i) + ".csv", gain_csv(g));
    const auto te = g.truncation_error();
    list.push_back({{"index", i},
                    {"label", w.label()},
                    {"t_obs", ob.t},
                    {"r", ob.r},
                    {"mean_projection", an.mean_projection},
                    {"monotonicity", to_string(an.monotone)},
                    {"norm", g.norm()},
                    {"expansion_residual", residual},
                    {"max_truncation_error", *std::max_element(te.begin(), te.end())}});
  }
  out.add_json("gains.json", list);
}

inline void run_assimilate(Experiment& ex, RunOutput& out) {
  const AssimilationProblem prob = ex.problem();
  out.add("observations.csv", io::observations_csv(prob.observations()));
  const MapResult res = map_estimate(prob);
  const TimeGrid& tg = ex.time();
  io::CsvWriter fcsv({"t", "F"});
  for (std::size_t m = 0; m < tg.size(); ++m) fcsv.row({tg.node(m), res.flux[m]});
  out.add("map_flux.csv", fcsv.str());
  const std::vector<double> grad = prob.gradient(res.flux);
  nlohmann::json report{{"iterations", res.iterations},
                        {"converged", res.converged},
                        {"residual_history", res.residual_history},
                        {"cost", prob.cost(res.flux)},
                        {"gradient_l2", std::sqrt(std::max(0.0, trapezoid(
                            [&] {
                              std::vector<double> sq(grad.size());
                              for (std::size_t m = 0; m < grad.size(); ++m) sq[m] = grad[m] * grad[m];
                              return sq;
                            }(), tg)))}};
  if (tg.size() <= kDenseTimeCap) {
    OracleOptions opt;
    opt.check_forward_path = false;
    opt.seed = ex.config().seed;
    const OracleResult orc = oracle_bayes(prob, opt);
    io::CsvWriter vcsv({"t", "variance"});
    for (std::size_t m = 0; m < tg.size(); ++m) vcsv.row({tg.node(m), orc.variance[m]});
    out.add("posterior_variance.csv", vcsv.str());
    report["posterior_variance"] = "dense";
  } else {
    report["posterior_variance"] = "skipped: time grid above the dense cap";
  }
  out.add_json("convergence.json", report);
}

inline void run_oracle_check(Experiment& ex, RunOutput& out) {
  const EigenSystem& eig = ex.eig();
  const AssimilationProblem prob = ex.problem();
  OracleOptions opt;
  opt.seed = ex.config().seed;
  const OracleResult orc = oracle_bayes(prob, opt);
  const PosteriorModel post = spectral_posterior(prob, eig);
  const PriorSpec& prior = prob.prior();
  const TimeGrid& tg = ex.time();
  const std::vector<double> tw = trapezoid_weights(tg);

  nlohmann::json rep = nlohmann::json::array();
  double max_rep = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const std::vector<double> row = representer_function(prob, orc.forward_map, i);
    const auto gi = post.gains()[i].values();
    const double rel = relative_l2(row, gi, tw);
    max_rep = std::max(max_rep, rel);
    rep.push_back(rel);
    io::CsvWriter csv({"t", "representer", "spectral"});
    for (std::size_t m = 0; m < tg.size(); ++m) csv.row({tg.node(m), row[m], gi[m]});
    out.add("representer_" + std::to_string(i) + ".csv", csv.str());
  }

  // posterior precision: dense H x / w against the weak low-rank form on free nodes
  const CounterRng rng(ex.config().seed);
  const std::vector<double> fw = prior.free_weights();
  double max_prec = 0.0, max_hess = 0.0;
  for (std::size_t s = 0; s < ex.config().oracle.test_functions; ++s) {
    const std::vector<double> g = random_admissible(prior, rng, s);
    const std::vector<double> x = prior.restrict_to_free(g);
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::VectorXd hx = orc.precision * xv;
    std::vector<double> dense(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) dense[j] = hx[static_cast<Eigen::Index>(j)] / fw[j];
    prior.project(dense);
    const std::vector<double> low = prior.restrict_to_free(post.precision_apply_weak(g));
    max_prec = std::max(max_prec, relative_l2(low, dense, fw));
    const double hf = prob.hessian_form(g);
    max_hess = std::max(max_hess, std::abs(post.quadratic_form(g) - hf) / hf);
  }

  const MapResult map = map_estimate(prob);
  std::vector<double> diff(tg.size()), ref(tg.size());
  for (std::size_t m = 0; m < tg.size(); ++m) {
    diff[m] = map.flux[m];
    ref[m] = orc.mean[m];
  }
  const double map_rel = relative_l2(diff, ref, tw);
  out.add_json("summary.json", {{"representer_relative_l2", rep},
                                {"max_representer_relative_l2", max_rep},
                                {"max_precision_relative_l2", max_prec},
                                {"max_hessian_relative", max_hess},
                                {"map_vs_dense_relative_l2", map_rel},
                                {"forward_adjoint_agreement", orc.path_agreement},
                                {"continuity_constant", orc.continuity_constant},
                                {"n_modes", eig.size()}});
}

inline std::vector<double> blind_seed(const std::string& kind, const TimeGrid& tg, double T) {
  std::vector<double> s(tg.size());
  for (std::size_t m = 0; m < tg.size(); ++m) {
    const double t = tg.node(m);
    s[m] = kind == "sine" ? std::sin(3.0 * std::numbers::pi * t / T) : t * (T - t);
  }
  return s;
}

inline void run_blind(Experiment& ex, RunOutput& out) {
  const EigenSystem& eig = ex.eig();
  const auto& bc = ex.config().blind;
  const TimeGrid& tg = ex.time();
  const double t_obs = ex.t_obs_or_end(bc.t_obs);
  const PriorSpec prior = ex.prior();
  const auto constraints = prior.domain_functionals();
  const BlindDirection bd = blind_direction(eig, t_obs, bc.exponentials, tg,
                                            blind_seed(bc.seed_function, tg, tg.length()), constraints);
  io::CsvWriter gcsv({"t", "G"});
  for (std::size_t m = 0; m < tg.size(); ++m) gcsv.row({tg.node(m), bd.values[m]});
  out.add("blind.csv", gcsv.str());
  io::CsvWriter pcsv({"n", "lambda", "projection"});
  for (std::size_t n = 0; n < bd.projections.size(); ++n) {
    pcsv.row({static_cast<double>(n), eig.lambdas[n], bd.projections[n]});
  }
  out.add("projections.csv", pcsv.str());

  const CounterRng rng(ex.config().seed);
  const double g_norm = detail::l2_norm(bd.values, tg);
  double max_proj = 0.0, max_form = 0.0;
  PosteriorModel model(prior);
  for (std::size_t s = 0; s < bc.test_weights; ++s) {
    const Weight w = random_resolved_weight(eig, bc.exponentials, rng, s, "random_" + std::to_string(s));
    const GainDirection g = gain_direction(eig, *w.coefficients(), t_obs, 1.0, tg);
    max_proj = std::max(max_proj, std::abs(g.inner(bd.values)) / (g_norm * g.norm()));
    model.add(g);
  }
  const double pf = model.prior_form(bd.values);
  max_form = std::abs(model.quadratic_form(bd.values) - pf) / pf;
  out.add_json("summary.json", {{"exponentials", bc.exponentials},
                                {"t_obs", t_obs},
                                {"retained_constraints", bd.retained},
                                {"max_exponential_projection", bd.max_projection},
                                {"gram_min_eigenvalue", bd.gram_min_eigenvalue},
                                {"gram_max_eigenvalue", bd.gram_max_eigenvalue},
                                {"gram_log10_condition", bd.gram_log10_condition},
                                {"test_weights", bc.test_weights},
                                {"max_weight_projection", max_proj},
                                {"posterior_prior_form_relative", max_form}});
}

inline void run_compare_altitude(Experiment& ex, RunOutput& out) {
  const EigenSystem& eig = ex.eig();
  const TimeGrid& tg = ex.time();
  const double T = ex.t_obs_or_end(ex.config().compare.t_obs);
  const CanonicalWeights cw = canonical_weights(eig);
  const GainDirection gp = gain_direction(eig, *cw.plus.coefficients(), T, 1.0, tg);
  const GainDirection gm = gain_direction(eig, *cw.minus.coefficients(), T, 1.0, tg);
  const GainAnalysis ap = analyze_gain(gp), am = analyze_gain(gm);
  const double lam = eig.lambdas[1];
  const double closed = 2.0 * eig.k_surface() * (-std::expm1(-lam * T)) / lam;
  const double diff = std::abs(ap.mean_projection) - std::abs(am.mean_projection);
  // cross-check on the node values by the trapezoid rule
  const std::size_t last = tg.require_node(T);
  const TimeGrid sub(T, last + 1);
  const double quad = trapezoid(gp.values().first(last + 1), sub) -
                      trapezoid(gm.values().first(last + 1), sub);
  io::CsvWriter csv({"t", "G_plus", "G_minus"});
  for (std::size_t m = 0; m < tg.size(); ++m) csv.row({tg.node(m), gp.values()[m], gm.values()[m]});
  out.add("gains.csv", csv.str());
  out.add_json("summary.json", {{"t_obs", T},
                                {"lambda_1", lam},
                                {"mean_projection_plus", ap.mean_projection},
                                {"mean_projection_minus", am.mean_projection},
                                {"mean_gain_difference", diff},
                                {"closed_form_difference", closed},
                                {"relative_error", std::abs(diff - closed) / closed},
                                {"quadrature_difference", quad},
                                {"positive", diff > 0.0},
                                {"monotonicity_plus", to_string(ap.monotone)},
                                {"monotonicity_minus", to_string(am.monotone)}});
}

}  // namespace detail

/// Runs the configured scenario and returns its files (manifest not included).
inline RunOutput run_scenario(const ExperimentConfig& config, const std::filesystem::path& config_dir = {}) {
  Experiment ex(config, config_dir);
  RunOutput out;
  switch (config.scenario) {
    case Scenario::validate: detail::run_validate(ex, out); break;
    case Scenario::simulate: detail::run_simulate(ex, out); break;
    case Scenario::eigen: detail::run_eigen(ex, out); break;
    case Scenario::weights: detail::run_weights(ex, out); break;
    case Scenario::gains: detail::run_gains(ex, out); break;
    case Scenario::assimilate: detail::run_assimilate(ex, out); break;
    case Scenario::oracle_check: detail::run_oracle_check(ex, out); break;
    case Scenario::blind: detail::run_blind(ex, out); break;
    case Scenario::compare_altitude: detail::run_compare_altitude(ex, out); break;
  }
  return out;
}

/// Process exit status for an error raised by a scenario.
inline int exit_code(const std::exception& e) {
  if (dynamic_cast<const CapacityError*>(&e)) return 4;
  if (dynamic_cast<const NumericalError*>(&e) || dynamic_cast<const SingularityError*>(&e)) return 3;
  return 2;
}

inline const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const AssumptionError*>(&e)) return "assumption";
  if (dynamic_cast<const CapacityError*>(&e)) return "capacity";
  if (dynamic_cast<const StabilityError*>(&e)) return "stability";
  if (dynamic_cast<const DiagnosticError*>(&e)) return "diagnostic";
  if (dynamic_cast<const DegenerateSeedError*>(&e)) return "degenerate_seed";
  if (dynamic_cast<const NumericalError*>(&e)) return "numerical";
  if (dynamic_cast<const SingularityError*>(&e)) return "singularity";
  if (dynamic_cast<const DomainError*>(&e)) return "domain";
  if (dynamic_cast<const WeightPositivityError*>(&e)) return "weight_positivity";
  if (dynamic_cast<const ArgumentError*>(&e)) return "argument";
  return "error";
}

}  // namespace colflux
