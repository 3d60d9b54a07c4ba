#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "colflux/posterior.hpp"
#include "colflux/transport.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace colflux;

namespace {

constexpr double kPi = std::numbers::pi;

struct ConstantCase {
  CoefficientProfile profile = testing_support::constant_profile(2001);
  EigenSystem eig = eigensystem(profile, 24);
  TimeGrid tg{1.0, 1025};
};

const ConstantCase& constant_case() {
  static const ConstantCase c;
  return c;
}

std::vector<double> smooth_random(std::mt19937_64& rng, const TimeGrid& g, bool pinned) {
  std::normal_distribution<double> d(0.0, 1.0);
  const double T = g.length();
  double c[5];
  for (double& x : c) x = d(rng);
  std::vector<double> v(g.size());
  for (std::size_t j = 0; j < v.size(); ++j) {
    const double t = g.node(j);
    double acc = 0.0;
    for (int k = 0; k < 5; ++k) acc += c[k] * std::sin((k + 1) * kPi * t / T) / (k + 1);
    if (!pinned) acc += 0.3 * c[0] + 0.2 * c[1] * t;
    v[j] = acc;
  }
  if (pinned) {
    v.front() = 0.0;
    v.back() = 0.0;
  }
  return v;
}

std::vector<double> random_coefficients(std::mt19937_64& rng, std::size_t m) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> a(m);
  a[0] = 1.0;
  for (std::size_t n = 1; n < m; ++n) a[n] = 0.5 * u(rng) / static_cast<double>(n * n);
  return a;
}

}  // namespace

TEST(GainDirection, CanonicalPlusClosedForm) {
  const auto& c = constant_case();
  const std::vector<double> a{1.0, 1.0};
  const auto g = gain_direction(c.eig, a, 1.0, 1.0, c.tg);
  for (std::size_t j = 0; j < c.tg.size(); ++j) {
    EXPECT_NEAR(g.values()[j], 1.0 + std::exp(kPi * kPi * (c.tg.node(j) - 1.0)), 1e-6);
  }
  EXPECT_NEAR(g.values().back(), 2.0, 1e-14);
  EXPECT_NEAR(g.values().front(), 1.0000517, 1e-7);
}

TEST(GainDirection, ConstantWeightGivesConstant) {
  const auto& c = constant_case();
  const std::vector<double> a{2.5};
  const auto g = gain_direction(c.eig, a, 0.5, 0.5, c.tg);
  for (std::size_t j = 0; j < c.tg.size(); ++j) {
    EXPECT_NEAR(g.values()[j], c.tg.node(j) <= 0.5 ? 5.0 : 0.0, 1e-12);
  }
}

TEST(GainDirection, ScalesWithWeight) {
  const auto& c = constant_case();
  const std::vector<double> a{1.0, 0.4, 0.1}, b{3.0, 1.2, 0.3};
  const auto ga = gain_direction(c.eig, a, 0.75, 1.0, c.tg);
  const auto gb = gain_direction(c.eig, b, 0.75, 1.0, c.tg);
  for (std::size_t j = 0; j < c.tg.size(); ++j) EXPECT_NEAR(gb.values()[j], 3.0 * ga.values()[j], 1e-12);
}

TEST(GainDirection, Errors) {
  const auto& c = constant_case();
  EXPECT_THROW(gain_direction(c.eig, std::vector<double>{}, 1.0, 1.0, c.tg), ArgumentError);
  EXPECT_THROW(gain_direction(c.eig, std::vector<double>{1.0}, 0.3333, 1.0, c.tg), ArgumentError);
  EXPECT_THROW(gain_direction(c.eig, std::vector<double>{1.0}, 1.0, 0.0, c.tg), ArgumentError);
}

TEST(GainDirection, NormMatchesQuadratureOfSeries) {
  const auto& c = constant_case();
  const std::vector<double> a{1.0, 0.5, 0.25};
  const auto g = gain_direction(c.eig, a, 1.0, 1.0, c.tg);
  const double ref = oracle::gauss(
      [&](double t) {
        double s = 0.0;
        for (std::size_t n = 0; n < a.size(); ++n) s += a[n] * std::exp(c.eig.lambdas[n] * (t - 1.0));
        return s * s;
      },
      0.0, 1.0, 200);
  EXPECT_NEAR(g.norm_squared(), ref, 1e-12 * ref);
}

TEST(GainDirection, TruncationEstimateReported) {
  const auto& c = constant_case();
  const std::vector<double> a{1.0, 0.5};
  const auto g = gain_direction(c.eig, a, 1.0, 1.0, c.tg, 0.1);
  const auto e = g.truncation_error();
  EXPECT_GT(e.back(), 0.0);
  for (std::size_t j = 0; j + 1 < e.size(); ++j) EXPECT_LE(e[j], e[j + 1] + 1e-15);
}

// <G, Ghat> against r^{-1} H q(., t_obs) for the transport solution driven by Ghat from rest.
TEST(GainDirection, MatchesTransportSolveOracle) {
  std::mt19937_64 rng(41);
  const auto p = testing_support::random_profile(rng, 401);
  const auto eig = eigensystem(p, 50);
  const TimeGrid tg(1.0, 2049);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double c1 = u(rng), c2 = u(rng);
  std::vector<double> rho(p.grid().size());
  for (std::size_t j = 0; j < rho.size(); ++j) {
    const double z = p.grid().node(j);
    rho[j] = 0.2 + c1 * z * z + c2 * std::exp(-10.0 * (z - 0.3) * (z - 0.3));
  }
  const Weight w(p.grid(), rho);
  const double r = 0.5;
  const auto ex = expand_weight(rho, eig);
  const auto g = gain_direction(eig, ex.coefficients, 1.0, r, tg);
  const std::vector<double> zero(p.grid().size(), 0.0);
  for (int trial = 0; trial < 5; ++trial) {
    const auto ghat = smooth_random(rng, tg, false);
    const auto field = solve_forward(p, FluxSignal(tg, ghat), zero);
    const double ref = apply_observation(w, field.slice(tg.size() - 1)) / r;
    EXPECT_LE(std::abs(g.inner(ghat) - ref), 1e-2 * std::abs(ref)) << trial;
  }
}

TEST(PosteriorModel, NoObservationsEqualsPrior) {
  std::mt19937_64 rng(42);
  const auto& c = constant_case();
  const PosteriorModel model(PriorSpec(FluxSignal::constant(c.tg, 0.0), PriorKind::dirichlet, 1.0));
  const auto g = smooth_random(rng, c.tg, true);
  EXPECT_EQ(model.quadratic_form(g), model.prior_form(g));
  EXPECT_EQ(model.precision_apply(g), model.prior().apply_inverse(g));
}

TEST(PosteriorModel, SingleNormalisedGain) {
  const auto& c = constant_case();
  const std::vector<double> a{1.0, 1.0};
  const auto gi = gain_direction(c.eig, a, 1.0, 1.0, c.tg);
  const PosteriorModel model(PriorSpec(FluxSignal::constant(c.tg, 0.0), PriorKind::diagonal, 1.0), {gi});
  std::vector<double> g(gi.values().begin(), gi.values().end());
  const double n = gi.norm();
  for (double& v : g) v /= n;
  EXPECT_NEAR(model.quadratic_form(g), model.prior_form(g) + gi.norm_squared(), 1e-4 * gi.norm_squared());
}

TEST(PosteriorModel, InformationNeverLost) {
  std::mt19937_64 rng(43);
  const auto& c = constant_case();
  std::vector<GainDirection> gains;
  for (double t : {0.25, 0.5, 1.0}) gains.push_back(gain_direction(c.eig, random_coefficients(rng, 10), t, 0.1, c.tg));
  const PosteriorModel model(PriorSpec(FluxSignal::constant(c.tg, 0.0), PriorKind::dirichlet, 1.0), gains);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = smooth_random(rng, c.tg, true);
    EXPECT_GE(model.quadratic_form(g), model.prior_form(g));
  }
}

TEST(PosteriorModel, ZeroMapsToZero) {
  const auto& c = constant_case();
  const std::vector<double> a{1.0, 1.0};
  const PosteriorModel model(PriorSpec(FluxSignal::constant(c.tg, 0.0), PriorKind::dirichlet, 1.0),
                             {gain_direction(c.eig, a, 0.5, 1.0, c.tg)});
  const std::vector<double> z(c.tg.size(), 0.0);
  for (double v : model.precision_apply(z)) EXPECT_EQ(v, 0.0);
  for (double v : model.precision_apply_weak(z)) EXPECT_EQ(v, 0.0);
}

TEST(PosteriorModel, OrthogonalDirectionUnchanged) {
  std::mt19937_64 rng(44);
  const auto& c = constant_case();
  const PriorSpec prior(FluxSignal::constant(c.tg, 0.0), PriorKind::dirichlet, 1.0);
  std::vector<GainDirection> gains;
  for (double r : {0.5, 2.0}) gains.push_back(gain_direction(c.eig, random_coefficients(rng, 12), 1.0, r, c.tg));
  const PosteriorModel model(prior, gains);
  const auto seed = smooth_random(rng, c.tg, true);
  const auto b = blind_direction(c.eig, 1.0, 12, c.tg, seed, prior.domain_functionals());
  const auto& g = b.values;
  const double pf = model.prior_form(g);
  EXPECT_NEAR(model.quadratic_form(g), pf, 1e-10 * pf);
  const auto strong = model.precision_apply(g);
  const auto base = prior.apply_inverse(g);
  double scale = 0.0, diff = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    scale = std::max(scale, std::abs(base[j]));
    diff = std::max(diff, std::abs(strong[j] - base[j]));
  }
  EXPECT_LE(diff, 1e-8 * scale);
}

class DensePrecision : public ::testing::TestWithParam<PriorKind> {};

// Dense (K + sum c_i c_i^T) / W with hat moments from panel Gauss quadrature.
TEST_P(DensePrecision, WeakFormMatchesDenseOracle) {
  std::mt19937_64 rng(45);
  const auto& c = constant_case();
  const TimeGrid tg(1.0, 257);
  const PriorSpec prior(FluxSignal::constant(tg, 0.0), GetParam(), 0.8);
  std::vector<GainDirection> gains;
  std::vector<std::vector<double>> cov;
  for (double t : {0.25, 0.5, 1.0}) {
    const auto a = random_coefficients(rng, 8);
    const double r = 0.2;
    gains.push_back(gain_direction(c.eig, a, t, r, tg));
    std::vector<double> cv(tg.size(), 0.0);
    for (std::size_t n = 0; n < a.size(); ++n) {
      const auto h = oracle::hat_exponential_weights(tg.size(), 1.0, c.eig.lambdas[n], t);
      for (std::size_t j = 0; j < cv.size(); ++j) cv[j] += a[n] / r * h[j];
    }
    cov.push_back(prior.embed_transpose(cv));
  }
  const PosteriorModel model(prior, gains);
  const Eigen::MatrixXd K = prior.stiffness_matrix();
  const auto n = K.rows();
  Eigen::MatrixXd A = K;
  for (const auto& cv : cov) {
    const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(cv.data(), n);
    A += v * v.transpose();
  }
  const auto w = prior.free_weights();
  for (int trial = 0; trial < 5; ++trial) {
    auto x = testing_support::random_vector(rng, static_cast<std::size_t>(n));
    prior.project(x);
    const auto g = prior.embed(x);
    Eigen::VectorXd y = A * Eigen::Map<const Eigen::VectorXd>(x.data(), n);
    std::vector<double> ref(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) ref[static_cast<std::size_t>(j)] = y(j) / w[static_cast<std::size_t>(j)];
    prior.project(ref);
    const auto got = prior.restrict_to_free(model.precision_apply_weak(g));
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < ref.size(); ++j) {
      num += (got[j] - ref[j]) * (got[j] - ref[j]);
      den += ref[j] * ref[j];
    }
    EXPECT_LE(std::sqrt(num / den), 1e-8) << to_string(GetParam());
  }
}

// Strong form: C0^{-1} g + sum_i (c_i . g) G_i(nodes).
TEST_P(DensePrecision, StrongFormMatchesDenseOracle) {
  std::mt19937_64 rng(46);
  const auto& c = constant_case();
  const TimeGrid tg(1.0, 257);
  const PriorSpec prior(FluxSignal::constant(tg, 0.0), GetParam(), 1.0);
  std::vector<GainDirection> gains;
  std::vector<std::vector<double>> cov, nodal;
  for (double t : {0.25, 0.5, 1.0}) {
    const auto a = random_coefficients(rng, 8);
    gains.push_back(gain_direction(c.eig, a, t, 1.0, tg));
    std::vector<double> cv(tg.size(), 0.0), gv(tg.size(), 0.0);
    for (std::size_t n = 0; n < a.size(); ++n) {
      const double lam = c.eig.lambdas[n];
      const auto h = oracle::hat_exponential_weights(tg.size(), 1.0, lam, t);
      for (std::size_t j = 0; j < cv.size(); ++j) {
        cv[j] += a[n] * h[j];
        if (tg.node(j) <= t + 1e-12) gv[j] += a[n] * std::exp(lam * (tg.node(j) - t));
      }
    }
    cov.push_back(cv);
    nodal.push_back(gv);
  }
  const PosteriorModel model(prior, gains);
  for (int trial = 0; trial < 5; ++trial) {
    auto x = testing_support::random_vector(rng, prior.free_size());
    prior.project(x);
    const auto g = prior.embed(x);
    auto ref = prior.apply_inverse(g);
    for (std::size_t i = 0; i < cov.size(); ++i) {
      double ip = 0.0;
      for (std::size_t j = 0; j < g.size(); ++j) ip += cov[i][j] * g[j];
      for (std::size_t j = 0; j < g.size(); ++j) ref[j] += ip * nodal[i][j];
    }
    auto rx = prior.restrict_to_free(ref);
    prior.project(rx);
    const auto got = prior.restrict_to_free(model.precision_apply(g));
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < rx.size(); ++j) {
      num += (got[j] - rx[j]) * (got[j] - rx[j]);
      den += rx[j] * rx[j];
    }
    EXPECT_LE(std::sqrt(num / den), 1e-8) << to_string(GetParam());
  }
}

TEST_P(DensePrecision, BilinearFormIsSymmetric) {
  std::mt19937_64 rng(47);
  const auto& c = constant_case();
  const TimeGrid tg(1.0, 257);
  const PriorSpec prior(FluxSignal::constant(tg, 0.0), GetParam(), 1.0);
  const PosteriorModel model(prior, {gain_direction(c.eig, random_coefficients(rng, 6), 0.5, 1.0, tg)});
  auto x1 = testing_support::random_vector(rng, prior.free_size());
  auto x2 = testing_support::random_vector(rng, prior.free_size());
  prior.project(x1);
  prior.project(x2);
  const auto g1 = prior.embed(x1), g2 = prior.embed(x2);
  const double a = model.bilinear(g1, g2), b = model.bilinear(g2, g1);
  EXPECT_NEAR(a, b, 1e-12 * (std::abs(a) + 1.0));
}

INSTANTIATE_TEST_SUITE_P(Kinds, DensePrecision,
                         ::testing::Values(PriorKind::dirichlet, PriorKind::periodic, PriorKind::diagonal),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(AnalyzeGain, CanonicalPair) {
  const auto& c = constant_case();
  const auto cw = canonical_weights(c.eig);
  const auto ep = expand_weight(cw.plus.values(), c.eig);
  const auto em = expand_weight(cw.minus.values(), c.eig);
  const auto gp = analyze_gain(gain_direction(c.eig, ep.coefficients, 1.0, 1.0, c.tg));
  const auto gm = analyze_gain(gain_direction(c.eig, em.coefficients, 1.0, 1.0, c.tg));
  const double d = (1.0 - std::exp(-kPi * kPi)) / (kPi * kPi);
  EXPECT_NEAR(gp.mean_projection, 1.0 + d, 1e-6);
  EXPECT_NEAR(gm.mean_projection, 1.0 - d, 1e-6);
  EXPECT_EQ(gp.monotone, Monotonicity::increasing);
  EXPECT_EQ(gm.monotone, Monotonicity::decreasing);
  EXPECT_NEAR(std::abs(gp.mean_projection) - std::abs(gm.mean_projection), 2.0 * d, 1e-6);
  EXPECT_GT(std::abs(gp.mean_projection) - std::abs(gm.mean_projection), 0.0);
}

TEST(ClassifyMonotone, Cases) {
  EXPECT_EQ(classify_monotone(std::vector<double>{1, 2, 3}, 1e-9), Monotonicity::increasing);
  EXPECT_EQ(classify_monotone(std::vector<double>{3, 2, 2}, 1e-9), Monotonicity::decreasing);
  EXPECT_EQ(classify_monotone(std::vector<double>{1, 1, 1}, 1e-9), Monotonicity::constant);
  EXPECT_EQ(classify_monotone(std::vector<double>{1, 3, 2}, 1e-9), Monotonicity::neither);
}

namespace {

Weight sampled_weight(const ColumnGrid& g, double (*f)(double)) {
  std::vector<double> v(g.size());
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = f(g.node(j));
  return Weight(g, v);
}

}  // namespace

TEST(MonotoneWeightCheck, DecreasingWeight) {
  const auto& c = constant_case();
  const auto rho = sampled_weight(c.profile.grid(), [](double z) { return 1.0 - z; });
  EXPECT_TRUE(monotone_weight_check(c.profile, c.eig, rho, 1.0, c.tg));
  const auto ex = expand_weight(rho.values(), c.eig);
  EXPECT_EQ(analyze_gain(gain_direction(c.eig, ex.coefficients, 1.0, 1.0, c.tg)).monotone,
            Monotonicity::increasing);
}

TEST(MonotoneWeightCheck, ConstantWeight) {
  const auto& c = constant_case();
  const auto rho = sampled_weight(c.profile.grid(), [](double) { return 1.0; });
  EXPECT_TRUE(monotone_weight_check(c.profile, c.eig, rho, 1.0, c.tg));
  const auto ex = expand_weight(rho.values(), c.eig);
  EXPECT_EQ(analyze_gain(gain_direction(c.eig, ex.coefficients, 1.0, 1.0, c.tg)).monotone,
            Monotonicity::constant);
}

TEST(MonotoneWeightCheck, IncreasingWeightVariableDiffusivity) {
  const auto p = testing_support::linear_k_profile(1001);
  const auto eig = eigensystem(p, 60);
  const TimeGrid tg(1.0, 513);
  const auto rho = sampled_weight(p.grid(), [](double z) { return z; });
  EXPECT_TRUE(monotone_weight_check(p, eig, rho, 1.0, tg));
}

TEST(MonotoneWeightCheck, Family) {
  std::mt19937_64 rng(48);
  double (*family[])(double) = {
      [](double z) { return z * z; },
      [](double z) { return std::exp(-3.0 * z); },
      [](double z) { return 1.0 - z * z * z; },
      [](double z) { return 1.0 / (1.0 + 4.0 * z); },
      [](double z) { return std::tanh(5.0 * (z - 0.5)) + 1.0; },
  };
  const TimeGrid tg(1.0, 513);
  for (int trial = 0; trial < 3; ++trial) {
    const auto p = testing_support::random_profile(rng, 801);
    const auto eig = eigensystem(p, 80);
    for (auto f : family) {
      EXPECT_TRUE(monotone_weight_check(p, eig, sampled_weight(p.grid(), f), 1.0, tg));
      EXPECT_TRUE(monotone_weight_check(p, eig, sampled_weight(p.grid(), f), 0.5, tg));
    }
  }
}

TEST(MonotoneWeightCheck, NonMonotoneRejected) {
  const auto& c = constant_case();
  const auto rho = sampled_weight(c.profile.grid(), [](double z) { return std::sin(kPi * z); });
  EXPECT_THROW(monotone_weight_check(c.profile, c.eig, rho, 1.0, c.tg), ArgumentError);
}

TEST(BlindDirection, SingleExponentialRemovesMean) {
  std::mt19937_64 rng(49);
  const auto& c = constant_case();
  const auto seed = smooth_random(rng, c.tg, false);
  const auto b = blind_direction(c.eig, 1.0, 1, c.tg, seed);
  EXPECT_NEAR(trapezoid(std::span<const double>(b.values), c.tg), 0.0, 1e-12);
  double mean = trapezoid(std::span<const double>(seed), c.tg);
  for (std::size_t j = 0; j < seed.size(); ++j) EXPECT_NEAR(b.values[j], seed[j] - mean, 1e-12);
}

TEST(BlindDirection, ParabolaSeedTwentyExponentials) {
  const auto& c = constant_case();
  std::vector<double> seed(c.tg.size());
  for (std::size_t j = 0; j < seed.size(); ++j) seed[j] = c.tg.node(j) * (1.0 - c.tg.node(j));
  const auto b = blind_direction(c.eig, 1.0, 20, c.tg, seed);
  EXPECT_LE(b.max_projection, 1e-6);
  ASSERT_EQ(b.projections.size(), 20u);
  // independent check with the Gauss hat-moment oracle
  const double gn = detail::l2_norm(b.values, c.tg);
  for (std::size_t n = 0; n < 20; ++n) {
    const double lam = c.eig.lambdas[n];
    const auto h = oracle::hat_exponential_weights(c.tg.size(), 1.0, lam, 1.0);
    double ip = 0.0;
    for (std::size_t j = 0; j < h.size(); ++j) ip += h[j] * b.values[j];
    const double en = std::sqrt(lam > 0 ? -std::expm1(-2.0 * lam) / (2.0 * lam) : 1.0);
    EXPECT_LE(std::abs(ip) / (gn * en), 1e-6) << n;
  }
  EXPECT_GT(b.gram_log10_condition, 5.0);
}

TEST(BlindDirection, RandomWeightsGainNothing) {
  std::mt19937_64 rng(50);
  const auto& c = constant_case();
  const PriorSpec prior(FluxSignal::constant(c.tg, 0.0), PriorKind::dirichlet, 1.0);
  std::vector<double> seed(c.tg.size());
  for (std::size_t j = 0; j < seed.size(); ++j) seed[j] = c.tg.node(j) * (1.0 - c.tg.node(j));
  const auto domain = prior.domain_functionals();
  const auto b = blind_direction(c.eig, 1.0, 20, c.tg, seed, domain);
  const double gn = detail::l2_norm(b.values, c.tg);
  const double pf = prior.form(b.values, b.values);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a = random_coefficients(rng, 20);
    const auto s = synthesize_weight(a, c.eig);
    ASSERT_FALSE(s.negative);
    const auto gi = gain_direction(c.eig, a, 1.0, 1.0, c.tg);
    EXPECT_LE(std::abs(gi.inner(b.values)), 1e-6 * gn * gi.norm());
    const PosteriorModel model(prior, {gi});
    EXPECT_NEAR(model.quadratic_form(b.values), pf, 1e-10 * pf);
  }
}

TEST(BlindDirection, DegenerateSeed) {
  const auto& c = constant_case();
  EXPECT_THROW(blind_direction(c.eig, 1.0, 1, c.tg, std::vector<double>(c.tg.size(), 2.0)),
               DegenerateSeedError);
}

TEST(BlindDirection, Guards) {
  const auto& c = constant_case();
  const std::vector<double> seed(c.tg.size(), 1.0);
  EXPECT_THROW(blind_direction(c.eig, 1.0, 0, c.tg, seed), ArgumentError);
  EXPECT_THROW(blind_direction(c.eig, 1.0, 25, c.tg, seed), ArgumentError);
  const TimeGrid coarse(1.0, 11);
  EXPECT_THROW(blind_direction(c.eig, 1.0, 20, coarse, std::vector<double>(11, 1.0)), ArgumentError);
}

TEST(IcGainDirection, DampedModes) {
  const auto& c = constant_case();
  const std::vector<double> a{1.0, 1.0};
  const auto v = ic_gain_direction(c.eig, a, 0.1);
  const double damp = std::exp(-kPi * kPi * 0.1);
  EXPECT_NEAR(damp, 0.3727, 1e-4);
  for (std::size_t j = 0; j < v.size(); ++j) {
    EXPECT_NEAR(v[j], 1.0 + damp * std::cos(kPi * c.profile.grid().node(j)), 1e-6);
  }
  for (double x : ic_gain_direction(c.eig, a, 50.0)) EXPECT_NEAR(x, 1.0, 1e-12);
  const auto near0 = ic_gain_direction(c.eig, a, 1e-12);
  const auto syn = synthesize_weight(a, c.eig);
  for (std::size_t j = 0; j < v.size(); ++j) EXPECT_NEAR(near0[j], syn.values[j], 1e-9);
  EXPECT_THROW(ic_gain_direction(c.eig, a, 0.0), ArgumentError);
}
