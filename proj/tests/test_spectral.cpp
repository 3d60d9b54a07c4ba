#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "colflux/spectral.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace colflux;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST(Eigensystem, NeumannCosines) {
  const auto p = testing_support::constant_profile(2001);
  const auto eig = eigensystem(p, 12);
  for (std::size_t n = 1; n <= 10; ++n) {
    const double exact = (n * kPi) * (n * kPi);
    EXPECT_LE(std::abs(eig.lambdas[n] - exact) / exact, 1e-4) << n;
    double err = 0.0;
    for (std::size_t j = 0; j < p.grid().size(); ++j) {
      err = std::max(err, std::abs(eig.modes[n][j] - std::cos(n * kPi * p.grid().node(j))));
    }
    EXPECT_LE(err, 1e-4) << n;
  }
}

TEST(Eigensystem, ZeroModeIsConstant) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = testing_support::random_profile(rng, 401);
    const auto eig = eigensystem(p, 10);
    EXPECT_LE(std::abs(eig.lambdas[0]), 1e-8 * eig.lambdas[1]);
    for (double v : eig.modes[0]) EXPECT_NEAR(v, 1.0, 1e-8);
  }
}

TEST(Eigensystem, LinearDiffusivityMatchesExtrapolatedOracle) {
  const auto coarse = eigensystem(testing_support::linear_k_profile(4001), 6);
  const auto fine = eigensystem(testing_support::linear_k_profile(8001), 6);
  const auto eig = eigensystem(testing_support::linear_k_profile(2001), 6);
  for (std::size_t n = 1; n <= 5; ++n) {
    const double rich = (4.0 * fine.lambdas[n] - coarse.lambdas[n]) / 3.0;
    EXPECT_LE(std::abs(eig.lambdas[n] - rich) / rich, 1e-4) << n;
  }
}

TEST(Eigensystem, LinearDiffusivityMatchesShooting) {
  const auto eig = eigensystem(testing_support::linear_k_profile(2001), 6);
  for (std::size_t n = 1; n <= 5; ++n) {
    const double lam = eig.lambdas[n];
    const double shot = oracle::shooting_eigenvalue([](double z) { return 1.0 + 0.5 * z; },
                                                    [](double) { return 0.0; }, 1.0, 0.97 * lam,
                                                    1.03 * lam);
    EXPECT_LE(std::abs(lam - shot) / shot, 1e-4) << n;
  }
}

TEST(Eigensystem, AdvectionMatchesShooting) {
  const ColumnGrid g(1.0, 2001);
  std::vector<double> k(g.size()), w(g.size());
  auto kf = [](double z) { return 1.0 + 0.3 * z * z; };
  auto wf = [](double z) { return 0.7 * std::sin(kPi * z); };
  for (std::size_t j = 0; j < g.size(); ++j) {
    k[j] = kf(g.node(j));
    w[j] = wf(g.node(j));
  }
  w.back() = 0.0;
  const auto eig = eigensystem(validate_profile(k, w, g), 5);
  for (std::size_t n = 1; n <= 4; ++n) {
    const double lam = eig.lambdas[n];
    const double shot = oracle::shooting_eigenvalue(kf, wf, 1.0, 0.97 * lam, 1.03 * lam);
    EXPECT_LE(std::abs(lam - shot) / shot, 1e-4) << n;
  }
}

TEST(Eigensystem, OrthogonalAndNormalised) {
  std::mt19937_64 rng(12);
  const auto p = testing_support::random_profile(rng, 801);
  const auto eig = eigensystem(p, 20);
  for (std::size_t m = 0; m < eig.size(); ++m) {
    EXPECT_EQ(eig.modes[m][0], 1.0);
    for (std::size_t n = m + 1; n < eig.size(); ++n) {
      EXPECT_LE(std::abs(eig.mu_inner(eig.modes[m], eig.modes[n])),
                1e-8 * std::sqrt(eig.mu_norms[m] * eig.mu_norms[n]));
    }
  }
  for (std::size_t n = 1; n < eig.size(); ++n) EXPECT_GT(eig.lambdas[n], eig.lambdas[n - 1]);
  EXPECT_LT(eig.norm_bound_ratio(), 10.0);
}

TEST(Eigensystem, GrowthIsQuadratic) {
  const auto eig = eigensystem(testing_support::linear_k_profile(2001), 40);
  const auto sums = muntz_partial_sums(eig);
  EXPECT_GT(sums.growth_constant, 0.0);
  EXPECT_LT(sums.max_growth_deviation / sums.growth_constant, 0.1);
}

TEST(Eigensystem, ResolutionGuard) {
  const auto p = testing_support::constant_profile(81);
  EXPECT_NO_THROW(eigensystem(p, 10));
  EXPECT_THROW(eigensystem(p, 11), ArgumentError);
}

TEST(ExpandWeight, CanonicalCoefficients) {
  const auto p = testing_support::constant_profile(1001);
  const auto eig = eigensystem(p, 8);
  std::vector<double> rho(p.grid().size());
  for (std::size_t j = 0; j < rho.size(); ++j) rho[j] = 1.0 + std::cos(kPi * p.grid().node(j));
  const auto ex = expand_weight(rho, eig);
  EXPECT_NEAR(ex.coefficients[0], 1.0, 1e-8);
  EXPECT_NEAR(ex.coefficients[1], 1.0, 1e-6);
  for (std::size_t n = 2; n < ex.coefficients.size(); ++n) EXPECT_NEAR(ex.coefficients[n], 0.0, 1e-6);
}

TEST(ExpandWeight, ConstantWeight) {
  std::mt19937_64 rng(13);
  const auto eig = eigensystem(testing_support::random_profile(rng, 401), 8);
  const auto ex = expand_weight(std::vector<double>(401, 2.5), eig);
  EXPECT_NEAR(ex.coefficients[0], 2.5, 1e-10);
  for (std::size_t n = 1; n < ex.coefficients.size(); ++n) EXPECT_NEAR(ex.coefficients[n], 0.0, 1e-10);
  EXPECT_LE(ex.residual, 1e-10);
}

TEST(ExpandWeight, RoundTripWithinResidual) {
  std::mt19937_64 rng(14);
  const auto p = testing_support::random_profile(rng, 401);
  const auto eig = eigensystem(p, 40);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const double c1 = u(rng), c2 = u(rng), c3 = u(rng);
    std::vector<double> rho(p.grid().size());
    for (std::size_t j = 0; j < rho.size(); ++j) {
      const double z = p.grid().node(j);
      rho[j] = c1 + c2 * z * z + c3 * std::exp(-8.0 * (z - 0.5) * (z - 0.5));
    }
    const auto ex = expand_weight(rho, eig);
    const auto syn = synthesize_weight(ex.coefficients, eig);
    std::vector<double> diff(rho.size());
    for (std::size_t j = 0; j < rho.size(); ++j) diff[j] = rho[j] - syn.values[j];
    EXPECT_NEAR(std::sqrt(eig.mu_inner(diff, diff)), ex.residual, 1e-10 * (1.0 + ex.residual));
    EXPECT_LT(ex.residual, 1e-2);
  }
}

TEST(ExpandWeight, NegativeWeightRejected) {
  const auto eig = eigensystem(testing_support::constant_profile(101), 4);
  std::vector<double> rho(101, 1.0);
  rho[50] = -0.1;
  EXPECT_THROW(expand_weight(rho, eig), WeightPositivityError);
}

TEST(SynthesizeWeight, CanonicalPair) {
  const auto p = testing_support::constant_profile(1001);
  const auto eig = eigensystem(p, 4);
  const std::vector<double> plus{1.0, 1.0}, minus{1.0, -1.0};
  const auto sp = synthesize_weight(plus, eig);
  const auto sm = synthesize_weight(minus, eig);
  for (std::size_t j = 0; j < p.grid().size(); ++j) {
    const double c = std::cos(kPi * p.grid().node(j));
    EXPECT_NEAR(sp.values[j], 1.0 + c, 1e-5);
    EXPECT_NEAR(sm.values[j], 1.0 - c, 1e-5);
  }
  EXPECT_FALSE(sp.negative);
  EXPECT_FALSE(sm.negative);
  EXPECT_EQ(sm.values[0], 0.0);
}

TEST(SynthesizeWeight, SingleHighModeFlagged) {
  const auto eig = eigensystem(testing_support::constant_profile(401), 6);
  std::vector<double> a(6, 0.0);
  a.back() = 1.0;
  const auto s = synthesize_weight(a, eig);
  EXPECT_TRUE(s.negative);
  EXPECT_LT(s.min_value, -0.5);
}

TEST(SynthesizeWeight, TooManyCoefficients) {
  const auto eig = eigensystem(testing_support::constant_profile(401), 6);
  EXPECT_THROW(synthesize_weight(std::vector<double>(7, 0.0), eig), ArgumentError);
}

TEST(MuntzSums, ParabolicConvergesHyperbolicDiverges) {
  const auto eig = eigensystem(testing_support::constant_profile(4001), 128);
  const auto sums = muntz_partial_sums(eig);
  const double limit = 0.5 * (1.0 + std::cosh(1.0) / std::sinh(1.0));
  EXPECT_NEAR(sums.parabolic_limit, limit, 1e-3);
  EXPECT_NEAR(sums.parabolic[63] + 1.0 / (kPi * kPi * 63.5), limit, 1e-3);
  const double ratio = (sums.hyperbolic[127] - sums.hyperbolic[63]) / (std::log(2.0) / kPi);
  EXPECT_NEAR(ratio, 1.0, 0.05);
  EXPECT_NEAR(sums.growth_constant / (kPi * kPi), 1.0, 0.01);
}
