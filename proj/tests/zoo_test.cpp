#include "vflsim/zoo.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "vflsim/rng.hpp"

using namespace vflsim;
using zoo::DirectionKind;

TEST(Phi, SphereAndGaussianFactors) {
  EXPECT_DOUBLE_EQ(zoo::phi(7, DirectionKind::kUnitSphere), 7.0);
  EXPECT_DOUBLE_EQ(zoo::phi(7, DirectionKind::kStandardGaussian), 1.0);
  EXPECT_DOUBLE_EQ(zoo::phi(1, DirectionKind::kUnitSphere), 1.0);
  EXPECT_THROW(zoo::phi(0, DirectionKind::kUnitSphere), config_error);
}

TEST(SampleDirection, OneDimensionalSphereIsSign) {
  Rng rng(1);
  for (int rep = 0; rep < 50; ++rep) {
    auto u = zoo::sample_direction(1, DirectionKind::kUnitSphere, rng);
    ASSERT_EQ(u.size(), 1u);
    EXPECT_TRUE(u[0] == 1.0 || u[0] == -1.0) << u[0];
  }
}

TEST(SampleDirection, SphereNormIsOne) {
  Rng rng(2);
  for (int d : {2, 5, 33}) {
    auto u = zoo::sample_direction(d, DirectionKind::kUnitSphere, rng);
    double n2 = 0;
    for (double v : u) n2 += v * v;
    EXPECT_NEAR(std::sqrt(n2), 1.0, 1e-12);
  }
}

TEST(SampleDirection, ZeroDimensionThrows) {
  Rng rng(3);
  EXPECT_THROW(zoo::sample_direction(0, DirectionKind::kUnitSphere, rng),
               config_error);
}

TEST(SampleDirection, GaussianMomentsMatch) {
  Rng rng(4);
  const int d = 3;
  const int n = 1'000'000;
  std::vector<double> mean(d, 0.0), sq(d, 0.0);
  for (int rep = 0; rep < n; ++rep) {
    auto u = zoo::sample_direction(d, DirectionKind::kStandardGaussian, rng);
    for (int k = 0; k < d; ++k) {
      mean[k] += u[k];
      sq[k] += u[k] * u[k];
    }
  }
  for (int k = 0; k < d; ++k) {
    mean[k] /= n;
    double var = sq[k] / n - mean[k] * mean[k];
    EXPECT_NEAR(mean[k], 0.0, 4e-3);
    EXPECT_NEAR(var, 1.0, 0.01);
  }
}

TEST(TwoPointEstimate, EqualLossesGiveZero) {
  zoo::Perturbation p{{0.3, -0.4, 0.5}, 0.1, 0, 0};
  auto g = zoo::two_point_estimate(1.7, 1.7, p, DirectionKind::kUnitSphere);
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(TwoPointEstimate, DirectArithmetic) {
  // d=2 sphere, u=(1,0), mu=0.1, h=1.0, h_hat=1.3 -> (2/0.1)*0.3*(1,0)
  zoo::Perturbation p{{1.0, 0.0}, 0.1, 0, 0};
  auto g = zoo::two_point_estimate(1.3, 1.0, p, DirectionKind::kUnitSphere);
  EXPECT_NEAR(g[0], 6.0, 1e-12);
  EXPECT_NEAR(g[1], 0.0, 1e-12);
}

TEST(TwoPointEstimate, NonFiniteLossThrows) {
  zoo::Perturbation p{{1.0}, 0.1, 7, 3};
  try {
    zoo::two_point_estimate(std::nan(""), 1.0, p, DirectionKind::kUnitSphere);
    FAIL() << "expected numeric_error";
  } catch (const numeric_error& e) {
    EXPECT_NE(std::string(e.what()).find("sample 7"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("client 3"), std::string::npos);
  }
}

TEST(TwoPointEstimate, LinearInLossDifference) {
  Rng rng(5);
  auto u = zoo::sample_direction(6, DirectionKind::kUnitSphere, rng);
  zoo::Perturbation p{u, 0.01, 0, 0};
  auto g1 = zoo::two_point_estimate(2.0, 1.0, p, DirectionKind::kUnitSphere);
  auto g3 = zoo::two_point_estimate(4.0, 1.0, p, DirectionKind::kUnitSphere);
  for (std::size_t k = 0; k < u.size(); ++k) EXPECT_NEAR(g3[k], 3.0 * g1[k], 1e-12);
}

// For linear f the smoothed gradient equals the true gradient, so the
// Monte-Carlo mean of the estimator must recover the coefficients.
TEST(EstimateGradientDirect, LinearFunctionMean) {
  const int d = 5;
  std::vector<double> a{1.0, 0.0, 0.0, 0.0, 0.0};
  zoo::ScalarField f = [&](std::span<const double> w) {
    double s = 0;
    for (int k = 0; k < d; ++k) s += a[k] * w[k];
    return s;
  };
  std::vector<double> w(d, 0.2);
  Rng rng(6);
  std::vector<double> mean(d, 0.0);
  const int n = 1'000'000;
  for (int rep = 0; rep < n; ++rep) {
    zoo::Perturbation p{
        zoo::sample_direction(d, DirectionKind::kUnitSphere, rng), 1e-3, 0, 0};
    auto g = zoo::estimate_gradient_direct(f, w, p, DirectionKind::kUnitSphere);
    for (int k = 0; k < d; ++k) mean[k] += g[k];
  }
  double err = 0, ref = 0;
  for (int k = 0; k < d; ++k) {
    mean[k] /= n;
    err += (mean[k] - a[k]) * (mean[k] - a[k]);
    ref += a[k] * a[k];
  }
  EXPECT_LE(std::sqrt(err / ref), 0.01);
}

TEST(EstimateGradientDirect, ConstantFunctionIsZero) {
  zoo::ScalarField f = [](std::span<const double>) { return 4.2; };
  Rng rng(7);
  std::vector<double> w(3, 1.0);
  zoo::Perturbation p{zoo::sample_direction(3, DirectionKind::kUnitSphere, rng),
                      1e-2, 0, 0};
  auto g = zoo::estimate_gradient_direct(f, w, p, DirectionKind::kUnitSphere);
  for (double v : g) EXPECT_EQ(v, 0.0);
}

// f = 0.5*||w||^2 at w = 0: the estimate is pure smoothing bias,
// phi(d) * (mu/2) * u for sphere directions.
TEST(EstimateGradientDirect, PureSmoothingBiasAtOrigin) {
  const int d = 4;
  zoo::ScalarField f = [](std::span<const double> w) {
    double s = 0;
    for (double v : w) s += v * v;
    return 0.5 * s;
  };
  Rng rng(8);
  std::vector<double> w(d, 0.0);
  const double mu = 0.05;
  auto u = zoo::sample_direction(d, DirectionKind::kUnitSphere, rng);
  zoo::Perturbation p{u, mu, 0, 0};
  auto g = zoo::estimate_gradient_direct(f, w, p, DirectionKind::kUnitSphere);
  for (int k = 0; k < d; ++k) EXPECT_NEAR(g[k], d * (mu / 2) * u[k], 1e-12);
}

// Quadratic with anisotropic curvature: Monte-Carlo mean of the estimator
// approaches the analytic gradient (for quadratics the smoothed gradient
// equals the true one), and the smoothing bias stays below mu*L*d/2.
TEST(EstimateGradientDirect, QuadraticMeanWithinTolerance) {
  const int d = 10;
  zoo::ScalarField f = [&](std::span<const double> w) {
    double s = 0;
    for (int k = 0; k < d; ++k) s += (k + 1) * w[k] * w[k];
    return 0.5 * s;
  };
  Rng wrng(9);
  std::vector<double> w(d);
  for (auto& v : w) v = wrng.uniform01() - 0.5;
  std::vector<double> grad(d);
  for (int k = 0; k < d; ++k) grad[k] = (k + 1) * w[k];

  Rng rng(10);
  const double mu = 1e-3;
  std::vector<double> mean(d, 0.0);
  const int n = 1'000'000;
  for (int rep = 0; rep < n; ++rep) {
    zoo::Perturbation p{
        zoo::sample_direction(d, DirectionKind::kUnitSphere, rng), mu, 0, 0};
    auto g = zoo::estimate_gradient_direct(f, w, p, DirectionKind::kUnitSphere);
    for (int k = 0; k < d; ++k) mean[k] += g[k];
  }
  double err2 = 0, ref2 = 0;
  for (int k = 0; k < d; ++k) {
    mean[k] /= n;
    err2 += (mean[k] - grad[k]) * (mean[k] - grad[k]);
    ref2 += grad[k] * grad[k];
  }
  const double bias_allowance = mu * d * d / 2.0;  // L = d for this fixture
  EXPECT_LE(std::sqrt(err2), 0.01 * std::sqrt(ref2) + bias_allowance);
}
