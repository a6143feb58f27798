#include "vflsim/verify.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "vflsim/rng.hpp"

using namespace vflsim;
using verify::CheckReport;
using verify::Fixture;

namespace {

std::vector<double> unit_point(int d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w(d);
  rng.fill_gaussian(w);
  double n = 0;
  for (double v : w) n += v * v;
  n = std::sqrt(n);
  for (auto& v : w) v /= n;
  return w;
}

}  // namespace

TEST(Fixtures, GradientsMatchFiniteDifferences) {
  const int d = 6;
  auto w = unit_point(d, 1);
  for (const Fixture& fx : {verify::make_linear(d),
                            verify::make_scaled_quadratic(d),
                            verify::make_log_sum_exp(d)}) {
    auto g = fx.grad(w);
    const double step = 1e-6;
    for (int k = 0; k < d; ++k) {
      auto wp = w, wm = w;
      wp[k] += step;
      wm[k] -= step;
      double fd = (fx.f(wp) - fx.f(wm)) / (2 * step);
      EXPECT_NEAR(g[k], fd, 1e-6) << fx.name << " coord " << k;
    }
  }
}

TEST(SmoothedUnbiasedness, LinearHasNoBiasAtAnyMu) {
  auto fx = verify::make_linear(8);
  auto w = unit_point(8, 2);
  Rng rng(3);
  auto r = verify::check_smoothed_unbiasedness(fx, w, 0.05, 100'000, rng);
  EXPECT_TRUE(r.pass) << r.measured;
}

TEST(SmoothedUnbiasedness, QuadraticPassesAtModerateSamples) {
  auto fx = verify::make_scaled_quadratic(10);
  auto w = unit_point(10, 4);
  Rng rng(5);
  auto r = verify::check_smoothed_unbiasedness(fx, w, 1e-3, 100'000, rng);
  EXPECT_TRUE(r.pass) << r.measured << " tol " << r.tolerance;
}

TEST(SmoothedUnbiasedness, TinySampleCountDocumentsRate) {
  auto fx = verify::make_scaled_quadratic(10);
  auto w = unit_point(10, 6);
  Rng rng(7);
  auto r = verify::check_smoothed_unbiasedness(fx, w, 1e-3, 10, rng);
  // tolerance 3/sqrt(10) dominates; the check is trivially loose here.
  EXPECT_GT(r.tolerance, 0.9);
}

TEST(ValueApproximation, LinearGapIsZero) {
  auto fx = verify::make_linear(8);
  auto w = unit_point(8, 8);
  Rng rng(9);
  auto r = verify::check_value_approximation(fx, w, 0.01, 100'000, rng);
  EXPECT_TRUE(r.pass);
  EXPECT_DOUBLE_EQ(r.bound, 0.0);
}

// Isotropic quadratic: the gap is exactly mu^2/2 on the unit sphere
// (E||u||^2 = 1), sitting right at the bound with L = 1.
TEST(ValueApproximation, IsotropicQuadraticGapIsExact) {
  Fixture fx;
  fx.name = "half_norm2";
  fx.dim = 6;
  fx.lipschitz = 1.0;
  fx.f = [](std::span<const double> w) {
    double s = 0;
    for (double v : w) s += v * v;
    return 0.5 * s;
  };
  fx.grad = [](std::span<const double> w) {
    return std::vector<double>(w.begin(), w.end());
  };
  auto w = unit_point(6, 10);
  Rng rng(11);
  const double mu = 0.1;
  auto r = verify::check_value_approximation(fx, w, mu, 200'000, rng);
  EXPECT_TRUE(r.pass);
  EXPECT_NEAR(r.measured, mu * mu / 2, 1e-3);
}

TEST(ValueApproximation, LogSumExpWithinCertifiedBound) {
  auto fx = verify::make_log_sum_exp(10);
  auto w = unit_point(10, 12);
  Rng rng(13);
  auto r = verify::check_value_approximation(fx, w, 0.05, 200'000, rng);
  EXPECT_TRUE(r.pass) << r.measured << " vs " << r.bound;
}

TEST(BiasBound, AllFixturesWithinBound) {
  for (const Fixture& fx : {verify::make_linear(10),
                            verify::make_scaled_quadratic(10),
                            verify::make_log_sum_exp(10)}) {
    auto w = unit_point(10, 14);
    Rng rng(15);
    auto r = verify::check_bias_bound(fx, w, 1e-2, 200'000, rng);
    EXPECT_TRUE(r.pass) << fx.name << ": " << r.measured << " vs " << r.bound;
  }
}

TEST(BiasBound, MuZeroDegenerates) {
  auto fx = verify::make_scaled_quadratic(10);
  auto w = unit_point(10, 16);
  Rng rng(17);
  auto r = verify::check_bias_bound(fx, w, 0.0, 10'000, rng);
  EXPECT_TRUE(r.pass);
  EXPECT_DOUBLE_EQ(r.bound, 0.0);
  EXPECT_DOUBLE_EQ(r.measured, 0.0);
}

TEST(SecondMoment, AllFixturesWithinBound) {
  for (const Fixture& fx : {verify::make_linear(10),
                            verify::make_scaled_quadratic(10),
                            verify::make_log_sum_exp(10)}) {
    auto w = unit_point(10, 18);
    Rng rng(19);
    auto r = verify::check_second_moment(fx, w, 1e-3, 200'000, rng);
    EXPECT_TRUE(r.pass) << fx.name << ": " << r.measured << " vs " << r.bound;
  }
}

TEST(SecondMoment, MuZeroUsesLimitForm) {
  auto fx = verify::make_scaled_quadratic(10);
  auto w = unit_point(10, 20);
  Rng rng(21);
  auto r = verify::check_second_moment(fx, w, 0.0, 100'000, rng);
  EXPECT_TRUE(r.pass);
  // The mu term vanished: bound is exactly 2 d ||grad||^2.
  auto g = fx.grad(w);
  double n2 = 0;
  for (double v : g) n2 += v * v;
  EXPECT_DOUBLE_EQ(r.bound, 20.0 * n2);
}

TEST(LemmaSuite, AllChecksPassAtModerateSamples) {
  auto reports = verify::run_lemma_suite(100'000, 1e-3, 99);
  ASSERT_EQ(reports.size(), 12u);
  for (const auto& r : reports)
    EXPECT_TRUE(r.pass) << r.check << "/" << r.fixture << ": measured "
                        << r.measured << " bound " << r.bound << " tol "
                        << r.tolerance;
}

TEST(GradientVariance, IdenticalSamplesGiveZero) {
  data::LabeledData ld;
  ld.num_classes = 2;
  ld.features.rows = 5;
  ld.features.cols = 4;
  for (int i = 0; i < 5; ++i)
    for (int k = 0; k < 4; ++k) ld.features.values.push_back(0.3 * k);
  ld.labels.assign(5, 1);
  auto ds = data::VerticalDataset::split_features(ld, 2);

  Rng rng(22);
  nn::DenseNet c0({2, 3}, nn::Activation::kRelu, nn::Activation::kRelu);
  nn::DenseNet c1({2, 3}, nn::Activation::kRelu, nn::Activation::kRelu);
  nn::DenseNet sv({6, 2}, nn::Activation::kRelu, nn::Activation::kIdentity);
  c0.init_glorot(rng);
  c1.init_glorot(rng);
  sv.init_glorot(rng);

  auto variances = verify::measure_gradient_variance(sv, {c0, c1}, ds);
  ASSERT_EQ(variances.size(), 3u);
  for (double v : variances) EXPECT_NEAR(v, 0.0, 1e-24);
}

// Two samples, all-identity single-layer nets, identity activations: the
// per-sample gradients can be written out by hand.
TEST(GradientVariance, TwoSampleHandComputation) {
  data::LabeledData ld;
  ld.num_classes = 2;
  ld.features.rows = 2;
  ld.features.cols = 2;
  ld.features.values = {1.0, 0.0, 0.0, 1.0};
  ld.labels = {0, 1};
  auto ds = data::VerticalDataset::split_features(ld, 1);

  nn::DenseNet client({2, 2}, nn::Activation::kIdentity,
                      nn::Activation::kIdentity);
  auto& cl = client.mutable_layers()[0];
  cl.weight = {1, 0, 0, 1};
  nn::DenseNet server({2, 2}, nn::Activation::kIdentity,
                      nn::Activation::kIdentity);
  auto& sl = server.mutable_layers()[0];
  sl.weight = {1, 0, 0, 1};

  // Sample 0: x=(1,0), y=0; logits=(1,0); p=softmax(1,0).
  // Server grad rows: dL/dW = (p - e_y) x^T, dL/db = p - e_y.
  auto variances = verify::measure_gradient_variance(server, {client}, ds);

  auto softmax2 = [](double a, double b) {
    double m = std::max(a, b);
    double ea = std::exp(a - m), eb = std::exp(b - m);
    return std::pair<double, double>{ea / (ea + eb), eb / (ea + eb)};
  };
  auto [p0a, p0b] = softmax2(1.0, 0.0);
  auto [p1a, p1b] = softmax2(0.0, 1.0);
  // Server per-sample gradient vectors in flat layout (W row-major, then b):
  std::vector<double> g0{(p0a - 1) * 1, (p0a - 1) * 0, p0b * 1, p0b * 0,
                         p0a - 1, p0b};
  std::vector<double> g1{p1a * 0, p1a * 1, (p1b - 1) * 0, (p1b - 1) * 1,
                         p1a, p1b - 1};
  double expect_server = 0.0;
  for (int k = 0; k < 6; ++k) {
    double mean = (g0[k] + g1[k]) / 2;
    expect_server += ((g0[k] - mean) * (g0[k] - mean) +
                      (g1[k] - mean) * (g1[k] - mean)) /
                     2;
  }
  EXPECT_NEAR(variances[0], expect_server, 1e-12);
  EXPECT_GT(variances[1], 0.0);
}

TEST(GradientVariance, SyntheticRunSmoke) {
  Rng rng(23);
  auto ld = data::make_synthetic(50, 8, 2, 2.0, rng);
  auto ds = data::VerticalDataset::split_features(ld, 2);
  nn::DenseNet c0({4, 3}, nn::Activation::kRelu, nn::Activation::kRelu);
  nn::DenseNet c1({4, 3}, nn::Activation::kRelu, nn::Activation::kRelu);
  nn::DenseNet sv({6, 2}, nn::Activation::kRelu, nn::Activation::kIdentity);
  c0.init_glorot(rng);
  c1.init_glorot(rng);
  sv.init_glorot(rng);
  auto variances = verify::measure_gradient_variance(sv, {c0, c1}, ds);
  for (double v : variances) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(v, 0.0);
  }
}

TEST(ScalingExperiment, ProducesPairedRows) {
  RunConfig base;
  base.framework_set = true;
  base.clients = 2;
  base.synthetic_n = 64;
  base.synthetic_test_n = 16;
  base.synthetic_features = 8;
  base.synthetic_classes = 2;
  base.synthetic_separation = 6.0;
  base.embed_dim = 4;
  base.iterations = 300;
  base.eval_every = 50;
  base.batch_size = 16;
  base.seed = 31;

  auto rows = verify::scaling_experiment(base, {8, 16}, {4}, 0.6);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0].axis, "server_hidden");
  EXPECT_EQ(rows[0].framework, "cascaded");
  EXPECT_EQ(rows[1].framework, "zoo");
  EXPECT_EQ(rows[4].axis, "embed_dim");
}
