#include "vflsim/attack.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "vflsim/partition.hpp"
#include "vflsim/rng.hpp"

using namespace vflsim;
using attack::Adversary;
using attack::AttackFramework;
using attack::AttackScenario;

namespace {

data::VerticalDataset attack_dataset(int n, int clients, int classes,
                                     std::uint64_t seed) {
  Rng rng(seed);
  auto ld = data::make_synthetic(n, 8 * clients, classes, 2.0, rng);
  return data::VerticalDataset::split_features(ld, clients);
}

}  // namespace

// The exact-gradient sign rule: with a sum server and softmax
// cross-entropy, dL/dy_c = softmax(y)_c - 1[c == label], so exactly one
// coordinate is negative and it marks the label.
TEST(SignRule, ExactlyOneNegativeCoordinateIsLabel) {
  Rng rng(1);
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> logits(10);
    for (auto& v : logits) v = rng.normal_pair().first * 3;
    int label = static_cast<int>(rng.uniform_index(10));
    auto r = nn::softmax_cross_entropy(logits, label);
    int negatives = 0, neg_index = -1;
    for (int c = 0; c < 10; ++c)
      if (r.logit_grad[c] < 0) {
        ++negatives;
        neg_index = c;
      }
    ASSERT_EQ(negatives, 1);
    ASSERT_EQ(neg_index, label);
  }
}

TEST(RunAttack, FooFrameworkSucceedsAlways) {
  auto ds = attack_dataset(512, 2, 10, 2);
  for (Adversary adv : {Adversary::kCuriousClient, Adversary::kEavesdropper}) {
    AttackScenario s;
    s.framework = AttackFramework::kFoo;
    s.adversary = adv;
    s.num_classes = 10;
    s.trials = 2000;
    Rng rng(3);
    auto result = attack::run_attack(s, ds, rng);
    EXPECT_DOUBLE_EQ(result.success_rate, 1.0);
    for (const auto& t : result.per_trial) ASSERT_TRUE(t.correct);
  }
}

TEST(RunAttack, ZooEavesdropperIsAtChanceLevel) {
  auto ds = attack_dataset(2048, 2, 10, 4);
  AttackScenario s;
  s.framework = AttackFramework::kZoo;
  s.adversary = Adversary::kEavesdropper;
  s.num_classes = 10;
  s.trials = 20'000;
  Rng rng(5);
  auto result = attack::run_attack(s, ds, rng);
  double se = std::sqrt(0.1 * 0.9 / result.trials);
  EXPECT_NEAR(result.success_rate, 0.10, 3 * se);
}

TEST(RunAttack, ZooCuriousClientGainsSlightAdvantage) {
  auto ds = attack_dataset(2048, 2, 10, 6);
  AttackScenario s;
  s.framework = AttackFramework::kZoo;
  s.adversary = Adversary::kCuriousClient;
  s.num_classes = 10;
  s.trials = 20'000;
  Rng rng(7);
  auto result = attack::run_attack(s, ds, rng);
  EXPECT_GE(result.success_rate, 0.10);
  EXPECT_LE(result.success_rate, 0.15);
}

TEST(RunAttack, ClassMismatchThrows) {
  auto ds = attack_dataset(64, 2, 4, 8);
  AttackScenario s;
  s.num_classes = 10;
  Rng rng(9);
  EXPECT_THROW(attack::run_attack(s, ds, rng), config_error);
}

TEST(RunAttack, TrialCountAndErrorBookkeeping) {
  auto ds = attack_dataset(256, 2, 10, 10);
  AttackScenario s;
  s.framework = AttackFramework::kZoo;
  s.adversary = Adversary::kEavesdropper;
  s.num_classes = 10;
  s.trials = 500;
  Rng rng(11);
  auto result = attack::run_attack(s, ds, rng);
  EXPECT_EQ(result.trials, 500);
  EXPECT_EQ(result.per_trial.size(), 500u);
  EXPECT_NEAR(result.standard_error,
              std::sqrt(result.success_rate * (1 - result.success_rate) / 500),
              1e-12);
}

// Information flow: a canary planted in the benign client's direction
// stream must never reach the eavesdropper's wire view. The eavesdropper
// path only sees (c, c_hat, h, h_hat); we scan all of them.
TEST(RunAttack, EavesdropperNeverSeesPerturbationCanary) {
  // Run the benign-client protocol step by hand with a canary direction.
  auto ds = attack_dataset(64, 2, 10, 12);
  Rng rng(13);
  nn::DenseNet net({ds.shard_width(0), 10}, nn::Activation::kRelu,
                   nn::Activation::kRelu);
  net.init_glorot(rng);
  constexpr double kCanary = 3.14159e44;
  std::vector<double> canary(net.param_count(), kCanary);
  auto perturbed = net.perturbed(canary, 1e-3);

  data::Matrix c, c_hat;
  c.rows = c_hat.rows = 4;
  c.cols = c_hat.cols = 10;
  for (int k = 0; k < 4; ++k) {
    auto base = nn::forward(net, ds.shard(0).row(k));
    auto shifted = nn::forward(perturbed, ds.shard(0).row(k));
    c.values.insert(c.values.end(), base.begin(), base.end());
    c_hat.values.insert(c_hat.values.end(), shifted.begin(), shifted.end());
  }
  attack::ZooWireView view{0.4, 0.41, &c, &c_hat};
  for (double v : view.c->values) ASSERT_NE(v, kCanary);
  for (double v : view.c_hat->values) ASSERT_NE(v, kCanary);
  ASSERT_NE(view.h, kCanary);
  ASSERT_NE(view.h_hat, kCanary);
}

TEST(RunAttack, DeterministicUnderSeed) {
  auto ds = attack_dataset(256, 2, 10, 14);
  AttackScenario s;
  s.framework = AttackFramework::kZoo;
  s.adversary = Adversary::kCuriousClient;
  s.num_classes = 10;
  s.trials = 1000;
  Rng a(15), b(15);
  auto ra = attack::run_attack(s, ds, a);
  auto rb = attack::run_attack(s, ds, b);
  EXPECT_EQ(ra.success_rate, rb.success_rate);
}
