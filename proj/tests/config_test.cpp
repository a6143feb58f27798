#include "vflsim/config.hpp"

#include <gtest/gtest.h>

#include <string>

#include "vflsim/rng.hpp"

using namespace vflsim;

TEST(ParseConfig, EmptyTextFailsOnMissingFramework) {
  try {
    parse_config_text("");
    FAIL() << "expected config_error";
  } catch (const config_error& e) {
    EXPECT_NE(std::string(e.what()).find("framework"), std::string::npos);
  }
}

TEST(ParseConfig, FrameworkAloneUsesDefaults) {
  auto c = parse_config_text("framework = cascaded\n");
  EXPECT_EQ(c.framework, Framework::kCascaded);
  EXPECT_EQ(c.dataset, DatasetKind::kSynthetic);
  EXPECT_DOUBLE_EQ(c.eta0, 0.010);
  EXPECT_DOUBLE_EQ(c.eta_m, 0.010);
  EXPECT_DOUBLE_EQ(c.mu, 0.001);
  EXPECT_DOUBLE_EQ(c.lambda, 0.0);
  EXPECT_EQ(c.dist, zoo::DirectionKind::kUnitSphere);
  EXPECT_EQ(c.policy, sched::PolicyKind::kIidCategorical);
  EXPECT_EQ(c.batch_size, 64);
  EXPECT_EQ(c.eval_every, 100);
}

TEST(ParseConfig, CommentsAndWhitespaceTolerated) {
  auto c = parse_config_text(
      "# experiment\n"
      "framework = zoo   # ZOO everywhere\n"
      "\n"
      "  clients =   3\n"
      "server_hidden = 32, 16\n");
  EXPECT_EQ(c.framework, Framework::kZoo);
  EXPECT_EQ(c.clients, 3);
  EXPECT_EQ(c.server_hidden, (std::vector<int>{32, 16}));
}

TEST(ParseConfig, UnknownKeyIsNamed) {
  try {
    parse_config_text("framework = foo\nlerning_rate = 1\n");
    FAIL() << "expected config_error";
  } catch (const config_error& e) {
    EXPECT_NE(std::string(e.what()).find("lerning_rate"), std::string::npos);
  }
}

TEST(ParseConfig, InvariantViolationsAreNamed) {
  try {
    parse_config_text("framework = zoo\nmu = 0\n");
    FAIL() << "expected config_error";
  } catch (const config_error& e) {
    EXPECT_NE(std::string(e.what()).find("mu"), std::string::npos);
  }
  EXPECT_THROW(parse_config_text("framework = cascaded\neta0 = -1\n"),
               config_error);
  EXPECT_THROW(parse_config_text("framework = cascaded\nbatch_size = 0\n"),
               config_error);
  EXPECT_THROW(
      parse_config_text("framework = cascaded\nclients = 2\npolicy_p = 1\n"),
      config_error);
}

TEST(ParseConfig, MuZeroAllowedForFooOnly) {
  EXPECT_NO_THROW(parse_config_text("framework = foo\nmu = 0\n"));
  EXPECT_THROW(parse_config_text("framework = syn_zoo\nmu = 0\n"), config_error);
}

TEST(ParseConfig, BoundedForcingNeedsTauMax) {
  EXPECT_THROW(parse_config_text(
                   "framework = cascaded\nclients = 3\npolicy = bounded_forcing\n"),
               config_error);
  auto c = parse_config_text(
      "framework = cascaded\nclients = 3\npolicy = bounded_forcing\ntau_max = 8\n");
  EXPECT_EQ(c.tau_max, 8);
}

namespace {

RunConfig random_config(Rng& rng) {
  RunConfig c;
  c.framework_set = true;
  c.framework = static_cast<Framework>(rng.uniform_index(4));
  c.dataset = DatasetKind::kSynthetic;
  c.synthetic_n = 10 + static_cast<int>(rng.uniform_index(1000));
  c.synthetic_test_n = 5 + static_cast<int>(rng.uniform_index(100));
  c.synthetic_features = 4 + static_cast<int>(rng.uniform_index(50));
  c.synthetic_classes = 2 + static_cast<int>(rng.uniform_index(8));
  c.synthetic_separation = rng.uniform01() * 9;
  c.clients = 1 + static_cast<int>(rng.uniform_index(4));
  if (c.synthetic_features < c.clients) c.synthetic_features = c.clients;
  if (rng.uniform01() < 0.5)
    c.client_hidden = {1 + static_cast<int>(rng.uniform_index(64))};
  c.server_hidden = {1 + static_cast<int>(rng.uniform_index(128))};
  c.embed_dim = 1 + static_cast<int>(rng.uniform_index(32));
  c.eta0 = rng.uniform01() * 0.3;
  c.eta_m = rng.uniform01() * 0.3;
  c.mu = 1e-4 + rng.uniform01() * 0.1;
  c.lambda = rng.uniform01() < 0.3 ? rng.uniform01() * 0.01 : 0.0;
  c.dist = rng.uniform01() < 0.5 ? zoo::DirectionKind::kUnitSphere
                                 : zoo::DirectionKind::kStandardGaussian;
  switch (rng.uniform_index(3)) {
    case 0: c.policy = sched::PolicyKind::kIidCategorical; break;
    case 1: c.policy = sched::PolicyKind::kRoundRobin; break;
    default:
      c.policy = sched::PolicyKind::kBoundedForcing;
      c.tau_max = c.clients + static_cast<int>(rng.uniform_index(20));
  }
  c.iterations = rng.uniform_index(5000);
  c.batch_size = 1 + static_cast<int>(rng.uniform_index(128));
  c.eval_every = 1 + static_cast<int>(rng.uniform_index(500));
  c.seed = rng.raw();
  c.attack_trials = 1 + static_cast<std::int64_t>(rng.uniform_index(100000));
  return c;
}

}  // namespace

TEST(SerializeConfig, RoundTripsExactly) {
  Rng rng(1234);
  for (int rep = 0; rep < 200; ++rep) {
    RunConfig c = random_config(rng);
    RunConfig back = parse_config_text(serialize_config(c));
    EXPECT_EQ(back, c) << serialize_config(c);
  }
}
