#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vflsim/errors.hpp"
#include "vflsim/partition.hpp"
#include "vflsim/rng.hpp"
#include "vflsim/tensor_nn.hpp"
#include "vflsim/zoo.hpp"

namespace vflsim::attack {

enum class AttackFramework { kFoo, kZoo };
enum class Adversary { kCuriousClient, kEavesdropper };

struct AttackScenario {
  AttackFramework framework = AttackFramework::kZoo;
  Adversary adversary = Adversary::kCuriousClient;
  int num_classes = 10;
  std::int64_t trials = 10'000;
  int batch_size = 64;
  double mu = 1e-3;
  zoo::DirectionKind dist = zoo::DirectionKind::kUnitSphere;
};

/// The deliberately vulnerable aggregation the label-inference demo runs
/// against: the server sums all client outputs element-wise (every client
/// output has width C) and applies softmax cross-entropy.
class SumServer {
 public:
  SumServer(std::vector<int> labels, int num_classes)
      : labels_(std::move(labels)), num_classes_(num_classes) {}

  int num_classes() const { return num_classes_; }
  int label(int i) const { return labels_.at(i); }

  /// Batch-mean loss over summed outputs. rows[k] spans all clients'
  /// outputs for sample k, already summed by the caller.
  double mean_loss(const std::vector<std::vector<double>>& summed,
                   const std::vector<int>& sample_ids) const {
    double loss = 0.0;
    for (std::size_t k = 0; k < summed.size(); ++k)
      loss += nn::softmax_cross_entropy(summed[k], labels_.at(sample_ids[k])).loss;
    return loss / summed.size();
  }

  /// Per-sample loss gradient w.r.t. the summed output (what the
  /// first-order baseline puts on the wire).
  std::vector<double> output_grad(const std::vector<double>& summed,
                                  int sample_id) const {
    return nn::softmax_cross_entropy(summed, labels_.at(sample_id)).logit_grad;
  }

 private:
  std::vector<int> labels_;
  int num_classes_;
};

/// What an eavesdropper can see for one ZOO query: wire traffic only.
/// There is deliberately no field for the perturbation direction.
struct ZooWireView {
  double h = 0.0;
  double h_hat = 0.0;
  const data::Matrix* c = nullptr;
  const data::Matrix* c_hat = nullptr;
};

struct TrialRecord {
  std::int64_t trial = 0;
  int predicted = -1;
  int actual = -1;
  bool correct = false;
};

struct AttackResult {
  double success_rate = 0.0;
  double standard_error = 0.0;
  std::int64_t trials = 0;
  std::vector<TrialRecord> per_trial;
};

namespace detail {

inline int argmin(const std::vector<double>& v) {
  int best = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] < v[best]) best = static_cast<int>(k);
  return best;
}

}  // namespace detail

/// One epoch of the label-inference demo against a SumServer.
///
/// FOO framework: the wire carries per-sample loss gradients, so both
/// adversaries read the label off the unique negative coordinate.
///
/// ZOO framework: the wire carries two batch-mean scalars. The curious
/// client crafts c ~ N(0, I), picks a direction u from the configured
/// distribution, sends c_hat = c + mu*u, and feeds the returned losses into
/// the protocol's own estimator (phi(C)/mu)(h_hat - h)u; the prediction is
/// the most negative coordinate. The eavesdropper sees the same scalars but
/// lacks u, so it estimates with a fresh direction of its own.
///
/// Benign parties run real single-layer nets over their shards. Client 0 is
/// replaced by the crafted adversary in curious-client scenarios.
inline AttackResult run_attack(const AttackScenario& scenario,
                               const data::VerticalDataset& dataset, Rng& rng) {
  const int classes = scenario.num_classes;
  if (dataset.num_classes() != classes)
    throw config_error("run_attack: dataset classes != scenario classes");
  const int n = dataset.num_samples();
  const int m = dataset.num_clients();
  const bool curious = scenario.adversary == Adversary::kCuriousClient;

  // Benign client models: shard -> C, ReLU, seeded from the trial stream.
  std::vector<nn::DenseNet> nets;
  for (int c = 0; c < m; ++c) {
    nn::DenseNet net({dataset.shard_width(c), classes}, nn::Activation::kRelu,
                     nn::Activation::kRelu);
    net.init_glorot(rng);
    nets.push_back(std::move(net));
  }
  SumServer server(dataset.labels(), classes);

  AttackResult result;
  result.per_trial.reserve(scenario.trials);
  std::int64_t correct = 0;

  std::vector<int> sample_ids(scenario.batch_size);
  std::vector<std::vector<double>> benign_sum(scenario.batch_size);
  int cursor = 0;
  while (static_cast<std::int64_t>(result.per_trial.size()) < scenario.trials) {
    for (int k = 0; k < scenario.batch_size; ++k) {
      sample_ids[k] = cursor;
      cursor = (cursor + 1) % n;
    }

    // Outputs of every benign party, summed. In curious scenarios client 0
    // is the adversary and contributes nothing here.
    for (int k = 0; k < scenario.batch_size; ++k) {
      benign_sum[k].assign(classes, 0.0);
      for (int c = curious ? 1 : 0; c < m; ++c) {
        auto out = nn::forward(nets[c], dataset.shard(c).row(sample_ids[k]));
        for (int j = 0; j < classes; ++j) benign_sum[k][j] += out[j];
      }
    }

    if (scenario.framework == AttackFramework::kFoo) {
      // Per-sample gradients are on the wire; the sign rule is exact.
      for (int k = 0; k < scenario.batch_size; ++k) {
        std::vector<double> summed = benign_sum[k];
        if (curious)
          for (int j = 0; j < classes; ++j)
            summed[j] += rng.normal_pair().first;
        auto grad = server.output_grad(summed, sample_ids[k]);
        int predicted = detail::argmin(grad);
        int actual = server.label(sample_ids[k]);
        bool ok = predicted == actual;
        correct += ok;
        result.per_trial.push_back(
            {static_cast<std::int64_t>(result.per_trial.size()), predicted,
             actual, ok});
        if (static_cast<std::int64_t>(result.per_trial.size()) >=
            scenario.trials)
          break;
      }
      continue;
    }

    // ZOO framework: assemble the query.
    data::Matrix c_mat, c_hat_mat;
    std::vector<double> u;
    if (curious) {
      u = zoo::sample_direction(classes, scenario.dist, rng);
      c_mat.rows = c_hat_mat.rows = scenario.batch_size;
      c_mat.cols = c_hat_mat.cols = classes;
      for (int k = 0; k < scenario.batch_size; ++k)
        for (int j = 0; j < classes; ++j) {
          double v = rng.normal_pair().first;
          c_mat.values.push_back(v);
          c_hat_mat.values.push_back(v + scenario.mu * u[j]);
        }
    } else {
      // Benign querying client (client 0) follows the real protocol:
      // a parameter-space direction, never shared.
      u = zoo::sample_direction(nets[0].param_count(), scenario.dist, rng);
      auto perturbed = nets[0].perturbed(u, scenario.mu);
      c_mat.rows = c_hat_mat.rows = scenario.batch_size;
      c_mat.cols = c_hat_mat.cols = classes;
      for (int k = 0; k < scenario.batch_size; ++k) {
        auto base = nn::forward(nets[0], dataset.shard(0).row(sample_ids[k]));
        auto shifted =
            nn::forward(perturbed, dataset.shard(0).row(sample_ids[k]));
        c_mat.values.insert(c_mat.values.end(), base.begin(), base.end());
        c_hat_mat.values.insert(c_hat_mat.values.end(), shifted.begin(),
                                shifted.end());
      }
    }

    // Server side: two batch-mean scalars.
    std::vector<std::vector<double>> summed(scenario.batch_size),
        summed_hat(scenario.batch_size);
    for (int k = 0; k < scenario.batch_size; ++k) {
      summed[k] = benign_sum[k];
      summed_hat[k] = benign_sum[k];
      for (int j = 0; j < classes; ++j) {
        summed[k][j] += c_mat.at(k, j);
        summed_hat[k][j] += c_hat_mat.at(k, j);
      }
    }
    const double h = server.mean_loss(summed, sample_ids);
    const double h_hat = server.mean_loss(summed_hat, sample_ids);

    int predicted;
    if (curious) {
      zoo::Perturbation pert{u, scenario.mu, sample_ids[0], 0};
      predicted = detail::argmin(
          zoo::two_point_estimate(h_hat, h, pert, scenario.dist));
    } else {
      // The eavesdropper's entire input: wire traffic, no direction.
      ZooWireView view{h, h_hat, &c_mat, &c_hat_mat};
      auto guess = zoo::sample_direction(classes, scenario.dist, rng);
      zoo::Perturbation pert{std::move(guess), scenario.mu, sample_ids[0], -1};
      predicted = detail::argmin(
          zoo::two_point_estimate(view.h_hat, view.h, pert, scenario.dist));
    }

    for (int k = 0; k < scenario.batch_size; ++k) {
      int actual = server.label(sample_ids[k]);
      bool ok = predicted == actual;
      correct += ok;
      result.per_trial.push_back(
          {static_cast<std::int64_t>(result.per_trial.size()), predicted,
           actual, ok});
      if (static_cast<std::int64_t>(result.per_trial.size()) >=
          scenario.trials)
        break;
    }
  }

  result.trials = static_cast<std::int64_t>(result.per_trial.size());
  result.success_rate = static_cast<double>(correct) / result.trials;
  result.standard_error = std::sqrt(result.success_rate *
                                    (1.0 - result.success_rate) /
                                    result.trials);
  return result;
}

inline std::string scenario_name(const AttackScenario& s) {
  std::string name = s.framework == AttackFramework::kFoo ? "foo" : "zoo";
  name += s.adversary == Adversary::kCuriousClient ? "_curious_client"
                                                   : "_eavesdropper";
  return name;
}

}  // namespace vflsim::attack
