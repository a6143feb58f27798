#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "vflsim/errors.hpp"
#include "vflsim/rng.hpp"

namespace vflsim::sched {

enum class PolicyKind { kIidCategorical, kRoundRobin, kBoundedForcing };

struct ActivationPolicy {
  PolicyKind kind = PolicyKind::kIidCategorical;
  std::vector<double> p;  // over clients; must sum to 1, all entries > 0
  std::int64_t tau_max = 0;

  static ActivationPolicy iid_uniform(int num_clients) {
    ActivationPolicy a;
    a.kind = PolicyKind::kIidCategorical;
    a.p.assign(num_clients, 1.0 / num_clients);
    return a;
  }
  static ActivationPolicy iid(std::vector<double> probs) {
    ActivationPolicy a;
    a.kind = PolicyKind::kIidCategorical;
    a.p = std::move(probs);
    a.validate();
    return a;
  }
  static ActivationPolicy round_robin(int num_clients) {
    ActivationPolicy a;
    a.kind = PolicyKind::kRoundRobin;
    a.p.assign(num_clients, 1.0 / num_clients);
    return a;
  }
  static ActivationPolicy bounded_forcing(std::vector<double> probs,
                                          std::int64_t tau_max) {
    ActivationPolicy a;
    a.kind = PolicyKind::kBoundedForcing;
    a.p = std::move(probs);
    a.tau_max = tau_max;
    a.validate();
    if (tau_max < static_cast<std::int64_t>(a.p.size()))
      throw config_error("bounded_forcing: tau_max must be >= client count");
    return a;
  }

  void validate() const {
    if (p.empty()) throw config_error("activation policy: empty probability vector");
    double sum = 0.0;
    for (double v : p) {
      if (!(v > 0.0)) throw config_error("activation policy: probabilities must be > 0");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw config_error("activation policy: probabilities must sum to 1");
  }
};

/// Staleness counters tau[i][m]: iterations since client m last refreshed
/// sample i, warm-up counting as refresh 0 (so all entries start at 1).
/// The recurrence "reset the activated (i, m) pairs to 1, increment the
/// rest" is stored lazily as last-refresh stamps; tau = steps - stamp + 1.
///
/// kExact keeps the full n x M matrix. kClientSummary keeps one counter per
/// client (iterations since last activation), enough to drive bounded
/// forcing when n x M is too large.
class DelayTable {
 public:
  enum class Mode { kExact, kClientSummary };

  DelayTable(int num_samples, int num_clients, Mode mode = Mode::kExact)
      : n_(num_samples), m_(num_clients), mode_(mode) {
    if (n_ < 1 || m_ < 1) throw config_error("DelayTable: n, M must be >= 1");
    client_last_.assign(m_, 0);
    if (mode_ == Mode::kExact) {
      last_.assign(static_cast<std::size_t>(n_) * m_, 0);
      for (int m = 0; m < m_; ++m) min_last_count_[m][0] = n_;
    }
  }

  int num_samples() const { return n_; }
  int num_clients() const { return m_; }
  std::int64_t steps() const { return steps_; }
  std::int64_t max_observed() const { return max_observed_; }

  std::int64_t tau(int sample, int client) const {
    check_range(sample, client);
    if (mode_ != Mode::kExact)
      throw usage_error("DelayTable: per-sample tau needs exact mode");
    return steps_ - last_[idx(sample, client)] + 1;
  }

  /// Largest current delay for one client: max over samples in exact mode,
  /// iterations since last activation in summary mode.
  std::int64_t client_max_delay(int client) const {
    check_range(0, client);
    if (mode_ == Mode::kExact)
      return steps_ - min_last_count_.at(client).begin()->first + 1;
    return steps_ - client_last_[client] + 1;
  }

  /// One application of the recurrence: entries (i in batch, activated)
  /// reset to 1, every other entry advances by 1.
  void update(int activated, std::span<const int> batch) {
    check_range(0, activated);
    ++steps_;
    if (mode_ == Mode::kExact) {
      auto& counts = min_last_count_[activated];
      for (int i : batch) {
        check_range(i, activated);
        std::int64_t& stamp = last_[idx(i, activated)];
        if (stamp == steps_) continue;  // duplicate sample id in batch
        auto it = counts.find(stamp);
        if (--(it->second) == 0) counts.erase(it);
        stamp = steps_;
        ++counts[steps_];
      }
    }
    client_last_[activated] = steps_;
    refresh_max();
  }

  /// Synchronous rounds refresh the batch for every client at once.
  void update_all_clients(std::span<const int> batch) {
    ++steps_;
    for (int m = 0; m < m_; ++m) {
      if (mode_ == Mode::kExact) {
        auto& counts = min_last_count_[m];
        for (int i : batch) {
          check_range(i, m);
          std::int64_t& stamp = last_[idx(i, m)];
          if (stamp == steps_) continue;
          auto it = counts.find(stamp);
          if (--(it->second) == 0) counts.erase(it);
          stamp = steps_;
          ++counts[steps_];
        }
      }
      client_last_[m] = steps_;
    }
    refresh_max();
  }

 private:
  std::size_t idx(int sample, int client) const {
    return static_cast<std::size_t>(sample) * m_ + client;
  }
  void check_range(int sample, int client) const {
    if (sample < 0 || sample >= n_ || client < 0 || client >= m_)
      throw usage_error("DelayTable: index out of range");
  }
  void refresh_max() {
    for (int m = 0; m < m_; ++m)
      max_observed_ = std::max(max_observed_, client_max_delay(m));
  }

  int n_, m_;
  Mode mode_;
  std::int64_t steps_ = 0;
  std::int64_t max_observed_ = 1;
  std::vector<std::int64_t> last_;         // exact mode, n x M stamps
  std::vector<std::int64_t> client_last_;  // per-client activation stamp
  // Per client: stamp value -> number of samples holding it. begin() is the
  // minimum stamp, i.e. the client's most delayed sample.
  std::map<int, std::map<std::int64_t, int>> min_last_count_;
};

/// Picks the next activated client.
///
/// bounded_forcing draws from p unless waiting any longer would push some
/// client past tau_max. A one-step check is not enough when several clients
/// share the same delay (they all start tied at warm-up), so the guard is
/// deadline-based: with delays sorted in descending order, if any rank r
/// satisfies delay[r] + 1 + r > tau_max, the most delayed client (lowest
/// index on ties) is forced now. For tau_max >= M this keeps every delay
/// at or below tau_max.
inline int next_activation(const ActivationPolicy& policy, Rng& rng,
                           const DelayTable& table) {
  const int m = table.num_clients();
  switch (policy.kind) {
    case PolicyKind::kRoundRobin:
      return static_cast<int>(table.steps() % m);
    case PolicyKind::kIidCategorical:
      return static_cast<int>(rng.categorical(policy.p));
    case PolicyKind::kBoundedForcing: {
      std::vector<int> order(m);
      std::iota(order.begin(), order.end(), 0);
      std::vector<std::int64_t> delay(m);
      for (int i = 0; i < m; ++i) delay[i] = table.client_max_delay(i);
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (delay[a] != delay[b]) return delay[a] > delay[b];
        return a < b;
      });
      for (int r = 0; r < m; ++r)
        if (delay[order[r]] + 1 + r > policy.tau_max) return order[0];
      return static_cast<int>(rng.categorical(policy.p));
    }
  }
  throw usage_error("next_activation: bad policy kind");
}

}  // namespace vflsim::sched
