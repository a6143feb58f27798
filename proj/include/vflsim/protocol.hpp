#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vflsim/config.hpp"
#include "vflsim/errors.hpp"
#include "vflsim/partition.hpp"
#include "vflsim/rng.hpp"
#include "vflsim/scheduler.hpp"
#include "vflsim/tensor_nn.hpp"
#include "vflsim/zoo.hpp"

namespace vflsim::proto {

/// Upstream message. Carries embeddings only: no parameters, no gradients,
/// no direction vectors. c_hat is empty in first-order mode (no perturbed
/// pass exists there).
struct ClientQuery {
  int client_id = -1;
  std::vector<int> sample_ids;
  data::Matrix c;      // |B| x embed_dim, unperturbed outputs
  data::Matrix c_hat;  // |B| x embed_dim, outputs under w_m + mu*u
};

/// Downstream message. ZOO-mode replies are exactly two scalars; the
/// first-order baseline instead returns the loss gradient w.r.t. the
/// querying client's embeddings (the privacy-risky payload).
struct ServerReply {
  double h = 0.0;
  double h_hat = 0.0;
  data::Matrix embed_grad;  // rows == 0 except in first-order mode
};

/// Observes every message that would cross the network. Tests use this to
/// enforce the wire-content invariant and to hunt for canary values.
class WireMonitor {
 public:
  virtual ~WireMonitor() = default;
  virtual void on_query(const ClientQuery&) {}
  virtual void on_reply(int /*client_id*/, const ServerReply&) {}
};

/// Server-side cache of the latest unperturbed embedding per
/// (sample, client). Row layout concatenates client slots in id order.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(int num_samples, std::vector<int> dims)
      : n_(num_samples), dims_(std::move(dims)) {
    offsets_.resize(dims_.size() + 1, 0);
    for (std::size_t m = 0; m < dims_.size(); ++m)
      offsets_[m + 1] = offsets_[m] + dims_[m];
    rows_.assign(static_cast<std::size_t>(n_) * total_dim(), 0.0);
    stamps_.assign(static_cast<std::size_t>(n_) * dims_.size(), -1);
  }

  int num_samples() const { return n_; }
  int num_clients() const { return static_cast<int>(dims_.size()); }
  int total_dim() const { return offsets_.back(); }
  int dim(int client) const { return dims_.at(client); }
  int offset(int client) const { return offsets_.at(client); }

  void write(int sample, int client, std::span<const double> embed,
             std::int64_t t) {
    if (sample < 0 || sample >= n_)
      throw usage_error("EmbeddingTable: sample out of range");
    if (static_cast<int>(embed.size()) != dims_.at(client))
      throw usage_error("EmbeddingTable: embedding width mismatch");
    double* dst = row_ptr(sample) + offsets_[client];
    for (std::size_t k = 0; k < embed.size(); ++k) dst[k] = embed[k];
    std::int64_t& stamp = stamps_[static_cast<std::size_t>(sample) * dims_.size() + client];
    if (t < stamp) throw usage_error("EmbeddingTable: stamps must be monotone");
    stamp = t;
  }

  std::span<const double> row(int sample) const {
    return {row_ptr(sample), static_cast<std::size_t>(total_dim())};
  }
  std::int64_t stamp(int sample, int client) const {
    return stamps_[static_cast<std::size_t>(sample) * dims_.size() + client];
  }

  /// Table row with one client's slot substituted (used for the perturbed
  /// loss; the table itself is never written with perturbed embeddings).
  void compose_override(int sample, int client, std::span<const double> embed,
                        std::vector<double>& out) const {
    auto r = row(sample);
    out.assign(r.begin(), r.end());
    for (std::size_t k = 0; k < embed.size(); ++k)
      out[offsets_[client] + k] = embed[k];
  }

 private:
  const double* row_ptr(int sample) const {
    return rows_.data() + static_cast<std::size_t>(sample) * total_dim();
  }
  double* row_ptr(int sample) {
    return rows_.data() + static_cast<std::size_t>(sample) * total_dim();
  }

  int n_ = 0;
  std::vector<int> dims_;
  std::vector<int> offsets_;
  std::vector<double> rows_;
  std::vector<std::int64_t> stamps_;
};

enum class ServerOptim { kFirstOrder, kZeroOrder };

struct ServerState {
  nn::DenseNet net;  // input size == sum of embed dims
  std::vector<int> labels;
  EmbeddingTable table;
  double eta0 = 0.01;
  double lambda = 0.0;
  double mu = 1e-3;  // used by the zero-order self-update only
  ServerOptim optim = ServerOptim::kFirstOrder;
  zoo::DirectionKind dist = zoo::DirectionKind::kUnitSphere;
  Rng rng{0};
};

struct ClientState {
  int client_id = -1;
  nn::DenseNet net;
  data::ShardView shard;
  double eta = 0.01;
  double mu = 1e-3;
  double lambda = 0.0;
  zoo::DirectionKind dist = zoo::DirectionKind::kUnitSphere;
  Rng rng{0};

  std::optional<zoo::Perturbation> pending;
  // First-order mode keeps the forward tapes for the eventual backward pass.
  std::vector<nn::ForwardTape> pending_tapes;

  // Test hook: fixed direction instead of a sampled one (canary injection).
  std::optional<std::vector<double>> direction_override;
};

inline double l2_half_norm(const nn::DenseNet& net) {
  double s = 0.0;
  for (const auto& l : net.layers()) {
    for (double w : l.weight) s += w * w;
    for (double b : l.bias) s += b * b;
  }
  return 0.5 * s;
}

/// ZOO client query: samples one direction over the full parameter vector,
/// evaluates the batch under w and w + mu*u, retains u in `pending`.
inline ClientQuery client_step(ClientState& cs, std::span<const int> batch) {
  if (cs.pending || !cs.pending_tapes.empty())
    throw usage_error("client_step: a reply is already pending");
  std::vector<double> u =
      cs.direction_override
          ? *cs.direction_override
          : zoo::sample_direction(cs.net.param_count(), cs.dist, cs.rng);
  nn::DenseNet perturbed = cs.net.perturbed(u, cs.mu);

  ClientQuery q;
  q.client_id = cs.client_id;
  q.sample_ids.assign(batch.begin(), batch.end());
  const int width = cs.net.output_size();
  q.c.rows = q.c_hat.rows = static_cast<int>(batch.size());
  q.c.cols = q.c_hat.cols = width;
  q.c.values.reserve(q.c.rows * static_cast<std::size_t>(width));
  q.c_hat.values.reserve(q.c.rows * static_cast<std::size_t>(width));
  for (int i : batch) {
    auto base = nn::forward(cs.net, cs.shard.row(i));
    auto shifted = nn::forward(perturbed, cs.shard.row(i));
    q.c.values.insert(q.c.values.end(), base.begin(), base.end());
    q.c_hat.values.insert(q.c_hat.values.end(), shifted.begin(), shifted.end());
  }
  cs.pending = zoo::Perturbation{std::move(u), cs.mu,
                                 batch.empty() ? -1 : batch.front(),
                                 cs.client_id};
  return q;
}

/// First-order (VAFL-style) query: unperturbed embeddings only; tapes are
/// kept so the reply's embedding gradient can be backpropagated locally.
inline ClientQuery client_step_first_order(ClientState& cs,
                                           std::span<const int> batch) {
  if (cs.pending || !cs.pending_tapes.empty())
    throw usage_error("client_step: a reply is already pending");
  ClientQuery q;
  q.client_id = cs.client_id;
  q.sample_ids.assign(batch.begin(), batch.end());
  const int width = cs.net.output_size();
  q.c.rows = static_cast<int>(batch.size());
  q.c.cols = width;
  q.c_hat.rows = 0;
  q.c_hat.cols = 0;
  for (int i : batch) {
    nn::ForwardTape tape;
    auto out = nn::forward(cs.net, cs.shard.row(i), &tape);
    q.c.values.insert(q.c.values.end(), out.begin(), out.end());
    cs.pending_tapes.push_back(std::move(tape));
  }
  return q;
}

/// Handles one query. Steps happen in exactly this order:
///   1. write the unperturbed embeddings into the table (stamp t)
///   2. batch-mean loss h from the table rows
///   3. batch-mean loss h_hat with the perturbed embeddings substituted
///      into the querying client's slot only
///   4. assemble the reply
///   5. server self-update (first-order step on the unperturbed loss, or
///      the zero-order self-estimate in ZOO-server mode)
/// The reply therefore always reflects the pre-update server parameters.
inline ServerReply server_handle_query(ServerState& ss, const ClientQuery& q,
                                       std::int64_t t,
                                       bool first_order_reply = false) {
  const int batch = static_cast<int>(q.sample_ids.size());
  if (batch == 0) throw usage_error("server_handle_query: empty batch");
  if (q.c.cols != ss.table.dim(q.client_id) || q.c.rows != batch)
    throw config_error("server_handle_query: embedding shape mismatch");
  if (!first_order_reply &&
      (q.c_hat.rows != q.c.rows || q.c_hat.cols != q.c.cols))
    throw config_error("server_handle_query: c/c_hat shape mismatch");

  // (1) refresh the table with the unperturbed outputs.
  for (int r = 0; r < batch; ++r)
    ss.table.write(q.sample_ids[r], q.client_id, q.c.row(r), t);

  const double inv_batch = 1.0 / batch;
  const int embed_width = q.c.cols;

  // (2) unperturbed batch-mean loss. The backward pass only runs when its
  // output is consumed (first-order self-update or first-order reply).
  const bool need_backward =
      first_order_reply || ss.optim == ServerOptim::kFirstOrder;
  double h = 0.0;
  nn::GradientBundle acc;
  if (need_backward) acc.param_grad.assign(ss.net.param_count(), 0.0);
  data::Matrix embed_grad;
  if (first_order_reply) {
    embed_grad.rows = batch;
    embed_grad.cols = embed_width;
    embed_grad.values.assign(static_cast<std::size_t>(batch) * embed_width, 0.0);
  }
  nn::ForwardTape tape;
  for (int r = 0; r < batch; ++r) {
    const int i = q.sample_ids[r];
    auto logits =
        nn::forward(ss.net, ss.table.row(i), need_backward ? &tape : nullptr);
    auto lr = nn::softmax_cross_entropy(logits, ss.labels.at(i));
    if (!std::isfinite(lr.loss))
      throw numeric_error("server: non-finite loss at t=" + std::to_string(t) +
                          " client=" + std::to_string(q.client_id));
    h += lr.loss * inv_batch;
    if (!need_backward) continue;
    for (auto& g : lr.logit_grad) g *= inv_batch;
    nn::backward_accumulate(ss.net, tape, lr.logit_grad, acc);
    if (first_order_reply) {
      const int off = ss.table.offset(q.client_id);
      for (int k = 0; k < embed_width; ++k)
        embed_grad.values[static_cast<std::size_t>(r) * embed_width + k] =
            acc.input_grad[off + k];
    }
  }
  std::vector<double>& param_grad = acc.param_grad;

  // (3) perturbed batch-mean loss (skipped for the first-order baseline).
  double h_hat = h;
  if (!first_order_reply) {
    h_hat = 0.0;
    std::vector<double> composed;
    for (int r = 0; r < batch; ++r) {
      const int i = q.sample_ids[r];
      ss.table.compose_override(i, q.client_id, q.c_hat.row(r), composed);
      auto logits = nn::forward(ss.net, composed);
      auto lr = nn::softmax_cross_entropy(logits, ss.labels.at(i));
      if (!std::isfinite(lr.loss))
        throw numeric_error("server: non-finite perturbed loss at t=" +
                            std::to_string(t) +
                            " client=" + std::to_string(q.client_id));
      h_hat += lr.loss * inv_batch;
    }
  }

  // (4) the reply, captured before any parameter change.
  ServerReply reply;
  reply.h = h;
  reply.h_hat = h_hat;
  if (first_order_reply) reply.embed_grad = std::move(embed_grad);

  // (5) server self-update on the unperturbed loss.
  if (ss.optim == ServerOptim::kFirstOrder) {
    if (ss.lambda > 0.0) {
      auto w = ss.net.flatten();
      for (std::size_t k = 0; k < param_grad.size(); ++k)
        param_grad[k] += ss.lambda * w[k];
    }
    if (ss.eta0 > 0.0) ss.net.sgd_step(param_grad, ss.eta0);
  } else {
    auto u0 = zoo::sample_direction(ss.net.param_count(), ss.dist, ss.rng);
    nn::DenseNet perturbed = ss.net.perturbed(u0, ss.mu);
    double h_self = 0.0;
    for (int r = 0; r < batch; ++r) {
      const int i = q.sample_ids[r];
      auto logits = nn::forward(perturbed, ss.table.row(i));
      h_self += nn::softmax_cross_entropy(logits, ss.labels.at(i)).loss * inv_batch;
    }
    double base = h;
    if (ss.lambda > 0.0) {
      h_self += ss.lambda * l2_half_norm(perturbed);
      base += ss.lambda * l2_half_norm(ss.net);
    }
    zoo::Perturbation pert{std::move(u0), ss.mu, q.sample_ids.front(), -1};
    auto est = zoo::two_point_estimate(h_self, base, pert, ss.dist);
    if (ss.eta0 > 0.0) ss.net.sgd_step(est, ss.eta0);
  }
  return reply;
}

/// ZOO reply application: two-point estimate from the returned losses, one
/// SGD step, pending cleared. The optional L2 term is folded into the loss
/// difference locally (the client knows w and u; the server never does).
inline void client_apply_reply(ClientState& cs, const ServerReply& r) {
  if (!cs.pending) throw usage_error("client_apply_reply: nothing pending");
  double h = r.h;
  double h_hat = r.h_hat;
  if (cs.lambda > 0.0) {
    const auto& u = cs.pending->u;
    auto w = cs.net.flatten();
    double wu = 0.0, uu = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      wu += w[k] * u[k];
      uu += u[k] * u[k];
    }
    // g(w + mu*u) - g(w) for g = 0.5*||w||^2, computed in closed form.
    h_hat += cs.lambda * (cs.mu * wu + 0.5 * cs.mu * cs.mu * uu);
  }
  if (cs.pending->mu > 0.0) {
    auto est = zoo::two_point_estimate(h_hat, h, *cs.pending, cs.dist);
    if (cs.eta > 0.0) cs.net.sgd_step(est, cs.eta);
  }
  cs.pending.reset();
}

/// First-order reply application: backpropagate the returned embedding
/// gradient through the local net and step.
inline void client_apply_reply_first_order(ClientState& cs,
                                           const ServerReply& r) {
  if (cs.pending_tapes.empty())
    throw usage_error("client_apply_reply: nothing pending");
  if (r.embed_grad.rows != static_cast<int>(cs.pending_tapes.size()))
    throw config_error("client_apply_reply: embed_grad shape mismatch");
  nn::GradientBundle acc;
  acc.param_grad.assign(cs.net.param_count(), 0.0);
  for (int row = 0; row < r.embed_grad.rows; ++row)
    nn::backward_accumulate(cs.net, cs.pending_tapes[row],
                            r.embed_grad.row(row), acc);
  if (cs.lambda > 0.0) {
    auto w = cs.net.flatten();
    for (std::size_t k = 0; k < acc.param_grad.size(); ++k)
      acc.param_grad[k] += cs.lambda * w[k];
  }
  if (cs.eta > 0.0) cs.net.sgd_step(acc.param_grad, cs.eta);
  cs.pending_tapes.clear();
}

struct RunResult {
  std::vector<MetricsRecord> metrics;
  std::int64_t max_delay_observed = 1;
};

/// The full simulated deployment: one server, M clients, a scheduler and a
/// delay table. Single-threaded and deterministic under the config seed;
/// one activation = query + reply + updates, treated as an atomic round.
class Trainer {
 public:
  Trainer(const RunConfig& cfg, const data::VerticalDataset& train,
          const data::VerticalDataset& test, WireMonitor* monitor = nullptr)
      : cfg_(cfg),
        train_(train),
        test_(test),
        monitor_(monitor),
        policy_(cfg.activation_policy()),
        delays_(train.num_samples(), train.num_clients(),
                pick_delay_mode(train)),
        sched_rng_(Rng::from_master(cfg.seed, stream::kScheduler)),
        batch_rng_(Rng::from_master(cfg.seed, stream::kBatch)) {
    if (train.num_clients() != cfg.clients)
      throw config_error("trainer: dataset clients != config clients");
    build_parties();
    warm_up();
  }

  ClientState& client(int m) { return clients_.at(m); }
  ServerState& server() { return server_; }

  RunResult run() {
    RunResult result;
    const auto t0 = std::chrono::steady_clock::now();
    for (std::int64_t t = 0; t < cfg_.iterations; ++t) {
      if (cfg_.framework == Framework::kSynZoo)
        synchronous_round(t);
      else
        asynchronous_round(t);
      if ((t + 1) % cfg_.eval_every == 0 || t + 1 == cfg_.iterations)
        result.metrics.push_back(evaluate(t + 1, t0));
    }
    result.max_delay_observed = delays_.max_observed();
    return result;
  }

  /// Synchronous full forward with the parties' current parameters; the
  /// embedding table is bypassed on purpose.
  MetricsRecord evaluate(std::int64_t iteration,
                         std::chrono::steady_clock::time_point t0) {
    MetricsRecord rec;
    rec.iteration = iteration;
    rec.epoch = static_cast<double>(iteration) * cfg_.batch_size /
                train_.num_samples();
    eval_split(train_, server_train_labels_, rec.train_loss, rec.train_acc);
    eval_split(test_, server_test_labels_, rec.test_loss, rec.test_acc);
    rec.max_delay = delays_.max_observed();
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    return rec;
  }

 private:
  static sched::DelayTable::Mode pick_delay_mode(
      const data::VerticalDataset& train) {
    // Exact per-sample tracking up to ~4M cells, summary beyond.
    return static_cast<std::int64_t>(train.num_samples()) *
                       train.num_clients() <=
                   4'000'000
               ? sched::DelayTable::Mode::kExact
               : sched::DelayTable::Mode::kClientSummary;
  }

  void build_parties() {
    std::vector<int> server_sizes;
    server_sizes.push_back(cfg_.clients * cfg_.embed_dim);
    for (int hdim : cfg_.server_hidden) server_sizes.push_back(hdim);
    server_sizes.push_back(train_.num_classes());
    server_.net = nn::DenseNet(server_sizes, nn::Activation::kRelu,
                               nn::Activation::kIdentity);
    Rng srng = Rng::from_master(cfg_.seed, stream::kServerInit);
    server_.net.init_glorot(srng);
    server_.labels = train_.labels();
    server_.eta0 = cfg_.eta0;
    server_.lambda = cfg_.lambda;
    server_.mu = cfg_.mu;
    server_.dist = cfg_.dist;
    server_.optim = (cfg_.framework == Framework::kZoo ||
                     cfg_.framework == Framework::kSynZoo)
                        ? ServerOptim::kZeroOrder
                        : ServerOptim::kFirstOrder;
    server_.rng = Rng::from_master(cfg_.seed, stream::kServer);

    std::vector<int> dims(cfg_.clients, cfg_.embed_dim);
    server_.table = EmbeddingTable(train_.num_samples(), dims);

    for (int m = 0; m < cfg_.clients; ++m) {
      ClientState cs;
      cs.client_id = m;
      std::vector<int> sizes;
      sizes.push_back(train_.shard_width(m));
      for (int hdim : cfg_.client_hidden) sizes.push_back(hdim);
      sizes.push_back(cfg_.embed_dim);
      // The client's final layer is ReLU too (embeddings, not logits).
      cs.net = nn::DenseNet(sizes, nn::Activation::kRelu, nn::Activation::kRelu);
      Rng irng = Rng::from_master(cfg_.seed, stream::client_init(m));
      cs.net.init_glorot(irng);
      cs.shard = train_.shard(m);
      cs.eta = cfg_.eta_m;
      cs.mu = cfg_.mu;
      cs.lambda = cfg_.lambda;
      cs.dist = cfg_.dist;
      cs.rng = Rng::from_master(cfg_.seed, stream::client(m));
      clients_.push_back(std::move(cs));
    }
    server_train_labels_ = train_.labels();
    server_test_labels_ = test_.labels();
  }

  /// Every client forwards every sample once so no table entry is unset.
  void warm_up() {
    for (int m = 0; m < cfg_.clients; ++m)
      for (int i = 0; i < train_.num_samples(); ++i)
        server_.table.write(i, m, nn::forward(clients_[m].net,
                                              clients_[m].shard.row(i)),
                            0);
  }

  std::vector<int> draw_batch() {
    std::vector<int> batch(cfg_.batch_size);
    // batch_size == n selects every sample in order (full-batch mode);
    // otherwise batch_size iid uniform draws.
    if (cfg_.batch_size == train_.num_samples()) {
      std::iota(batch.begin(), batch.end(), 0);
      return batch;
    }
    for (auto& b : batch)
      b = static_cast<int>(batch_rng_.uniform_index(train_.num_samples()));
    return batch;
  }

  void asynchronous_round(std::int64_t t) {
    const int m = sched::next_activation(policy_, sched_rng_, delays_);
    auto batch = draw_batch();
    const bool first_order = cfg_.framework == Framework::kFoo;
    ClientQuery q = first_order
                        ? client_step_first_order(clients_[m], batch)
                        : client_step(clients_[m], batch);
    if (monitor_) monitor_->on_query(q);
    ServerReply r = server_handle_query(server_, q, t, first_order);
    if (monitor_) monitor_->on_reply(m, r);
    if (first_order)
      client_apply_reply_first_order(clients_[m], r);
    else
      client_apply_reply(clients_[m], r);
    delays_.update(m, batch);
  }

  /// One round of the synchronous ZOO baseline: every client is queried on
  /// the same batch against the same pre-round parameters, then the server
  /// performs its own zero-order self-update.
  void synchronous_round(std::int64_t t) {
    auto batch = draw_batch();
    // All clients evaluate against the round-start parameters first.
    std::vector<ClientQuery> queries;
    queries.reserve(cfg_.clients);
    for (int m = 0; m < cfg_.clients; ++m) {
      queries.push_back(client_step(clients_[m], batch));
      if (monitor_) monitor_->on_query(queries.back());
    }
    for (int m = 0; m < cfg_.clients; ++m)
      for (int r = 0; r < static_cast<int>(batch.size()); ++r)
        server_.table.write(batch[r], m, queries[m].c.row(r), t);

    const double inv_batch = 1.0 / batch.size();
    auto batch_loss = [&](const nn::DenseNet& net,
                          const ClientQuery* override_q) {
      double loss = 0.0;
      std::vector<double> composed;
      for (int r = 0; r < static_cast<int>(batch.size()); ++r) {
        const int i = batch[r];
        std::span<const double> input;
        if (override_q) {
          server_.table.compose_override(i, override_q->client_id,
                                         override_q->c_hat.row(r), composed);
          input = composed;
        } else {
          input = server_.table.row(i);
        }
        auto logits = nn::forward(net, input);
        loss += nn::softmax_cross_entropy(logits, server_.labels.at(i)).loss *
                inv_batch;
      }
      return loss;
    };

    const double h = batch_loss(server_.net, nullptr);
    for (int m = 0; m < cfg_.clients; ++m) {
      ServerReply reply;
      reply.h = h;
      reply.h_hat = batch_loss(server_.net, &queries[m]);
      if (monitor_) monitor_->on_reply(m, reply);
      client_apply_reply(clients_[m], reply);
    }

    auto u0 = zoo::sample_direction(server_.net.param_count(), server_.dist,
                                    server_.rng);
    nn::DenseNet perturbed = server_.net.perturbed(u0, server_.mu);
    double h_self = batch_loss(perturbed, nullptr);
    double base = h;
    if (server_.lambda > 0.0) {
      h_self += server_.lambda * l2_half_norm(perturbed);
      base += server_.lambda * l2_half_norm(server_.net);
    }
    zoo::Perturbation pert{std::move(u0), server_.mu, batch.front(), -1};
    auto est = zoo::two_point_estimate(h_self, base, pert, server_.dist);
    if (server_.eta0 > 0.0) server_.net.sgd_step(est, server_.eta0);

    delays_.update_all_clients(batch);
  }

  void eval_split(const data::VerticalDataset& split,
                  const std::vector<int>& labels, double& loss_out,
                  double& acc_out) {
    double loss = 0.0;
    std::int64_t correct = 0;
    std::vector<double> composite(server_.table.total_dim());
    for (int i = 0; i < split.num_samples(); ++i) {
      int pos = 0;
      for (int m = 0; m < cfg_.clients; ++m) {
        auto out = nn::forward(clients_[m].net, split.shard(m).row(i));
        for (double v : out) composite[pos++] = v;
      }
      auto logits = nn::forward(server_.net, composite);
      loss += nn::softmax_cross_entropy(logits, labels.at(i)).loss;
      int argmax = 0;
      for (std::size_t c = 1; c < logits.size(); ++c)
        if (logits[c] > logits[argmax]) argmax = static_cast<int>(c);
      correct += argmax == labels.at(i);
    }
    loss_out = loss / split.num_samples();
    acc_out = static_cast<double>(correct) / split.num_samples();
  }

  RunConfig cfg_;
  const data::VerticalDataset& train_;
  const data::VerticalDataset& test_;
  WireMonitor* monitor_;
  sched::ActivationPolicy policy_;
  sched::DelayTable delays_;
  Rng sched_rng_;
  Rng batch_rng_;
  ServerState server_;
  std::vector<ClientState> clients_;
  std::vector<int> server_train_labels_;
  std::vector<int> server_test_labels_;
};

inline RunResult run(const RunConfig& cfg, const data::VerticalDataset& train,
                     const data::VerticalDataset& test,
                     WireMonitor* monitor = nullptr) {
  Trainer trainer(cfg, train, test, monitor);
  return trainer.run();
}

inline RunResult run_cascaded(RunConfig cfg, const data::VerticalDataset& train,
                              const data::VerticalDataset& test,
                              WireMonitor* monitor = nullptr) {
  cfg.framework = Framework::kCascaded;
  return run(cfg, train, test, monitor);
}
inline RunResult run_foo_vfl(RunConfig cfg, const data::VerticalDataset& train,
                             const data::VerticalDataset& test,
                             WireMonitor* monitor = nullptr) {
  cfg.framework = Framework::kFoo;
  return run(cfg, train, test, monitor);
}
inline RunResult run_zoo_vfl(RunConfig cfg, const data::VerticalDataset& train,
                             const data::VerticalDataset& test,
                             WireMonitor* monitor = nullptr) {
  cfg.framework = Framework::kZoo;
  return run(cfg, train, test, monitor);
}
inline RunResult run_syn_zoo_vfl(RunConfig cfg,
                                 const data::VerticalDataset& train,
                                 const data::VerticalDataset& test,
                                 WireMonitor* monitor = nullptr) {
  cfg.framework = Framework::kSynZoo;
  return run(cfg, train, test, monitor);
}

/// Builds train/test datasets from the config (synthetic blobs or CSV).
struct DatasetPair {
  data::VerticalDataset train;
  data::VerticalDataset test;
};

inline DatasetPair build_datasets(const RunConfig& cfg) {
  if (cfg.dataset == DatasetKind::kSynthetic) {
    Rng drng = Rng::from_master(cfg.seed, stream::kDataset);
    auto all = data::make_synthetic(cfg.synthetic_n + cfg.synthetic_test_n,
                                    cfg.synthetic_features,
                                    cfg.synthetic_classes,
                                    cfg.synthetic_separation, drng);
    data::LabeledData train_data, test_data;
    train_data.num_classes = test_data.num_classes = all.num_classes;
    train_data.features.rows = cfg.synthetic_n;
    train_data.features.cols = all.features.cols;
    test_data.features.rows = cfg.synthetic_test_n;
    test_data.features.cols = all.features.cols;
    const std::size_t split = static_cast<std::size_t>(cfg.synthetic_n) *
                              all.features.cols;
    train_data.features.values.assign(all.features.values.begin(),
                                      all.features.values.begin() + split);
    test_data.features.values.assign(all.features.values.begin() + split,
                                     all.features.values.end());
    train_data.labels.assign(all.labels.begin(),
                             all.labels.begin() + cfg.synthetic_n);
    test_data.labels.assign(all.labels.begin() + cfg.synthetic_n,
                            all.labels.end());
    return {data::VerticalDataset::split_features(train_data, cfg.clients),
            data::VerticalDataset::split_features(test_data, cfg.clients)};
  }
  auto train_data = data::load_csv_dataset(cfg.csv_train, cfg.csv_has_header);
  if (cfg.csv_test.empty())
    throw config_error("config: csv_test is required for dataset = csv");
  auto test_data = data::load_csv_dataset(cfg.csv_test, cfg.csv_has_header);
  test_data.num_classes = train_data.num_classes =
      std::max(train_data.num_classes, test_data.num_classes);
  return {data::VerticalDataset::split_features(train_data, cfg.clients),
          data::VerticalDataset::split_features(test_data, cfg.clients)};
}

}  // namespace vflsim::proto
