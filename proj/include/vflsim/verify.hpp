#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vflsim/partition.hpp"
#include "vflsim/protocol.hpp"
#include "vflsim/rng.hpp"
#include "vflsim/tensor_nn.hpp"
#include "vflsim/zoo.hpp"

namespace vflsim::verify {

/// Test function with an analytic gradient and a certified Lipschitz
/// constant for that gradient. Trained networks are deliberately not used
/// here: the bounds need exact references.
struct Fixture {
  std::string name;
  int dim = 0;
  double lipschitz = 0.0;  // L such that grad is L-Lipschitz
  zoo::ScalarField f;
  std::function<std::vector<double>(std::span<const double>)> grad;
};

inline Fixture make_linear(int d) {
  Fixture fx;
  fx.name = "linear";
  fx.dim = d;
  fx.lipschitz = 0.0;
  fx.f = [d](std::span<const double> w) {
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += (0.5 + 0.1 * k) * w[k];
    return s;
  };
  fx.grad = [d](std::span<const double>) {
    std::vector<double> g(d);
    for (int k = 0; k < d; ++k) g[k] = 0.5 + 0.1 * k;
    return g;
  };
  return fx;
}

/// f(w) = 0.5 * w' diag(1..d) w; the gradient Lipschitz constant is d.
inline Fixture make_scaled_quadratic(int d) {
  Fixture fx;
  fx.name = "quadratic";
  fx.dim = d;
  fx.lipschitz = static_cast<double>(d);
  fx.f = [d](std::span<const double> w) {
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += (k + 1) * w[k] * w[k];
    return 0.5 * s;
  };
  fx.grad = [d](std::span<const double> w) {
    std::vector<double> g(d);
    for (int k = 0; k < d; ++k) g[k] = (k + 1) * w[k];
    return g;
  };
  return fx;
}

/// log-sum-exp; the Hessian diag(p) - p p' has operator norm <= 1.
inline Fixture make_log_sum_exp(int d) {
  Fixture fx;
  fx.name = "log_sum_exp";
  fx.dim = d;
  fx.lipschitz = 1.0;
  fx.f = [d](std::span<const double> w) {
    double mx = w[0];
    for (int k = 1; k < d; ++k) mx = std::max(mx, w[k]);
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += std::exp(w[k] - mx);
    return mx + std::log(s);
  };
  fx.grad = [d](std::span<const double> w) {
    double mx = w[0];
    for (int k = 1; k < d; ++k) mx = std::max(mx, w[k]);
    std::vector<double> g(d);
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += g[k] = std::exp(w[k] - mx);
    for (auto& v : g) v /= s;
    return g;
  };
  return fx;
}

struct CheckReport {
  std::string check;
  std::string fixture;
  double measured = 0.0;
  double bound = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

namespace detail {

inline double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// Monte-Carlo estimate of the smoothed gradient via the identity
/// grad f_mu(w) = E_u[grad f(w + mu*u)], an independent route that never
/// touches the two-point estimator. Returns the mean and the norm of its
/// standard error.
inline std::vector<double> smoothed_gradient_reference(
    const Fixture& fx, std::span<const double> w, double mu, std::int64_t n,
    Rng& rng, double* stderr_norm = nullptr) {
  std::vector<double> mean(fx.dim, 0.0), m2(fx.dim, 0.0);
  std::vector<double> shifted(fx.dim);
  for (std::int64_t rep = 0; rep < n; ++rep) {
    auto u = zoo::sample_direction(fx.dim, zoo::DirectionKind::kUnitSphere, rng);
    for (int k = 0; k < fx.dim; ++k) shifted[k] = w[k] + mu * u[k];
    auto g = fx.grad(shifted);
    for (int k = 0; k < fx.dim; ++k) {
      double delta = g[k] - mean[k];
      mean[k] += delta / (rep + 1);
      m2[k] += delta * (g[k] - mean[k]);
    }
  }
  if (stderr_norm) {
    double s = 0.0;
    for (int k = 0; k < fx.dim; ++k) s += m2[k] / (n - 1) / n;
    *stderr_norm = std::sqrt(s);
  }
  return mean;
}

}  // namespace detail

/// Lemma check: the two-point estimator is unbiased for the smoothed
/// gradient. N estimator samples against a 10N-sample independent
/// Monte-Carlo reference; pass iff the relative error <= 1% + 3/sqrt(N).
inline CheckReport check_smoothed_unbiasedness(const Fixture& fx,
                                               std::span<const double> w,
                                               double mu, std::int64_t n,
                                               Rng& rng) {
  std::vector<double> mean(fx.dim, 0.0);
  for (std::int64_t rep = 0; rep < n; ++rep) {
    zoo::Perturbation pert{
        zoo::sample_direction(fx.dim, zoo::DirectionKind::kUnitSphere, rng),
        mu, 0, 0};
    auto g = zoo::estimate_gradient_direct(fx.f, w, pert,
                                           zoo::DirectionKind::kUnitSphere);
    for (int k = 0; k < fx.dim; ++k) mean[k] += g[k];
  }
  for (auto& v : mean) v /= static_cast<double>(n);

  Rng ref_rng = rng;  // decoupled continuation stream for the reference
  auto reference =
      detail::smoothed_gradient_reference(fx, w, mu, 10 * n, ref_rng);

  double err = 0.0;
  for (int k = 0; k < fx.dim; ++k)
    err += (mean[k] - reference[k]) * (mean[k] - reference[k]);
  double ref_norm = detail::norm(reference);
  CheckReport report;
  report.check = "smoothed_unbiasedness";
  report.fixture = fx.name;
  report.measured = ref_norm > 0 ? std::sqrt(err) / ref_norm : std::sqrt(err);
  report.bound = 0.0;
  report.tolerance = 0.01 + 3.0 / std::sqrt(static_cast<double>(n));
  report.pass = report.measured <= report.tolerance;
  return report;
}

/// Lemma check: |f_mu(x) - f(x)| <= L mu^2 / 2.
inline CheckReport check_value_approximation(const Fixture& fx,
                                             std::span<const double> w,
                                             double mu, std::int64_t n,
                                             Rng& rng) {
  const double fw = fx.f(w);
  double mean = 0.0, m2 = 0.0;
  std::vector<double> shifted(fx.dim);
  for (std::int64_t rep = 0; rep < n; ++rep) {
    auto u = zoo::sample_direction(fx.dim, zoo::DirectionKind::kUnitSphere, rng);
    for (int k = 0; k < fx.dim; ++k) shifted[k] = w[k] + mu * u[k];
    double v = fx.f(shifted) - fw;
    double delta = v - mean;
    mean += delta / (rep + 1);
    m2 += delta * (v - mean);
  }
  double mc_stderr = n > 1 ? std::sqrt(m2 / (n - 1) / n) : 0.0;

  CheckReport report;
  report.check = "value_approximation";
  report.fixture = fx.name;
  report.measured = std::abs(mean);
  report.bound = fx.lipschitz * mu * mu / 2.0;
  report.tolerance = report.bound * 0.01 + 3.0 * mc_stderr;
  report.pass = report.measured <= report.bound + report.tolerance;
  return report;
}

/// Lemma check: ||grad f_mu - grad f|| <= mu L d / 2.
inline CheckReport check_bias_bound(const Fixture& fx,
                                    std::span<const double> w, double mu,
                                    std::int64_t n, Rng& rng) {
  double stderr_norm = 0.0;
  auto smoothed =
      detail::smoothed_gradient_reference(fx, w, mu, n, rng, &stderr_norm);
  auto exact = fx.grad(w);
  double err = 0.0;
  for (int k = 0; k < fx.dim; ++k)
    err += (smoothed[k] - exact[k]) * (smoothed[k] - exact[k]);

  CheckReport report;
  report.check = "bias_bound";
  report.fixture = fx.name;
  report.measured = std::sqrt(err);
  report.bound = mu * fx.lipschitz * fx.dim / 2.0;
  report.tolerance = report.bound * 0.01 + 3.0 * stderr_norm;
  report.pass = report.measured <= report.bound + report.tolerance;
  return report;
}

/// Lemma check: E ||two-point estimate||^2 <= 2 d ||grad f||^2 + mu^2 L^2 d^2 / 2.
/// mu == 0 uses the limit form d * (grad f . u) u.
inline CheckReport check_second_moment(const Fixture& fx,
                                       std::span<const double> w, double mu,
                                       std::int64_t n, Rng& rng) {
  auto exact = fx.grad(w);
  double mean = 0.0, m2 = 0.0;
  for (std::int64_t rep = 0; rep < n; ++rep) {
    auto u = zoo::sample_direction(fx.dim, zoo::DirectionKind::kUnitSphere, rng);
    double sq;
    if (mu > 0.0) {
      zoo::Perturbation pert{std::move(u), mu, 0, 0};
      auto g = zoo::estimate_gradient_direct(fx.f, w, pert,
                                             zoo::DirectionKind::kUnitSphere);
      sq = 0.0;
      for (double v : g) sq += v * v;
    } else {
      double dot = 0.0;
      for (int k = 0; k < fx.dim; ++k) dot += exact[k] * u[k];
      // || d * (grad.u) u ||^2 with ||u|| = 1
      sq = fx.dim * fx.dim * dot * dot;
    }
    double delta = sq - mean;
    mean += delta / (rep + 1);
    m2 += delta * (sq - mean);
  }
  double mc_stderr = n > 1 ? std::sqrt(m2 / (n - 1) / n) : 0.0;

  double grad_norm2 = 0.0;
  for (double v : exact) grad_norm2 += v * v;

  CheckReport report;
  report.check = "second_moment";
  report.fixture = fx.name;
  report.measured = mean;
  report.bound = 2.0 * fx.dim * grad_norm2 +
                 mu * mu * fx.lipschitz * fx.lipschitz * fx.dim * fx.dim / 2.0;
  report.tolerance = report.bound * 0.01 + 3.0 * mc_stderr;
  report.pass = report.measured <= report.bound + report.tolerance;
  return report;
}

/// The full lemma suite over the three analytic fixtures at dimension 10.
/// The evaluation point is a fixed seeded draw scaled to unit norm.
inline std::vector<CheckReport> run_lemma_suite(std::int64_t n, double mu,
                                                std::uint64_t seed) {
  const int d = 10;
  std::vector<Fixture> fixtures{make_linear(d), make_scaled_quadratic(d),
                                make_log_sum_exp(d)};
  std::vector<CheckReport> reports;
  std::uint64_t stream_id = 0;
  for (const auto& fx : fixtures) {
    Rng wrng = Rng::from_master(seed, 900 + stream_id);
    std::vector<double> w(d);
    wrng.fill_gaussian(w);
    double wn = detail::norm(w);
    for (auto& v : w) v /= wn;

    Rng r1 = Rng::from_master(seed, 1000 + stream_id);
    Rng r2 = Rng::from_master(seed, 2000 + stream_id);
    Rng r3 = Rng::from_master(seed, 3000 + stream_id);
    Rng r4 = Rng::from_master(seed, 4000 + stream_id);
    reports.push_back(check_smoothed_unbiasedness(fx, w, mu, n, r1));
    reports.push_back(check_value_approximation(fx, w, mu, n, r2));
    reports.push_back(check_bias_bound(fx, w, mu, n, r3));
    reports.push_back(check_second_moment(fx, w, mu, n, r4));
    ++stream_id;
  }
  return reports;
}

/// Empirical variance of per-sample composite gradients around the
/// full-batch gradient, per party (index 0 is the server). Exact
/// backpropagation through server and clients; no estimator involved.
inline std::vector<double> measure_gradient_variance(
    const nn::DenseNet& server_net, const std::vector<nn::DenseNet>& clients,
    const data::VerticalDataset& dataset) {
  const int n = dataset.num_samples();
  const int m = static_cast<int>(clients.size());
  std::vector<std::vector<std::vector<double>>> per_sample(m + 1);
  for (int p = 0; p <= m; ++p) per_sample[p].reserve(n);

  std::vector<double> input;
  for (int i = 0; i < n; ++i) {
    std::vector<nn::ForwardTape> tapes(m);
    input.clear();
    std::vector<int> offsets(m + 1, 0);
    for (int c = 0; c < m; ++c) {
      auto out = nn::forward(clients[c], dataset.shard(c).row(i), &tapes[c]);
      offsets[c + 1] = offsets[c] + static_cast<int>(out.size());
      input.insert(input.end(), out.begin(), out.end());
    }
    nn::ForwardTape stape;
    auto logits = nn::forward(server_net, input, &stape);
    auto lr = nn::softmax_cross_entropy(logits, dataset.labels()[i]);
    auto sgrads = nn::backward(server_net, stape, lr.logit_grad);
    per_sample[0].push_back(std::move(sgrads.param_grad));
    std::span<const double> ig(sgrads.input_grad);
    for (int c = 0; c < m; ++c) {
      auto cg = nn::backward(
          clients[c], tapes[c],
          ig.subspan(offsets[c], offsets[c + 1] - offsets[c]));
      per_sample[c + 1].push_back(std::move(cg.param_grad));
    }
  }

  std::vector<double> variances(m + 1, 0.0);
  for (int p = 0; p <= m; ++p) {
    const auto& grads = per_sample[p];
    std::vector<double> mean(grads[0].size(), 0.0);
    for (const auto& g : grads)
      for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += g[k];
    for (auto& v : mean) v /= n;
    double acc = 0.0;
    for (const auto& g : grads) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < mean.size(); ++k)
        d2 += (g[k] - mean[k]) * (g[k] - mean[k]);
      acc += d2;
    }
    variances[p] = acc / n;
  }
  return variances;
}

struct ScalingRow {
  std::string axis;  // "server_hidden" or "embed_dim"
  int size = 0;
  std::string framework;
  std::int64_t iterations_to_threshold = -1;  // -1: never reached
  double final_train_loss = 0.0;
};

inline std::int64_t first_iteration_at_or_below(
    const std::vector<MetricsRecord>& metrics, double threshold) {
  for (const auto& rec : metrics)
    if (rec.train_loss <= threshold) return rec.iteration;
  return -1;
}

/// Paired cascaded-vs-ZOO runs over server and client size grids with
/// shared seeds; records iterations until the train loss first drops to
/// the threshold.
inline std::vector<ScalingRow> scaling_experiment(
    RunConfig base, const std::vector<int>& server_widths,
    const std::vector<int>& embed_dims, double loss_threshold) {
  std::vector<ScalingRow> rows;
  auto run_pair = [&](const RunConfig& cfg, const std::string& axis,
                      int size) {
    auto pair = proto::build_datasets(cfg);
    for (Framework fw : {Framework::kCascaded, Framework::kZoo}) {
      RunConfig rc = cfg;
      rc.framework = fw;
      auto result = proto::run(rc, pair.train, pair.test);
      rows.push_back(
          {axis, size, to_string(fw),
           first_iteration_at_or_below(result.metrics, loss_threshold),
           result.metrics.empty() ? 0.0
                                  : result.metrics.back().train_loss});
    }
  };
  for (int width : server_widths) {
    RunConfig cfg = base;
    cfg.server_hidden = {width};
    run_pair(cfg, "server_hidden", width);
  }
  for (int dim : embed_dims) {
    RunConfig cfg = base;
    cfg.embed_dim = dim;
    run_pair(cfg, "embed_dim", dim);
  }
  return rows;
}

}  // namespace vflsim::verify
