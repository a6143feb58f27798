#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vflsim/errors.hpp"
#include "vflsim/rng.hpp"

namespace vflsim::nn {

enum class Activation { kRelu, kIdentity };

struct Layer {
  int in = 0;
  int out = 0;
  std::vector<double> weight;  // out x in, row-major
  std::vector<double> bias;    // out
  Activation act = Activation::kIdentity;
};

/// Fully connected network, 64-bit doubles throughout.
///
/// Parameter flattening order is fixed: layer 0 weights (row-major), layer 0
/// bias, layer 1 weights, layer 1 bias, ... Everything that exchanges flat
/// parameter vectors (perturbations, gradients, SGD) relies on this order.
class DenseNet {
 public:
  DenseNet() = default;

  /// sizes = {in, h1, ..., out}; `act` applies to every layer except the
  /// last, which uses `final_act`.
  DenseNet(const std::vector<int>& sizes, Activation act,
           Activation final_act) {
    if (sizes.size() < 2) throw config_error("DenseNet needs >= 2 sizes");
    for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
      if (sizes[k] <= 0 || sizes[k + 1] <= 0)
        throw config_error("DenseNet layer sizes must be positive");
      Layer l;
      l.in = sizes[k];
      l.out = sizes[k + 1];
      l.weight.assign(static_cast<std::size_t>(l.in) * l.out, 0.0);
      l.bias.assign(l.out, 0.0);
      l.act = (k + 2 == sizes.size()) ? final_act : act;
      layers_.push_back(std::move(l));
    }
    recount();
  }

  const std::vector<Layer>& layers() const { return layers_; }
  int input_size() const { return layers_.front().in; }
  int output_size() const { return layers_.back().out; }
  int param_count() const { return param_count_; }
  std::uint64_t revision() const { return revision_; }

  /// Uniform [-sqrt(6/(fan_in+fan_out)), +...] weights, zero biases.
  void init_glorot(Rng& rng) {
    for (auto& l : layers_) {
      double bound = std::sqrt(6.0 / (l.in + l.out));
      for (auto& w : l.weight) w = (2.0 * rng.uniform01() - 1.0) * bound;
      for (auto& b : l.bias) b = 0.0;
    }
    ++revision_;
  }

  std::vector<double> flatten() const {
    std::vector<double> v;
    v.reserve(param_count_);
    for (const auto& l : layers_) {
      v.insert(v.end(), l.weight.begin(), l.weight.end());
      v.insert(v.end(), l.bias.begin(), l.bias.end());
    }
    return v;
  }

  void unflatten(std::span<const double> values) {
    if (static_cast<int>(values.size()) != param_count_)
      throw usage_error("unflatten: length " + std::to_string(values.size()) +
                        " != param_count " + std::to_string(param_count_));
    std::size_t pos = 0;
    for (auto& l : layers_) {
      for (auto& w : l.weight) w = values[pos++];
      for (auto& b : l.bias) b = values[pos++];
    }
    ++revision_;
  }

  /// Copy with params + mu * direction. The original is untouched.
  DenseNet perturbed(std::span<const double> direction, double mu) const {
    if (static_cast<int>(direction.size()) != param_count_)
      throw usage_error("perturbed: direction length mismatch");
    DenseNet copy = *this;
    std::size_t pos = 0;
    for (auto& l : copy.layers_) {
      for (auto& w : l.weight) w += mu * direction[pos++];
      for (auto& b : l.bias) b += mu * direction[pos++];
    }
    ++copy.revision_;
    return copy;
  }

  /// In-place w -= eta * grad over the flat layout.
  void sgd_step(std::span<const double> grad, double eta) {
    if (static_cast<int>(grad.size()) != param_count_)
      throw usage_error("sgd_step: gradient length mismatch");
    if (!(eta > 0.0)) throw usage_error("sgd_step: eta must be > 0");
    std::size_t pos = 0;
    for (auto& l : layers_) {
      for (auto& w : l.weight) w -= eta * grad[pos++];
      for (auto& b : l.bias) b -= eta * grad[pos++];
    }
    ++revision_;
  }

  // Direct mutable access for tests and oracles; bumps the revision.
  std::vector<Layer>& mutable_layers() {
    ++revision_;
    return layers_;
  }

 private:
  void recount() {
    param_count_ = 0;
    for (const auto& l : layers_)
      param_count_ += l.in * l.out + l.out;
  }

  std::vector<Layer> layers_;
  int param_count_ = 0;
  std::uint64_t revision_ = 0;
};

/// Per-layer pre-activations recorded by forward(); consumed by backward().
struct ForwardTape {
  std::vector<double> input;
  std::vector<std::vector<double>> pre;  // pre-activation per layer
  std::uint64_t net_revision = 0;
};

struct GradientBundle {
  std::vector<double> param_grad;  // flat layout
  std::vector<double> input_grad;
};

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

inline std::vector<double> forward(const DenseNet& net,
                                   std::span<const double> input,
                                   ForwardTape* tape = nullptr) {
  if (static_cast<int>(input.size()) != net.input_size())
    throw config_error("forward: input length " +
                       std::to_string(input.size()) + " != net input size " +
                       std::to_string(net.input_size()));
  std::vector<double> act(input.begin(), input.end());
  if (tape) {
    tape->input = act;
    tape->pre.clear();
    tape->net_revision = net.revision();
  }
  for (const auto& l : net.layers()) {
    std::vector<double> z(l.out);
    for (int o = 0; o < l.out; ++o) {
      const double* wrow = l.weight.data() + static_cast<std::size_t>(o) * l.in;
      double s = l.bias[o];
      for (int i = 0; i < l.in; ++i) s += wrow[i] * act[i];
      z[o] = s;
    }
    if (tape) tape->pre.push_back(z);
    if (l.act == Activation::kRelu)
      for (auto& v : z) v = relu(v);
    act = std::move(z);
  }
  for (double v : act)
    if (!std::isfinite(v)) throw numeric_error("forward: non-finite output");
  return act;
}

/// Reverse pass through a recorded forward. param_grad accumulates into
/// `g` (pass it empty to start from zero); input_grad is overwritten with
/// this call's result. ReLU subgradient at 0 is 0. Batch callers reuse one
/// bundle so there is no fresh zeroed vector per row.
inline void backward_accumulate(const DenseNet& net, const ForwardTape& tape,
                                std::span<const double> output_grad,
                                GradientBundle& g) {
  if (tape.net_revision != net.revision())
    throw usage_error("backward: tape does not match net revision");
  if (tape.pre.size() != net.layers().size())
    throw usage_error("backward: tape layer count mismatch");
  if (static_cast<int>(output_grad.size()) != net.output_size())
    throw usage_error("backward: output_grad length mismatch");
  if (g.param_grad.empty()) g.param_grad.assign(net.param_count(), 0.0);
  if (static_cast<int>(g.param_grad.size()) != net.param_count())
    throw usage_error("backward: accumulator length mismatch");

  // Flat offsets of each layer's weight block.
  std::vector<std::size_t> offset(net.layers().size());
  std::size_t pos = 0;
  for (std::size_t k = 0; k < net.layers().size(); ++k) {
    offset[k] = pos;
    pos += static_cast<std::size_t>(net.layers()[k].in) * net.layers()[k].out +
           net.layers()[k].out;
  }

  std::vector<double> delta(output_grad.begin(), output_grad.end());
  for (int k = static_cast<int>(net.layers().size()) - 1; k >= 0; --k) {
    const Layer& l = net.layers()[k];
    const auto& pre = tape.pre[k];
    if (l.act == Activation::kRelu)
      for (int o = 0; o < l.out; ++o)
        if (pre[o] <= 0.0) delta[o] = 0.0;

    // Layer input: previous layer's post-activation, or the tape input.
    std::vector<double> below;
    const std::vector<double>* in_act;
    if (k == 0) {
      in_act = &tape.input;
    } else {
      below = tape.pre[k - 1];
      if (net.layers()[k - 1].act == Activation::kRelu)
        for (auto& v : below) v = relu(v);
      in_act = &below;
    }

    double* wgrad = g.param_grad.data() + offset[k];
    double* bgrad = wgrad + static_cast<std::size_t>(l.in) * l.out;
    for (int o = 0; o < l.out; ++o) {
      const double d = delta[o];
      bgrad[o] += d;
      double* wrow = wgrad + static_cast<std::size_t>(o) * l.in;
      const double* x = in_act->data();
      for (int i = 0; i < l.in; ++i) wrow[i] += d * x[i];
    }

    std::vector<double> next(l.in, 0.0);
    for (int o = 0; o < l.out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* wrow = l.weight.data() + static_cast<std::size_t>(o) * l.in;
      for (int i = 0; i < l.in; ++i) next[i] += d * wrow[i];
    }
    delta = std::move(next);
  }
  g.input_grad = std::move(delta);
}

inline GradientBundle backward(const DenseNet& net, const ForwardTape& tape,
                               std::span<const double> output_grad) {
  GradientBundle g;
  backward_accumulate(net, tape, output_grad, g);
  return g;
}

struct LossResult {
  double loss = 0.0;
  std::vector<double> logit_grad;
};

/// Softmax cross-entropy with max-subtraction. logit_grad = softmax - onehot.
inline LossResult softmax_cross_entropy(std::span<const double> logits,
                                        int label) {
  if (label < 0 || label >= static_cast<int>(logits.size()))
    throw config_error("softmax_cross_entropy: label out of range");
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  LossResult r;
  r.logit_grad.resize(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c) {
    r.logit_grad[c] = std::exp(logits[c] - mx);
    sum += r.logit_grad[c];
  }
  for (auto& v : r.logit_grad) v /= sum;
  r.loss = std::log(sum) - (logits[label] - mx);
  r.logit_grad[label] -= 1.0;
  return r;
}

}  // namespace vflsim::nn
