// Copyright 2026 The seanet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense reverse-mode differentiation for gated multilayer perceptrons.
//
// A network is a sequence of DenseLayer. Each layer computes
//   out = gain ⊙ act(W · in + b)
// where the gain is optional and supplied per call. Batched calls carry one
// sample per column. backward() returns gradients with respect to the
// parameters, the network input and every supplied gain; parameter gradients
// are summed over the batch.

#ifndef SEANET_GRAD_CORE_HPP_
#define SEANET_GRAD_CORE_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "seanet/common.hpp"

namespace seanet {

enum class Activation : std::uint8_t { kReLU = 0, kSigmoid = 1, kIdentity = 2 };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kReLU:
      return "relu";
    case Activation::kSigmoid:
      return "sigmoid";
    case Activation::kIdentity:
      return "identity";
  }
  return "?";
}

struct DenseLayer {
  Matrix weights;  // out x in
  Vector biases;   // out
  Activation activation = Activation::kIdentity;

  Index in_size() const { return weights.cols(); }
  Index out_size() const { return weights.rows(); }

  friend bool operator==(const DenseLayer& a, const DenseLayer& b) {
    return a.activation == b.activation &&
           a.weights.rows() == b.weights.rows() &&
           a.weights.cols() == b.weights.cols() &&
           a.biases.size() == b.biases.size() && a.weights == b.weights &&
           a.biases == b.biases;
  }
};

using Network = std::vector<DenseLayer>;

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
inline DenseLayer make_layer(Index in, Index out, Activation act, Rng& rng,
                             double bound_scale = 1.0) {
  if (in <= 0 || out <= 0) {
    throw DimensionError("layer sizes must be positive, got " +
                         shape_str(out, in));
  }
  const double bound = bound_scale / std::sqrt(static_cast<double>(in));
  DenseLayer layer;
  layer.activation = act;
  layer.weights.resize(out, in);
  for (Index c = 0; c < in; ++c) {
    for (Index r = 0; r < out; ++r) layer.weights(r, c) = uniform(rng, -bound, bound);
  }
  layer.biases = uniform_vector(rng, out, -bound, bound);
  return layer;
}

// Throws DimensionError naming the first inconsistent layer.
inline void validate_network(std::span<const DenseLayer> layers) {
  if (layers.empty()) throw DimensionError("network has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    const int li = static_cast<int>(l);
    if (layer.biases.size() != layer.out_size()) {
      throw DimensionError("bias length " + std::to_string(layer.biases.size()) +
                               " != out size " + std::to_string(layer.out_size()),
                           li);
    }
    if (l > 0 && layer.in_size() != layers[l - 1].out_size()) {
      throw DimensionError("in size " + std::to_string(layer.in_size()) +
                               " != previous out size " +
                               std::to_string(layers[l - 1].out_size()),
                           li);
    }
  }
}

inline std::size_t parameter_count(std::span<const DenseLayer> layers) {
  std::size_t n = 0;
  for (const auto& l : layers) {
    n += static_cast<std::size_t>(l.weights.size() + l.biases.size());
  }
  return n;
}

namespace detail {

inline Matrix activate(const Matrix& pre, Activation act) {
  switch (act) {
    case Activation::kReLU:
      return pre.cwiseMax(0.0);
    case Activation::kSigmoid:
      return pre.unaryExpr([](double x) { return sigmoid(x); });
    case Activation::kIdentity:
      return pre;
  }
  return pre;
}

// d act / d pre, multiplied into `grad` in place.
inline void apply_activation_grad(Matrix& grad, const Matrix& pre,
                                  const Matrix& act, Activation a) {
  switch (a) {
    case Activation::kReLU:
      grad.array() *= (pre.array() > 0.0).cast<double>();
      break;
    case Activation::kSigmoid:
      grad.array() *= act.array() * (1.0 - act.array());
      break;
    case Activation::kIdentity:
      break;
  }
}

}  // namespace detail

// Record of one forward pass. Consumed by exactly one backward() call.
class Tape {
 public:
  Tape() = default;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t size() const { return steps_.size(); }
  Index batch() const { return input_.cols(); }
  bool consumed() const { return consumed_; }

  const Matrix& input() const { return input_; }
  const Matrix& layer_input(std::size_t l) const {
    return l == 0 ? input_ : steps_[l - 1].out;
  }
  const Matrix& pre_activation(std::size_t l) const { return steps_[l].pre; }
  const Matrix& activation(std::size_t l) const { return steps_[l].act; }
  // Empty matrix when layer l was not gated.
  const Matrix& gain(std::size_t l) const { return steps_[l].gain; }
  const Matrix& layer_output(std::size_t l) const { return steps_[l].out; }
  const Matrix& output() const { return steps_.back().out; }

 private:
  struct Step {
    Index in_size = 0;
    Index out_size = 0;
    Matrix pre;
    Matrix act;
    Matrix gain;
    Matrix out;
  };

  friend struct TapeAccess;

  Matrix input_;
  std::vector<Step> steps_;
  bool consumed_ = false;
};

struct ForwardOptions {
  // Gains are required to lie in [0,1] unless this is set (dropout masks use
  // inverted scaling and exceed 1).
  bool allow_any_nonnegative_gain = false;
};

struct BatchForward {
  Matrix output;
  Tape tape;
};

struct TapeAccess {
  static Matrix& input(Tape& t) { return t.input_; }
  static auto& steps(Tape& t) { return t.steps_; }
  static const auto& steps(const Tape& t) { return t.steps_; }
  static void consume(Tape& t) { t.consumed_ = true; }
};

// `gains` is either empty (no gating) or has one entry per layer; an empty
// matrix entry leaves that layer ungated. Each gain matrix is out x batch.
inline BatchForward forward_batch(std::span<const DenseLayer> layers,
                                  const Matrix& inputs,
                                  std::span<const Matrix> gains = {},
                                  ForwardOptions options = {}) {
  validate_network(layers);
  if (inputs.rows() != layers.front().in_size()) {
    throw DimensionError("input length " + std::to_string(inputs.rows()) +
                             " != in size " +
                             std::to_string(layers.front().in_size()),
                         0);
  }
  if (!gains.empty() && gains.size() != layers.size()) {
    throw DimensionError("expected " + std::to_string(layers.size()) +
                         " gain entries, got " + std::to_string(gains.size()));
  }
  BatchForward result;
  Tape& tape = result.tape;
  TapeAccess::input(tape) = inputs;
  auto& steps = TapeAccess::steps(tape);
  steps.reserve(layers.size());
  const Matrix* in = &TapeAccess::input(tape);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    auto& step = steps.emplace_back();
    step.in_size = layer.in_size();
    step.out_size = layer.out_size();
    step.pre = layer.weights * *in;
    step.pre.colwise() += layer.biases;
    step.act = detail::activate(step.pre, layer.activation);
    const bool gated = !gains.empty() && gains[l].size() != 0;
    if (gated) {
      const Matrix& g = gains[l];
      if (g.rows() != layer.out_size() || g.cols() != inputs.cols()) {
        throw DimensionError("gain shape " + shape_str(g.rows(), g.cols()) +
                                 " != " + shape_str(layer.out_size(), inputs.cols()),
                             static_cast<int>(l));
      }
      const bool in_range =
          options.allow_any_nonnegative_gain
              ? (g.array() >= 0.0).all() && g.allFinite()
              : (g.array() >= 0.0).all() && (g.array() <= 1.0).all();
      if (!in_range) {
        throw ValidationError("layer " + std::to_string(l) +
                              ": gains outside the permitted range");
      }
      step.gain = g;
      step.out = step.act.cwiseProduct(g);
    } else {
      step.out = step.act;
    }
    in = &step.out;
  }
  result.output = steps.back().out;
  return result;
}

struct ParamGrads {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static ParamGrads zeros_like(std::span<const DenseLayer> layers) {
    ParamGrads g;
    for (const auto& l : layers) {
      g.weights.push_back(Matrix::Zero(l.out_size(), l.in_size()));
      g.biases.push_back(Vector::Zero(l.out_size()));
    }
    return g;
  }

  ParamGrads& operator+=(const ParamGrads& o) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      weights[l] += o.weights[l];
      biases[l] += o.biases[l];
    }
    return *this;
  }

  ParamGrads& operator*=(double s) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      weights[l] *= s;
      biases[l] *= s;
    }
    return *this;
  }
};

struct BatchGradients {
  ParamGrads params;
  Matrix input;               // in x batch
  std::vector<Matrix> gains;  // out x batch per layer; empty if ungated
};

// `extra_output_grads`, when non-empty, holds one entry per layer: an
// additional gradient with respect to that layer's (gated) output. Used when
// intermediate activations feed somewhere else, as CDP gains do.
inline BatchGradients backward_batch(std::span<const DenseLayer> layers,
                                     Tape& tape, const Matrix& output_grad,
                                     std::span<const Matrix> extra_output_grads = {}) {
  if (tape.consumed()) {
    throw ValidationError("tape already consumed by a previous backward pass");
  }
  const auto& steps = TapeAccess::steps(tape);
  if (steps.size() != layers.size()) {
    throw ValidationError("tape records " + std::to_string(steps.size()) +
                          " layers, network has " + std::to_string(layers.size()));
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (steps[l].in_size != layers[l].in_size() ||
        steps[l].out_size != layers[l].out_size()) {
      throw ValidationError("tape does not match network at layer " +
                            std::to_string(l));
    }
  }
  const Index batch = tape.batch();
  if (output_grad.rows() != layers.back().out_size() || output_grad.cols() != batch) {
    throw DimensionError("output gradient shape " +
                         shape_str(output_grad.rows(), output_grad.cols()) +
                         " != " + shape_str(layers.back().out_size(), batch));
  }
  if (!extra_output_grads.empty() && extra_output_grads.size() != layers.size()) {
    throw DimensionError("expected " + std::to_string(layers.size()) +
                         " extra gradient entries, got " +
                         std::to_string(extra_output_grads.size()));
  }
  TapeAccess::consume(tape);

  BatchGradients grads;
  const std::size_t n = layers.size();
  grads.params.weights.resize(n);
  grads.params.biases.resize(n);
  grads.gains.resize(n);
  Matrix d_out = output_grad;
  for (std::size_t l = n; l-- > 0;) {
    const auto& layer = layers[l];
    const auto& step = steps[l];
    if (!extra_output_grads.empty() && extra_output_grads[l].size() != 0) {
      const Matrix& extra = extra_output_grads[l];
      if (extra.rows() != d_out.rows() || extra.cols() != d_out.cols()) {
        throw DimensionError("extra gradient shape mismatch",
                             static_cast<int>(l));
      }
      d_out += extra;
    }
    Matrix d_pre;
    if (step.gain.size() != 0) {
      grads.gains[l] = d_out.cwiseProduct(step.act);
      d_pre = d_out.cwiseProduct(step.gain);
    } else {
      d_pre = std::move(d_out);
    }
    detail::apply_activation_grad(d_pre, step.pre, step.act, layer.activation);
    const Matrix& in = tape.layer_input(l);
    grads.params.weights[l].noalias() = d_pre * in.transpose();
    grads.params.biases[l] = d_pre.rowwise().sum();
    d_out.noalias() = layer.weights.transpose() * d_pre;
  }
  grads.input = std::move(d_out);
  return grads;
}

// Single-sample interface.

struct Forward {
  Vector output;
  Tape tape;
};

struct Gradients {
  ParamGrads params;
  Vector input;
  std::vector<Vector> gains;  // empty vector for ungated layers
};

// `gains` is empty or one vector per layer; an empty vector leaves that layer
// ungated. Gains must lie in [0,1].
inline Forward forward(std::span<const DenseLayer> layers, const Vector& input,
                       std::span<const Vector> gains = {}) {
  std::vector<Matrix> g;
  g.reserve(gains.size());
  for (const auto& v : gains) g.emplace_back(v);
  auto r = forward_batch(layers, input, g);
  return {r.output.col(0), std::move(r.tape)};
}

inline Gradients backward(std::span<const DenseLayer> layers, Tape& tape,
                          const Vector& output_grad) {
  auto b = backward_batch(layers, tape, output_grad);
  Gradients g;
  g.params = std::move(b.params);
  g.input = b.input.col(0);
  for (auto& m : b.gains) {
    g.gains.push_back(m.size() != 0 ? Vector(m.col(0)) : Vector());
  }
  return g;
}

// Central differences: (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
inline Vector finite_difference_gradient(
    const std::function<double(const Vector&)>& f, const Vector& x,
    double step) {
  if (!(step > 0.0)) throw ValidationError("finite-difference step must be > 0");
  Vector grad(x.size());
  Vector probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double plus = f(probe);
    probe[i] = x[i] - step;
    const double minus = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw NumericError("non-finite function value probing coordinate " +
                         std::to_string(i));
    }
    grad[i] = (plus - minus) / (2.0 * step);
  }
  return grad;
}

// Optimizers operate on flat blocks of contiguous parameters.

using ParamBlocks = std::vector<std::span<double>>;
using GradBlocks = std::vector<std::span<const double>>;

inline ParamBlocks param_blocks(Network& net) {
  ParamBlocks blocks;
  for (auto& l : net) {
    blocks.emplace_back(l.weights.data(), static_cast<std::size_t>(l.weights.size()));
    blocks.emplace_back(l.biases.data(), static_cast<std::size_t>(l.biases.size()));
  }
  return blocks;
}

inline GradBlocks grad_blocks(const ParamGrads& g) {
  GradBlocks blocks;
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    blocks.emplace_back(g.weights[l].data(), static_cast<std::size_t>(g.weights[l].size()));
    blocks.emplace_back(g.biases[l].data(), static_cast<std::size_t>(g.biases[l].size()));
  }
  return blocks;
}

namespace detail {
inline void check_blocks(const ParamBlocks& p, const GradBlocks& g) {
  if (p.size() != g.size()) {
    throw DimensionError("parameter/gradient block count mismatch: " +
                         std::to_string(p.size()) + " vs " + std::to_string(g.size()));
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i].size() != g[i].size()) {
      throw DimensionError("block " + std::to_string(i) + " size mismatch: " +
                           std::to_string(p[i].size()) + " vs " +
                           std::to_string(g[i].size()));
    }
  }
}
}  // namespace detail

// p <- p - lr * g
inline void sgd_step(const ParamBlocks& params, const GradBlocks& grads, double lr) {
  detail::check_blocks(params, grads);
  if (!(lr >= 0.0)) throw ValidationError("learning rate must be >= 0");
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t i = 0; i < params[b].size(); ++i) params[b][i] -= lr * grads[b][i];
  }
}

inline void sgd_step(Network& net, const ParamGrads& grads, double lr) {
  sgd_step(param_blocks(net), grad_blocks(grads), lr);
}

inline void sgd_step(Vector& params, const Vector& grads, double lr) {
  sgd_step(ParamBlocks{{params.data(), static_cast<std::size_t>(params.size())}},
           GradBlocks{{grads.data(), static_cast<std::size_t>(grads.size())}}, lr);
}

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(const std::vector<std::size_t>& block_sizes, AdamHyper hyper = {})
      : hyper_(hyper) {
    for (auto n : block_sizes) {
      m_.emplace_back(std::vector<double>(n, 0.0));
      v_.emplace_back(std::vector<double>(n, 0.0));
    }
  }

  static AdamState for_network(const Network& net, AdamHyper hyper = {}) {
    std::vector<std::size_t> sizes;
    for (const auto& l : net) {
      sizes.push_back(static_cast<std::size_t>(l.weights.size()));
      sizes.push_back(static_cast<std::size_t>(l.biases.size()));
    }
    return AdamState(sizes, hyper);
  }

  static AdamState for_vector(Index n, AdamHyper hyper = {}) {
    return AdamState({static_cast<std::size_t>(n)}, hyper);
  }

  std::uint64_t steps() const { return t_; }
  const AdamHyper& hyper() const { return hyper_; }

 private:
  friend void adam_step(AdamState&, const ParamBlocks&, const GradBlocks&, double);

  AdamHyper hyper_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

// Bias-corrected Adam; advances the state by one step.
inline void adam_step(AdamState& state, const ParamBlocks& params,
                      const GradBlocks& grads, double lr) {
  detail::check_blocks(params, grads);
  if (state.m_.size() != params.size()) {
    throw DimensionError("Adam state has " + std::to_string(state.m_.size()) +
                         " blocks, parameters have " + std::to_string(params.size()));
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (state.m_[b].size() != params[b].size()) {
      throw DimensionError("Adam state block " + std::to_string(b) + " size mismatch");
    }
  }
  if (!(lr >= 0.0)) throw ValidationError("learning rate must be >= 0");
  const auto& h = state.hyper_;
  ++state.t_;
  const double t = static_cast<double>(state.t_);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    const auto n = static_cast<Index>(params[b].size());
    Eigen::Map<Eigen::ArrayXd> m(state.m_[b].data(), n);
    Eigen::Map<Eigen::ArrayXd> v(state.v_[b].data(), n);
    Eigen::Map<const Eigen::ArrayXd> g(grads[b].data(), n);
    Eigen::Map<Eigen::ArrayXd> p(params[b].data(), n);
    m = h.beta1 * m + (1.0 - h.beta1) * g;
    v = h.beta2 * v + (1.0 - h.beta2) * g.square();
    p -= (lr / c1) * m / ((v / c2).sqrt() + h.epsilon);
  }
}

inline void adam_step(AdamState& state, Network& net, const ParamGrads& grads,
                      double lr) {
  adam_step(state, param_blocks(net), grad_blocks(grads), lr);
}

inline void adam_step(AdamState& state, Vector& params, const Vector& grads,
                      double lr) {
  adam_step(state,
            ParamBlocks{{params.data(), static_cast<std::size_t>(params.size())}},
            GradBlocks{{grads.data(), static_cast<std::size_t>(grads.size())}}, lr);
}

}  // namespace seanet

#endif  // SEANET_GRAD_CORE_HPP_
