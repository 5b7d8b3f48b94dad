// Copyright 2026 The AFed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "afed/rng.hpp"
#include "afed/tensor.hpp"

namespace afed::nn {

enum class Hidden { relu, leaky_relu };
enum class Output { identity, softmax, sigmoid };

struct Layer {
  Tensor2 w;  // (out, in)
  Tensor2 b;  // (1, out)
};

// Fully connected network. widths = [in, hidden..., out]; the hidden
// activation applies to every layer except the last, the output activation
// to the last only.
struct Mlp {
  std::vector<std::size_t> widths;
  std::vector<Layer> layers;
  Hidden hidden = Hidden::relu;
  Output output = Output::identity;
  double leaky_slope = 0.2;

  std::size_t in_dim() const { return widths.front(); }
  std::size_t out_dim() const { return widths.back(); }
};

// He-style fan-in scaled init for layers feeding the hidden activation,
// 1/fan_in variance for the output layer; biases start at zero.
Mlp make_mlp(std::vector<std::size_t> widths, Hidden hidden, Output output,
             Rng& rng, double leaky_slope = 0.2);

Tensor2 forward(const Mlp& net, const Tensor2& input);

// Per-layer intermediates kept for backprop. pre[i]/post[i] are the
// pre-activation and activated outputs of layer i; post.back() is the
// network output.
struct ForwardCache {
  Tensor2 input;
  std::vector<Tensor2> pre;
  std::vector<Tensor2> post;
  const Tensor2& output() const { return post.back(); }
};

ForwardCache forward_cache(const Mlp& net, const Tensor2& input);

struct Backprop {
  std::vector<Tensor2> dw;
  std::vector<Tensor2> db;
  Tensor2 dinput;
};

// upstream is dLoss/dOutput with the output activation applied; the
// softmax/sigmoid Jacobian is chained internally.
Backprop backward(const Mlp& net, const ForwardCache& cache,
                  const Tensor2& upstream);

// upstream is dLoss/dLogits (pre output activation). This is the fused path
// used with cross_entropy / bce_with_logits.
Backprop backward_from_logits(const Mlp& net, const ForwardCache& cache,
                              const Tensor2& upstream);

struct CeResult {
  double loss = 0.0;
  Tensor2 dlogits;  // gradient w.r.t. pre-softmax logits, already / n
};

// Mean cross-entropy over rows of a row-stochastic probability matrix.
// Probabilities are clamped at 1e-12 inside the log. Throws
// std::out_of_range for a label outside [0, cols).
CeResult cross_entropy(const Tensor2& probs, const std::vector<int>& labels);

struct BceResult {
  double loss = 0.0;
  Tensor2 dlogits;  // (n,1), already / n
};

// Mean binary cross-entropy on raw logits (n,1), numerically stable.
BceResult bce_with_logits(const Tensor2& logits,
                          const std::vector<double>& targets);

// --- flat parameter vector -------------------------------------------------
// Order: layer-major; within a layer the weight matrix in row-major order,
// then the bias. This ordering is also the serialization format.

std::size_t param_count(const Mlp& net);
std::vector<double> flatten(const Mlp& net);
void unflatten(Mlp& net, std::span<const double> flat);
std::vector<double> flatten_grads(const Mlp& net, const Backprop& bp);

// --- optimizers --------------------------------------------------------------

enum class OptKind { sgd, adam, rmsprop };

struct OptState {
  OptKind kind = OptKind::sgd;
  double lr = 0.0;
  double beta1 = 0.9;    // adam
  double beta2 = 0.999;  // adam
  double rho = 0.99;     // rmsprop
  double eps = 1e-8;
  long step = 0;
  std::vector<double> m;  // first moment (adam)
  std::vector<double> v;  // second moment (adam, rmsprop)
};

OptState make_opt(OptKind kind, double lr, std::size_t n_params);

// In-place parameter update; moments are untouched in sgd mode.
void opt_step(std::vector<double>& params, const std::vector<double>& grads,
              OptState& state);

Tensor2 softmax_rows(const Tensor2& logits);
double sigmoid(double x);

}  // namespace afed::nn
