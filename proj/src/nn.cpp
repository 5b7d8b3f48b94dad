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

#include "afed/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace afed::nn {

namespace {

constexpr double kProbFloor = 1e-12;

double act(Hidden h, double slope, double x) {
  switch (h) {
    case Hidden::relu:
      return x > 0.0 ? x : 0.0;
    case Hidden::leaky_relu:
      return x > 0.0 ? x : slope * x;
  }
  return x;
}

double act_grad(Hidden h, double slope, double pre) {
  switch (h) {
    case Hidden::relu:
      return pre > 0.0 ? 1.0 : 0.0;
    case Hidden::leaky_relu:
      return pre > 0.0 ? 1.0 : slope;
  }
  return 1.0;
}

Tensor2 apply_hidden(const Mlp& net, const Tensor2& pre) {
  Tensor2 out = pre;
  for (double& v : out.data) v = act(net.hidden, net.leaky_slope, v);
  return out;
}

Tensor2 apply_output(const Mlp& net, const Tensor2& pre) {
  switch (net.output) {
    case Output::identity:
      return pre;
    case Output::softmax:
      return softmax_rows(pre);
    case Output::sigmoid: {
      Tensor2 out = pre;
      for (double& v : out.data) v = sigmoid(v);
      return out;
    }
  }
  return pre;
}

Tensor2 affine(const Layer& l, const Tensor2& x) {
  Tensor2 out = matmul_nt(x, l.w);
  add_row_inplace(out, l.b);
  return out;
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor2 softmax_rows(const Tensor2& logits) {
  Tensor2 out = logits;
  for (std::size_t i = 0; i < out.rows; ++i) {
    double mx = out(i, 0);
    for (std::size_t j = 1; j < out.cols; ++j) mx = std::max(mx, out(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < out.cols; ++j) {
      out(i, j) = std::exp(out(i, j) - mx);
      sum += out(i, j);
    }
    for (std::size_t j = 0; j < out.cols; ++j) out(i, j) /= sum;
  }
  return out;
}

Mlp make_mlp(std::vector<std::size_t> widths, Hidden hidden, Output output,
             Rng& rng, double leaky_slope) {
  if (widths.size() < 2) {
    throw ShapeError("make_mlp: need at least input and output widths");
  }
  Mlp net;
  net.widths = std::move(widths);
  net.hidden = hidden;
  net.output = output;
  net.leaky_slope = leaky_slope;
  const std::size_t n_layers = net.widths.size() - 1;
  net.layers.resize(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const std::size_t fan_in = net.widths[l];
    const std::size_t fan_out = net.widths[l + 1];
    const bool feeds_hidden = l + 1 < n_layers;
    const double std_dev = feeds_hidden
                               ? std::sqrt(2.0 / static_cast<double>(fan_in))
                               : std::sqrt(1.0 / static_cast<double>(fan_in));
    net.layers[l].w = Tensor2(fan_out, fan_in);
    for (double& v : net.layers[l].w.data) v = std_dev * rng.normal();
    net.layers[l].b = Tensor2(1, fan_out);
  }
  return net;
}

ForwardCache forward_cache(const Mlp& net, const Tensor2& input) {
  if (input.cols != net.in_dim()) {
    throw ShapeError("forward: input width does not match first layer");
  }
  ForwardCache cache;
  cache.input = input;
  const std::size_t n_layers = net.layers.size();
  cache.pre.reserve(n_layers);
  cache.post.reserve(n_layers);
  const Tensor2* cur = &cache.input;
  for (std::size_t l = 0; l < n_layers; ++l) {
    cache.pre.push_back(affine(net.layers[l], *cur));
    const bool last = l + 1 == n_layers;
    cache.post.push_back(last ? apply_output(net, cache.pre.back())
                              : apply_hidden(net, cache.pre.back()));
    cur = &cache.post.back();
  }
  require_finite(cache.post.back(), "forward output");
  return cache;
}

Tensor2 forward(const Mlp& net, const Tensor2& input) {
  return forward_cache(net, input).post.back();
}

namespace {

Backprop backward_impl(const Mlp& net, const ForwardCache& cache,
                       Tensor2 dpre_last) {
  const std::size_t n_layers = net.layers.size();
  Backprop bp;
  bp.dw.resize(n_layers);
  bp.db.resize(n_layers);
  Tensor2 dpre = std::move(dpre_last);
  for (std::size_t l = n_layers; l-- > 0;) {
    const Tensor2& in = l == 0 ? cache.input : cache.post[l - 1];
    bp.dw[l] = matmul_tn(dpre, in);
    bp.db[l] = colsum(dpre);
    Tensor2 dpost_prev = matmul(dpre, net.layers[l].w);
    if (l == 0) {
      bp.dinput = std::move(dpost_prev);
    } else {
      // Chain through the hidden activation of layer l-1.
      const Tensor2& pre_prev = cache.pre[l - 1];
      for (std::size_t i = 0; i < dpost_prev.data.size(); ++i) {
        dpost_prev.data[i] *=
            act_grad(net.hidden, net.leaky_slope, pre_prev.data[i]);
      }
      dpre = std::move(dpost_prev);
    }
  }
  require_finite(bp.dinput, "backward input gradient");
  return bp;
}

}  // namespace

Backprop backward_from_logits(const Mlp& net, const ForwardCache& cache,
                              const Tensor2& upstream) {
  if (!upstream.same_shape(cache.post.back())) {
    throw ShapeError("backward: upstream shape does not match output");
  }
  return backward_impl(net, cache, upstream);
}

Backprop backward(const Mlp& net, const ForwardCache& cache,
                  const Tensor2& upstream) {
  if (!upstream.same_shape(cache.post.back())) {
    throw ShapeError("backward: upstream shape does not match output");
  }
  Tensor2 dpre = upstream;
  switch (net.output) {
    case Output::identity:
      break;
    case Output::sigmoid: {
      const Tensor2& out = cache.post.back();
      for (std::size_t i = 0; i < dpre.data.size(); ++i) {
        const double s = out.data[i];
        dpre.data[i] *= s * (1.0 - s);
      }
      break;
    }
    case Output::softmax: {
      // dlogits = p .* (upstream - <upstream, p>) per row.
      const Tensor2& p = cache.post.back();
      for (std::size_t i = 0; i < p.rows; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < p.cols; ++j) dot += dpre(i, j) * p(i, j);
        for (std::size_t j = 0; j < p.cols; ++j) {
          dpre(i, j) = p(i, j) * (dpre(i, j) - dot);
        }
      }
      break;
    }
  }
  return backward_impl(net, cache, dpre);
}

CeResult cross_entropy(const Tensor2& probs, const std::vector<int>& labels) {
  if (labels.size() != probs.rows) {
    throw ShapeError("cross_entropy: one label per row required");
  }
  const std::size_t n = probs.rows;
  CeResult res;
  res.dlogits = Tensor2(probs.rows, probs.cols);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= probs.cols) {
      throw std::out_of_range("cross_entropy: label index out of range");
    }
    res.loss -= std::log(std::max(probs(i, static_cast<std::size_t>(y)),
                                  kProbFloor));
    for (std::size_t j = 0; j < probs.cols; ++j) {
      const double target = j == static_cast<std::size_t>(y) ? 1.0 : 0.0;
      res.dlogits(i, j) = (probs(i, j) - target) / static_cast<double>(n);
    }
  }
  res.loss /= static_cast<double>(n);
  return res;
}

BceResult bce_with_logits(const Tensor2& logits,
                          const std::vector<double>& targets) {
  if (logits.cols != 1 || targets.size() != logits.rows) {
    throw ShapeError("bce_with_logits: logits must be (n,1) with n targets");
  }
  const std::size_t n = logits.rows;
  BceResult res;
  res.dlogits = Tensor2(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = logits(i, 0);
    const double t = targets[i];
    // log(1+exp(-|x|)) + max(x,0) - t*x is the stable softplus form.
    res.loss += std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0) - t * x;
    res.dlogits(i, 0) = (sigmoid(x) - t) / static_cast<double>(n);
  }
  res.loss /= static_cast<double>(n);
  return res;
}

std::size_t param_count(const Mlp& net) {
  std::size_t n = 0;
  for (const Layer& l : net.layers) n += l.w.size() + l.b.size();
  return n;
}

std::vector<double> flatten(const Mlp& net) {
  std::vector<double> flat;
  flat.reserve(param_count(net));
  for (const Layer& l : net.layers) {
    flat.insert(flat.end(), l.w.data.begin(), l.w.data.end());
    flat.insert(flat.end(), l.b.data.begin(), l.b.data.end());
  }
  return flat;
}

void unflatten(Mlp& net, std::span<const double> flat) {
  if (flat.size() != param_count(net)) {
    throw ShapeError("unflatten: size mismatch");
  }
  std::size_t off = 0;
  for (Layer& l : net.layers) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), l.w.size(),
                l.w.data.begin());
    off += l.w.size();
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), l.b.size(),
                l.b.data.begin());
    off += l.b.size();
  }
}

std::vector<double> flatten_grads(const Mlp& net, const Backprop& bp) {
  std::vector<double> flat;
  flat.reserve(param_count(net));
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    flat.insert(flat.end(), bp.dw[l].data.begin(), bp.dw[l].data.end());
    flat.insert(flat.end(), bp.db[l].data.begin(), bp.db[l].data.end());
  }
  return flat;
}

OptState make_opt(OptKind kind, double lr, std::size_t n_params) {
  OptState st;
  st.kind = kind;
  st.lr = lr;
  if (kind != OptKind::sgd) {
    st.m.assign(n_params, 0.0);
    st.v.assign(n_params, 0.0);
  }
  return st;
}

void opt_step(std::vector<double>& params, const std::vector<double>& grads,
              OptState& state) {
  if (params.size() != grads.size()) {
    throw ShapeError("opt_step: params/grads size mismatch");
  }
  state.step += 1;
  switch (state.kind) {
    case OptKind::sgd:
      for (std::size_t i = 0; i < params.size(); ++i) {
        params[i] -= state.lr * grads[i];
      }
      break;
    case OptKind::adam: {
      if (state.m.size() != params.size()) {
        throw ShapeError("opt_step: adam state size mismatch");
      }
      const double t = static_cast<double>(state.step);
      const double c1 = 1.0 - std::pow(state.beta1, t);
      const double c2 = 1.0 - std::pow(state.beta2, t);
      for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] =
            state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
      }
      break;
    }
    case OptKind::rmsprop: {
      if (state.v.size() != params.size()) {
        throw ShapeError("opt_step: rmsprop state size mismatch");
      }
      for (std::size_t i = 0; i < params.size(); ++i) {
        state.v[i] = state.rho * state.v[i] + (1.0 - state.rho) * grads[i] * grads[i];
        params[i] -= state.lr * grads[i] / (std::sqrt(state.v[i]) + state.eps);
      }
      break;
    }
  }
  for (double p : params) {
    if (!std::isfinite(p)) throw NumericError("non-finite parameter after opt_step");
  }
}

}  // namespace afed::nn
