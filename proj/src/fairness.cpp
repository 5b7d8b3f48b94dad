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

#include "afed/fairness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace afed::fairness {

DpReport dp_gap(const std::vector<double>& preds,
                const std::vector<int>& attrs) {
  if (preds.size() != attrs.size()) {
    throw ShapeError("dp_gap: one attribute per prediction required");
  }
  DpReport rep;
  double sum0 = 0.0, sum1 = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (attrs[i] == 0) {
      sum0 += preds[i];
      rep.n0 += 1;
    } else if (attrs[i] == 1) {
      sum1 += preds[i];
      rep.n1 += 1;
    } else {
      throw std::invalid_argument("dp_gap: attribute must be 0 or 1");
    }
  }
  if (rep.n0 == 0 || rep.n1 == 0) {
    throw std::invalid_argument("dp_gap: a sensitive group is empty");
  }
  rep.gamma0 = sum0 / static_cast<double>(rep.n0);
  rep.gamma1 = sum1 / static_cast<double>(rep.n1);
  rep.gap = std::abs(rep.gamma0 - rep.gamma1);
  return rep;
}

MixBatch mix_with_t(const Tensor2& z_t, const std::vector<int>& a_t,
                    const Tensor2& z_f, const std::vector<int>& a_f,
                    std::vector<double> t) {
  if (!z_t.same_shape(z_f)) throw ShapeError("mix: latent shapes differ");
  if (a_t.size() != z_t.rows || a_f.size() != z_t.rows ||
      t.size() != z_t.rows) {
    throw ShapeError("mix: row counts differ");
  }
  MixBatch b;
  b.z_t = z_t;
  b.z_f = z_f;
  b.a_t = a_t;
  b.a_f = a_f;
  b.t = std::move(t);
  b.z_bar = Tensor2(z_t.rows, z_t.cols);
  b.a_bar.resize(z_t.rows);
  for (std::size_t i = 0; i < z_t.rows; ++i) {
    const double ti = b.t[i];
    if (!(ti >= 0.0 && ti <= 1.0)) {
      throw std::invalid_argument("mix: coefficient outside [0,1]");
    }
    for (std::size_t j = 0; j < z_t.cols; ++j) {
      b.z_bar(i, j) = ti * z_t(i, j) + (1.0 - ti) * z_f(i, j);
    }
    b.a_bar[i] = ti * a_t[i] + (1.0 - ti) * a_f[i];
  }
  return b;
}

MixBatch mix(const Tensor2& z_t, const std::vector<int>& a_t,
             const Tensor2& z_f, const std::vector<int>& a_f, double alpha,
             Rng& rng) {
  if (!(alpha > 0.0)) throw std::invalid_argument("mix: alpha must be > 0");
  std::vector<double> t(z_t.rows);
  for (double& v : t) v = rng.beta(alpha, alpha);
  return mix_with_t(z_t, a_t, z_f, a_f, std::move(t));
}

namespace {

// How a head's logits map to the scalar score.
enum class ScoreKind { sigmoid_diff, raw_diff, sigmoid_single, raw_single };

ScoreKind score_kind(const nn::Mlp& head) {
  if (head.out_dim() == 2) {
    if (head.output == nn::Output::softmax) return ScoreKind::sigmoid_diff;
    if (head.output == nn::Output::identity) return ScoreKind::raw_diff;
  } else if (head.out_dim() == 1) {
    if (head.output == nn::Output::sigmoid) return ScoreKind::sigmoid_single;
    if (head.output == nn::Output::identity) return ScoreKind::raw_single;
  }
  throw ShapeError("score: head must have 1 or 2 outputs");
}

bool score_is_sigmoid(ScoreKind k) {
  return k == ScoreKind::sigmoid_diff || k == ScoreKind::sigmoid_single;
}

double hidden_grad(const nn::Mlp& net, double pre) {
  if (net.hidden == nn::Hidden::relu) return pre > 0.0 ? 1.0 : 0.0;
  return pre > 0.0 ? 1.0 : net.leaky_slope;
}

// Forward pass carrying a directional tangent alongside each value. The last
// layer is left at raw logits.
struct DualCache {
  Tensor2 input, input_dot;
  std::vector<Tensor2> pre, pre_dot;    // per layer
  std::vector<Tensor2> post, post_dot;  // hidden activations; last == pre
};

DualCache dual_forward(const nn::Mlp& net, const Tensor2& z,
                       const Tensor2& dir) {
  if (!z.same_shape(dir)) throw ShapeError("dual_forward: shapes differ");
  DualCache c;
  c.input = z;
  c.input_dot = dir;
  const std::size_t n_layers = net.layers.size();
  const Tensor2* v = &c.input;
  const Tensor2* vd = &c.input_dot;
  for (std::size_t l = 0; l < n_layers; ++l) {
    Tensor2 u = matmul_nt(*v, net.layers[l].w);
    add_row_inplace(u, net.layers[l].b);
    Tensor2 ud = matmul_nt(*vd, net.layers[l].w);
    if (l + 1 == n_layers) {
      c.pre.push_back(std::move(u));
      c.pre_dot.push_back(std::move(ud));
      c.post.push_back(c.pre.back());
      c.post_dot.push_back(c.pre_dot.back());
    } else {
      Tensor2 a = u;
      Tensor2 ad = ud;
      // g*u is the activation value for both relu and leaky_relu.
      for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double g = hidden_grad(net, u.data[i]);
        a.data[i] = g * u.data[i];
        ad.data[i] = g * ud.data[i];
      }
      c.pre.push_back(std::move(u));
      c.pre_dot.push_back(std::move(ud));
      c.post.push_back(std::move(a));
      c.post_dot.push_back(std::move(ad));
    }
    v = &c.post[l];
    vd = &c.post_dot[l];
  }
  return c;
}

// Adjoint pass over the dual graph: given dLoss/dlogits and
// dLoss/dlogits_dot, accumulates parameter gradients and the gradients
// w.r.t. the input value and input tangent. The hidden-activation
// second-derivative term is identically zero for (leaky) relu and is
// omitted.
struct DualBackward {
  nn::Backprop grads;  // dinput = dLoss/d z
  Tensor2 dinput_dot;  // dLoss/d dir
};

DualBackward dual_backward(const nn::Mlp& net, const DualCache& c,
                           const Tensor2& dlogits,
                           const Tensor2& dlogits_dot) {
  const std::size_t n_layers = net.layers.size();
  DualBackward out;
  out.grads.dw.resize(n_layers);
  out.grads.db.resize(n_layers);
  Tensor2 au = dlogits;      // adjoint of pre-activation value
  Tensor2 aud = dlogits_dot; // adjoint of pre-activation tangent
  for (std::size_t l = n_layers; l-- > 0;) {
    const Tensor2& v_prev = l == 0 ? c.input : c.post[l - 1];
    const Tensor2& vd_prev = l == 0 ? c.input_dot : c.post_dot[l - 1];
    out.grads.dw[l] = add(matmul_tn(au, v_prev), matmul_tn(aud, vd_prev));
    out.grads.db[l] = colsum(au);
    Tensor2 av = matmul(au, net.layers[l].w);
    Tensor2 avd = matmul(aud, net.layers[l].w);
    if (l == 0) {
      out.grads.dinput = std::move(av);
      out.dinput_dot = std::move(avd);
    } else {
      const Tensor2& pre_prev = c.pre[l - 1];
      for (std::size_t i = 0; i < av.data.size(); ++i) {
        const double g = hidden_grad(net, pre_prev.data[i]);
        av.data[i] *= g;
        avd.data[i] *= g;
      }
      au = std::move(av);
      aud = std::move(avd);
    }
  }
  return out;
}

// Collapses 2-logit rows to the scalar logit difference l1 - l0; 1-logit
// rows pass through.
void logit_diff(const Tensor2& logits, std::vector<double>& out) {
  out.resize(logits.rows);
  if (logits.cols == 2) {
    for (std::size_t i = 0; i < logits.rows; ++i) {
      out[i] = logits(i, 1) - logits(i, 0);
    }
  } else {
    for (std::size_t i = 0; i < logits.rows; ++i) out[i] = logits(i, 0);
  }
}

}  // namespace

std::vector<double> score_rows(const nn::Mlp& head, const Tensor2& z) {
  const ScoreKind kind = score_kind(head);
  // Forward the affine part only; score applies its own nonlinearity.
  nn::Mlp raw = head;
  raw.output = nn::Output::identity;
  const Tensor2 logits = nn::forward(raw, z);
  std::vector<double> s;
  logit_diff(logits, s);
  if (score_is_sigmoid(kind)) {
    for (double& v : s) v = nn::sigmoid(v);
  }
  return s;
}

PenaltyResult fairness_penalty(const nn::Mlp& head, const MixBatch& batch,
                               PenaltyMode mode) {
  const ScoreKind kind = score_kind(head);
  const std::size_t n = batch.z_bar.rows;
  if (n == 0) {
    PenaltyResult empty;
    empty.dz_t = Tensor2(0, batch.z_bar.cols);
    return empty;
  }
  const Tensor2 dir = sub(batch.z_t, batch.z_f);
  const DualCache cache = dual_forward(head, batch.z_bar, dir);

  std::vector<double> dl, dl_dot;
  logit_diff(cache.pre.back(), dl);
  logit_diff(cache.pre_dot.back(), dl_dot);

  // Per-row directional derivative of the score.
  std::vector<double> jvp(n), sig(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (score_is_sigmoid(kind)) {
      sig[i] = nn::sigmoid(dl[i]);
      jvp[i] = sig[i] * (1.0 - sig[i]) * dl_dot[i];
    } else {
      jvp[i] = dl_dot[i];
    }
  }

  // Row weights: plain mean, or canonicalized to the group0 - group1
  // direction with the absolute value taken of the mean.
  std::vector<double> row_sign(n, 1.0);
  if (mode == PenaltyMode::abs_canonical) {
    for (std::size_t i = 0; i < n; ++i) {
      row_sign[i] = batch.a_t[i] == 0 ? 1.0 : -1.0;
    }
  }
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += row_sign[i] * jvp[i];
  mean /= static_cast<double>(n);

  PenaltyResult res;
  double outer = 1.0;  // d value / d mean
  if (mode == PenaltyMode::abs_canonical) {
    res.value = std::abs(mean);
    outer = mean > 0.0 ? 1.0 : (mean < 0.0 ? -1.0 : 0.0);
  } else {
    res.value = mean;
  }

  // Adjoints of the scalar-logit value and tangent per row.
  Tensor2 dlogits(cache.pre.back().rows, cache.pre.back().cols);
  Tensor2 dlogits_dot(dlogits.rows, dlogits.cols);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = outer * row_sign[i] / static_cast<double>(n);
    double a_dl = 0.0;
    double a_dld;
    if (score_is_sigmoid(kind)) {
      const double sp = sig[i] * (1.0 - sig[i]);
      a_dld = w * sp;
      a_dl = w * sp * (1.0 - 2.0 * sig[i]) * dl_dot[i];
    } else {
      a_dld = w;
    }
    if (dlogits.cols == 2) {
      dlogits(i, 1) = a_dl;
      dlogits(i, 0) = -a_dl;
      dlogits_dot(i, 1) = a_dld;
      dlogits_dot(i, 0) = -a_dld;
    } else {
      dlogits(i, 0) = a_dl;
      dlogits_dot(i, 0) = a_dld;
    }
  }

  DualBackward back = dual_backward(head, cache, dlogits, dlogits_dot);

  // z_t enters twice: through z_bar (scaled by t) and through the direction.
  res.dz_t = Tensor2(n, batch.z_t.cols);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < batch.z_t.cols; ++j) {
      res.dz_t(i, j) =
          batch.t[i] * back.grads.dinput(i, j) + back.dinput_dot(i, j);
    }
  }
  res.head_grads = std::move(back.grads);
  res.head_grads.dinput = Tensor2();  // dz_t carries the input path
  return res;
}

IntegralCheck dp_integral_check(const nn::Mlp& head, const Tensor2& group0,
                                const Tensor2& group1, std::size_t grid) {
  if (grid < 64) throw std::invalid_argument("dp_integral_check: grid < 64");
  if (group0.cols != group1.cols) {
    throw ShapeError("dp_integral_check: dimension mismatch");
  }
  if (group0.rows == 0 || group1.rows == 0) {
    throw std::invalid_argument("dp_integral_check: empty group");
  }

  IntegralCheck out;
  {
    const std::vector<double> s0 = score_rows(head, group0);
    const std::vector<double> s1 = score_rows(head, group1);
    const double m0 = std::accumulate(s0.begin(), s0.end(), 0.0) /
                      static_cast<double>(s0.size());
    const double m1 = std::accumulate(s1.begin(), s1.end(), 0.0) /
                      static_cast<double>(s1.size());
    out.dp = std::abs(m0 - m1);
  }

  // Pair rows; equal sizes pair 1:1, otherwise all pairs.
  Tensor2 z0p, z1p;
  if (group0.rows == group1.rows) {
    z0p = group0;
    z1p = group1;
  } else {
    const std::size_t pairs = group0.rows * group1.rows;
    if (pairs > 4'000'000) {
      throw std::invalid_argument("dp_integral_check: group product too large");
    }
    z0p = Tensor2(pairs, group0.cols);
    z1p = Tensor2(pairs, group0.cols);
    std::size_t r = 0;
    for (std::size_t i = 0; i < group0.rows; ++i) {
      for (std::size_t j = 0; j < group1.rows; ++j, ++r) {
        for (std::size_t cidx = 0; cidx < group0.cols; ++cidx) {
          z0p(r, cidx) = group0(i, cidx);
          z1p(r, cidx) = group1(j, cidx);
        }
      }
    }
  }
  const Tensor2 dir = sub(z0p, z1p);
  const ScoreKind kind = score_kind(head);

  // g(t) = mean_i <grad f(z_bar_i(t)), z0_i - z1_i>, integrated by the
  // trapezoid rule over the grid.
  std::vector<double> g(grid);
  Tensor2 zbar(z0p.rows, z0p.cols);
  for (std::size_t gi = 0; gi < grid; ++gi) {
    const double t = static_cast<double>(gi) / static_cast<double>(grid - 1);
    for (std::size_t i = 0; i < zbar.data.size(); ++i) {
      zbar.data[i] = t * z0p.data[i] + (1.0 - t) * z1p.data[i];
    }
    const DualCache cache = dual_forward(head, zbar, dir);
    std::vector<double> dl, dl_dot;
    logit_diff(cache.pre.back(), dl);
    logit_diff(cache.pre_dot.back(), dl_dot);
    double acc = 0.0;
    for (std::size_t i = 0; i < dl.size(); ++i) {
      if (score_is_sigmoid(kind)) {
        const double s = nn::sigmoid(dl[i]);
        acc += s * (1.0 - s) * dl_dot[i];
      } else {
        acc += dl_dot[i];
      }
    }
    g[gi] = acc / static_cast<double>(dl.size());
  }
  double integral = 0.0;
  const double h = 1.0 / static_cast<double>(grid - 1);
  for (std::size_t gi = 0; gi + 1 < grid; ++gi) {
    integral += 0.5 * h * (g[gi] + g[gi + 1]);
  }
  out.integral = std::abs(integral);
  return out;
}

namespace {

double roc_auc(const std::vector<double>& neg, const std::vector<double>& pos) {
  // Mann-Whitney statistic with midranks for ties.
  struct Entry {
    double score;
    int label;
  };
  std::vector<Entry> all;
  all.reserve(neg.size() + pos.size());
  for (double s : neg) all.push_back({s, 0});
  for (double s : pos) all.push_back({s, 1});
  std::stable_sort(all.begin(), all.end(),
                   [](const Entry& a, const Entry& b) { return a.score < b.score; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].label == 1) rank_sum_pos += midrank;
    }
    i = j;
  }
  const double np = static_cast<double>(pos.size());
  const double nn_ = static_cast<double>(neg.size());
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn_);
}

Tensor2 take_rows(const Tensor2& src, const std::vector<std::size_t>& idx) {
  Tensor2 out(idx.size(), src.cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (std::size_t j = 0; j < src.cols; ++j) out(i, j) = src(idx[i], j);
  }
  return out;
}

}  // namespace

TwoSampleResult classifier_two_sample(const Tensor2& a, const Tensor2& b,
                                      const ProbeSpec& probe,
                                      std::uint64_t seed) {
  if (probe.width == 0 || probe.depth < 1 || probe.steps < 1) {
    throw std::invalid_argument("two_sample: invalid probe capacity");
  }
  if (a.rows < 4 || b.rows < 4) {
    throw std::invalid_argument("two_sample: need at least 4 rows per side");
  }
  if (a.cols != b.cols) throw ShapeError("two_sample: dimension mismatch");

  Rng rng(substream(seed, 0x2501u));
  auto split_side = [&](const Tensor2& side, std::vector<std::size_t>& train,
                        std::vector<std::size_t>& test) {
    std::vector<std::size_t> idx(side.rows);
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    const std::size_t half = side.rows / 2;
    train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(half));
    test.assign(idx.begin() + static_cast<std::ptrdiff_t>(half), idx.end());
  };
  std::vector<std::size_t> tr_a, te_a, tr_b, te_b;
  split_side(a, tr_a, te_a);
  split_side(b, tr_b, te_b);
  // Balance the training sides so plain cross-entropy sees equal priors.
  const std::size_t m = std::min(tr_a.size(), tr_b.size());
  tr_a.resize(m);
  tr_b.resize(m);

  Tensor2 train(2 * m, a.cols);
  std::vector<int> labels(2 * m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) train(i, j) = a(tr_a[i], j);
    labels[i] = 0;
    for (std::size_t j = 0; j < a.cols; ++j) train(m + i, j) = b(tr_b[i], j);
    labels[m + i] = 1;
  }

  std::vector<std::size_t> widths{a.cols};
  for (int d = 0; d < probe.depth; ++d) widths.push_back(probe.width);
  widths.push_back(2);
  nn::Mlp net =
      nn::make_mlp(widths, nn::Hidden::relu, nn::Output::softmax, rng);
  nn::OptState opt = nn::make_opt(nn::OptKind::adam, probe.lr,
                                  nn::param_count(net));
  std::vector<double> params = nn::flatten(net);
  for (int step = 0; step < probe.steps; ++step) {
    const nn::ForwardCache cache = nn::forward_cache(net, train);
    const nn::CeResult ce = nn::cross_entropy(cache.output(), labels);
    const nn::Backprop bp = nn::backward_from_logits(net, cache, ce.dlogits);
    const std::vector<double> grads = nn::flatten_grads(net, bp);
    nn::opt_step(params, grads, opt);
    nn::unflatten(net, params);
  }

  const Tensor2 ha = nn::forward(net, take_rows(a, te_a));
  const Tensor2 hb = nn::forward(net, take_rows(b, te_b));
  std::size_t correct_a = 0, correct_b = 0;
  std::vector<double> score_a(ha.rows), score_b(hb.rows);
  for (std::size_t i = 0; i < ha.rows; ++i) {
    score_a[i] = ha(i, 1);
    if (ha(i, 1) < 0.5) ++correct_a;
  }
  for (std::size_t i = 0; i < hb.rows; ++i) {
    score_b[i] = hb(i, 1);
    if (hb(i, 1) >= 0.5) ++correct_b;
  }
  TwoSampleResult res;
  res.balanced_acc =
      0.5 * (static_cast<double>(correct_a) / static_cast<double>(ha.rows) +
             static_cast<double>(correct_b) / static_cast<double>(hb.rows));
  res.auc = roc_auc(score_a, score_b);
  return res;
}

double h_div_proxy(const Tensor2& a, const Tensor2& b, const ProbeSpec& probe,
                   std::uint64_t seed) {
  const TwoSampleResult r = classifier_two_sample(a, b, probe, seed);
  const double est = 2.0 * (2.0 * r.balanced_acc - 1.0);
  return std::clamp(est, 0.0, 2.0);
}

}  // namespace afed::fairness
