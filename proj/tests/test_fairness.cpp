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

#include <cmath>

#include "afed/data.hpp"
#include "afed/models.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace afed;
using namespace afed::fairness;

namespace {

Tensor2 random_rows(std::size_t n, std::size_t d, Rng& rng, double scale = 1.0,
                    double shift = 0.0) {
  Tensor2 out(n, d);
  for (double& v : out.data) v = scale * rng.normal() + shift;
  return out;
}

MixBatch random_mix_batch(const nn::Mlp& head, std::size_t n, Rng& rng) {
  const std::size_t d = head.in_dim();
  Tensor2 z_t = random_rows(n, d, rng);
  Tensor2 z_f = random_rows(n, d, rng);
  std::vector<int> a_t(n), a_f(n);
  for (std::size_t i = 0; i < n; ++i) {
    a_t[i] = static_cast<int>(rng.below(2));
    a_f[i] = 1 - a_t[i];
  }
  return mix(z_t, a_t, z_f, a_f, 1.0, rng);
}

}  // namespace

TEST_CASE("dp_gap: constant predictor has zero gap") {
  const std::vector<double> preds(10, 1.0);
  const std::vector<int> attrs = {0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  const DpReport rep = dp_gap(preds, attrs);
  CHECK(rep.gap == 0.0);
  CHECK(rep.gamma0 == 1.0);
  CHECK(rep.gamma1 == 1.0);
}

TEST_CASE("dp_gap: predictor equal to the attribute has gap one") {
  std::vector<double> preds;
  std::vector<int> attrs;
  for (int i = 0; i < 8; ++i) {
    attrs.push_back(i % 2);
    preds.push_back(static_cast<double>(i % 2));
  }
  CHECK(dp_gap(preds, attrs).gap == doctest::Approx(1.0));
}

TEST_CASE("dp_gap: direct arithmetic example") {
  // group0 preds [1,1,0,1], group1 [0,1] -> |0.75 - 0.5| = 0.25
  const std::vector<double> preds = {1, 1, 0, 1, 0, 1};
  const std::vector<int> attrs = {0, 0, 0, 0, 1, 1};
  const DpReport rep = dp_gap(preds, attrs);
  CHECK(rep.gamma0 == doctest::Approx(0.75));
  CHECK(rep.gamma1 == doctest::Approx(0.5));
  CHECK(rep.gap == doctest::Approx(0.25));
  CHECK(rep.n0 == 4);
  CHECK(rep.n1 == 2);
}

TEST_CASE("dp_gap: empty group is an explicit error, never silent zero") {
  const std::vector<double> preds = {1.0, 0.0};
  CHECK_THROWS_AS(dp_gap(preds, {0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(dp_gap(preds, {1, 1}), std::invalid_argument);
}

TEST_CASE("dp_gap: symmetric under group relabeling") {
  Rng rng(17);
  std::vector<double> preds;
  std::vector<int> attrs, flipped;
  for (int i = 0; i < 50; ++i) {
    preds.push_back(rng.uniform());
    attrs.push_back(static_cast<int>(rng.below(2)));
    flipped.push_back(1 - attrs.back());
  }
  CHECK(dp_gap(preds, attrs).gap ==
        doctest::Approx(dp_gap(preds, flipped).gap).epsilon(1e-15));
}

TEST_CASE("dp_gap: hard labels and 0/1 probabilities agree") {
  const std::vector<double> probs = {1.0, 0.0, 1.0, 1.0, 0.0};
  const std::vector<int> attrs = {0, 0, 1, 1, 1};
  std::vector<double> hard;
  for (double p : probs) hard.push_back(p >= 0.5 ? 1.0 : 0.0);
  CHECK(dp_gap(probs, attrs).gap == dp_gap(hard, attrs).gap);
}

TEST_CASE("mix: endpoints and midpoint") {
  Tensor2 z_t(1, 1), z_f(1, 1);
  z_t(0, 0) = 2.0;
  z_f(0, 0) = 0.0;
  const std::vector<int> a_t = {0}, a_f = {1};
  CHECK(mix_with_t(z_t, a_t, z_f, a_f, {1.0}).z_bar(0, 0) == 2.0);
  CHECK(mix_with_t(z_t, a_t, z_f, a_f, {0.0}).z_bar(0, 0) == 0.0);
  const MixBatch mid = mix_with_t(z_t, a_t, z_f, a_f, {0.5});
  CHECK(mid.z_bar(0, 0) == doctest::Approx(1.0));
  CHECK(mid.a_bar[0] == doctest::Approx(0.5));
}

TEST_CASE("mix: coordinatewise betweenness for random draws") {
  Rng rng(23);
  Tensor2 z_t = random_rows(20, 5, rng);
  Tensor2 z_f = random_rows(20, 5, rng);
  std::vector<int> a_t(20, 0), a_f(20, 1);
  const MixBatch b = mix(z_t, a_t, z_f, a_f, 0.4, rng);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(b.t[i] >= 0.0);
    CHECK(b.t[i] <= 1.0);
    for (std::size_t j = 0; j < 5; ++j) {
      const double lo = std::min(z_t(i, j), z_f(i, j));
      const double hi = std::max(z_t(i, j), z_f(i, j));
      CHECK(b.z_bar(i, j) >= lo - 1e-12);
      CHECK(b.z_bar(i, j) <= hi + 1e-12);
    }
  }
}

TEST_CASE("mix: shape mismatch and bad alpha are rejected") {
  Rng rng(1);
  Tensor2 z_t(2, 3), z_f(2, 4);
  CHECK_THROWS_AS(mix(z_t, {0, 0}, z_f, {1, 1}, 1.0, rng), ShapeError);
  Tensor2 z_f2(2, 3);
  CHECK_THROWS_AS(mix(z_t, {0, 0}, z_f2, {1, 1}, 0.0, rng),
                  std::invalid_argument);
}

TEST_CASE("fairness_penalty: constant head gives exactly zero") {
  Rng rng(31);
  nn::Mlp head = nn::make_mlp({6, 8, 2}, nn::Hidden::relu, nn::Output::softmax, rng);
  std::vector<double> zeros(nn::param_count(head), 0.0);
  nn::unflatten(head, zeros);
  const MixBatch b = random_mix_batch(head, 12, rng);
  const PenaltyResult res =
      fairness_penalty(head, b, PenaltyMode::signed_mean);
  CHECK(res.value == 0.0);
}

TEST_CASE("fairness_penalty: linear score matches the closed form") {
  // Identity-output head: f(z) = (w1 - w0) . z + (b1 - b0), grad f == w.
  Rng rng(33);
  nn::Mlp head = nn::make_mlp({4, 2}, nn::Hidden::relu, nn::Output::identity, rng);
  const MixBatch b = random_mix_batch(head, 30, rng);
  const PenaltyResult res =
      fairness_penalty(head, b, PenaltyMode::signed_mean);
  std::vector<double> w(4);
  for (std::size_t j = 0; j < 4; ++j) {
    w[j] = head.layers[0].w(1, j) - head.layers[0].w(0, j);
  }
  double expected = 0.0;
  for (std::size_t i = 0; i < 30; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      expected += w[j] * (b.z_t(i, j) - b.z_f(i, j));
    }
  }
  expected /= 30.0;
  CHECK(res.value == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("fairness_penalty: coinciding endpoints give zero") {
  Rng rng(35);
  nn::Mlp head = nn::make_mlp({5, 7, 2}, nn::Hidden::relu, nn::Output::softmax, rng);
  Tensor2 z = random_rows(9, 5, rng);
  std::vector<int> a_t(9, 0), a_f(9, 1);
  const MixBatch b = mix(z, a_t, z, a_f, 1.0, rng);
  const PenaltyResult res = fairness_penalty(head, b, PenaltyMode::signed_mean);
  CHECK(res.value == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("fairness_penalty: head parameter gradient matches finite differences") {
  Rng rng(37);
  for (PenaltyMode mode :
       {PenaltyMode::signed_mean, PenaltyMode::abs_canonical}) {
    nn::Mlp head =
        nn::make_mlp({5, 9, 2}, nn::Hidden::leaky_relu, nn::Output::softmax, rng);
    const MixBatch b = random_mix_batch(head, 11, rng);
    const PenaltyResult res = fairness_penalty(head, b, mode);
    const std::vector<double> analytic =
        nn::flatten_grads(head, res.head_grads);
    nn::Mlp probe = head;
    auto value_at = [&](const std::vector<double>& theta) {
      nn::unflatten(probe, theta);
      return fairness_penalty(probe, b, mode).value;
    };
    const std::vector<double> fd =
        testing::central_difference(value_at, nn::flatten(head), 1e-5);
    CHECK(testing::rel_error(analytic, fd) < 1e-4);
  }
}

TEST_CASE("fairness_penalty: z_t gradient matches finite differences") {
  Rng rng(39);
  nn::Mlp head = nn::make_mlp({4, 8, 2}, nn::Hidden::relu, nn::Output::softmax, rng);
  Tensor2 z_t = random_rows(6, 4, rng);
  Tensor2 z_f = random_rows(6, 4, rng);
  std::vector<int> a_t(6), a_f(6);
  for (std::size_t i = 0; i < 6; ++i) {
    a_t[i] = static_cast<int>(rng.below(2));
    a_f[i] = 1 - a_t[i];
  }
  std::vector<double> t(6);
  for (double& v : t) v = rng.uniform();

  const MixBatch b = mix_with_t(z_t, a_t, z_f, a_f, t);
  const PenaltyResult res = fairness_penalty(head, b, PenaltyMode::signed_mean);

  // Finite differences through z_t; the mix is rebuilt per evaluation since
  // z_t feeds both the mixed point and the direction.
  std::vector<double> flat_zt = z_t.data;
  auto value_at = [&](const std::vector<double>& flat) {
    Tensor2 zt2 = z_t;
    zt2.data = flat;
    return fairness_penalty(head, mix_with_t(zt2, a_t, z_f, a_f, t),
                            PenaltyMode::signed_mean)
        .value;
  };
  const std::vector<double> fd =
      testing::central_difference(value_at, flat_zt, 1e-5);
  CHECK(testing::rel_error(res.dz_t.data, fd) < 1e-4);
}

TEST_CASE("fairness_penalty: signed mean cancels on complementary pairs, "
          "canonical mode recovers the gap") {
  // With half the batch paired a=0 -> a=1 and half a=1 -> a=0 on the same
  // two clusters, the signed directional derivatives cancel while the
  // canonicalized mean sees the full group gap.
  Rng rng(41);
  nn::Mlp head = nn::make_mlp({2, 2}, nn::Hidden::relu, nn::Output::identity, rng);
  head.layers[0].w(0, 0) = 0.0;
  head.layers[0].w(0, 1) = 0.0;
  head.layers[0].w(1, 0) = 1.0;  // f(z) = z[0]
  head.layers[0].w(1, 1) = 0.0;
  head.layers[0].b = Tensor2(1, 2);
  const std::size_t n = 40;
  Tensor2 z_t(n, 2), z_f(n, 2);
  std::vector<int> a_t(n), a_f(n);
  std::vector<double> t(n, 0.5);
  for (std::size_t i = 0; i < n; ++i) {
    const bool first_half = i < n / 2;
    a_t[i] = first_half ? 0 : 1;
    a_f[i] = 1 - a_t[i];
    // Group 0 sits at z[0]=1, group 1 at z[0]=-1.
    z_t(i, 0) = a_t[i] == 0 ? 1.0 : -1.0;
    z_f(i, 0) = a_f[i] == 0 ? 1.0 : -1.0;
  }
  const MixBatch b = mix_with_t(z_t, a_t, z_f, a_f, t);
  const double signed_val =
      fairness_penalty(head, b, PenaltyMode::signed_mean).value;
  const double abs_val =
      fairness_penalty(head, b, PenaltyMode::abs_canonical).value;
  CHECK(std::abs(signed_val) < 1e-12);      // directions cancel
  CHECK(abs_val == doctest::Approx(2.0));   // |E f(group0) - E f(group1)|
}

TEST_CASE("dp_integral_check: linear model is exact") {
  Rng rng(43);
  nn::Mlp head = nn::make_mlp({3, 2}, nn::Hidden::relu, nn::Output::identity, rng);
  Tensor2 g0 = random_rows(40, 3, rng, 1.0, 0.5);
  Tensor2 g1 = random_rows(40, 3, rng, 1.0, -0.5);
  const IntegralCheck res = dp_integral_check(head, g0, g1, 64);
  CHECK(std::abs(res.dp - res.integral) < 1e-9);
}

TEST_CASE("dp_integral_check: constant model gives zero on both routes") {
  Rng rng(45);
  nn::Mlp head = nn::make_mlp({3, 4, 2}, nn::Hidden::relu, nn::Output::softmax, rng);
  std::vector<double> zeros(nn::param_count(head), 0.0);
  nn::unflatten(head, zeros);
  Tensor2 g0 = random_rows(15, 3, rng);
  Tensor2 g1 = random_rows(15, 3, rng);
  const IntegralCheck res = dp_integral_check(head, g0, g1, 64);
  CHECK(res.dp == 0.0);
  CHECK(res.integral == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("dp_integral_check: random MLP agrees within quadrature tolerance") {
  Rng rng(47);
  nn::Mlp head = nn::make_mlp({4, 16, 2}, nn::Hidden::relu, nn::Output::softmax, rng);
  Tensor2 g0 = random_rows(100, 4, rng, 1.0, 1.0);
  Tensor2 g1 = random_rows(100, 4, rng, 1.0, -1.0);
  const IntegralCheck res = dp_integral_check(head, g0, g1, 256);
  CHECK(std::abs(res.dp - res.integral) <= 1e-2);
}

TEST_CASE("dp_integral_check: unequal group sizes use all pairs") {
  Rng rng(49);
  nn::Mlp head = nn::make_mlp({2, 8, 2}, nn::Hidden::relu, nn::Output::softmax, rng);
  Tensor2 g0 = random_rows(13, 2, rng, 1.0, 0.8);
  Tensor2 g1 = random_rows(29, 2, rng, 1.0, -0.8);
  const IntegralCheck res = dp_integral_check(head, g0, g1, 128);
  CHECK(std::abs(res.dp - res.integral) <= 1e-2);
}

TEST_CASE("dp_integral_check: grid below 64 is rejected") {
  Rng rng(51);
  nn::Mlp head = nn::make_mlp({2, 2}, nn::Hidden::relu, nn::Output::identity, rng);
  Tensor2 g(4, 2, 0.1);
  CHECK_THROWS_AS(dp_integral_check(head, g, g, 32), std::invalid_argument);
}

TEST_CASE("h_div_proxy: same distribution scores low, disjoint scores high") {
  Rng rng(53);
  const ProbeSpec probe;
  Tensor2 a = random_rows(300, 2, rng);
  Tensor2 b = random_rows(300, 2, rng);  // fresh draw, same distribution
  CHECK(h_div_proxy(a, b, probe, 7) <= 0.2);
  Tensor2 c = random_rows(300, 2, rng, 1.0, 12.0);  // far-away cloud
  CHECK(h_div_proxy(a, c, probe, 7) >= 1.8);
}

TEST_CASE("h_div_proxy: verbatim duplicates are indistinguishable") {
  Rng rng(55);
  Tensor2 a = random_rows(200, 3, rng);
  const double est = h_div_proxy(a, a, ProbeSpec{}, 11);
  CHECK(est <= 0.1);
}

TEST_CASE("h_div_proxy: invalid probe capacity is rejected") {
  Rng rng(57);
  Tensor2 a = random_rows(50, 2, rng);
  ProbeSpec bad;
  bad.steps = 0;
  CHECK_THROWS_AS(h_div_proxy(a, a, bad, 1), std::invalid_argument);
}

TEST_CASE("h_div_proxy: non-increasing in the augmentation ratio") {
  // Mixing generated/global samples into a skewed client shard moves it
  // toward the global distribution; the proxy must not increase (one small
  // inversion tolerated).
  Rng rng(59);
  const std::size_t n = 400;
  // Client shard: concentrated cluster. Global: four spread clusters.
  auto draw_global = [&](std::size_t count) {
    Tensor2 out(count, 2);
    for (std::size_t i = 0; i < count; ++i) {
      const double cx = rng.below(2) == 0 ? -2.0 : 2.0;
      const double cy = rng.below(2) == 0 ? -2.0 : 2.0;
      out(i, 0) = cx + 0.7 * rng.normal();
      out(i, 1) = cy + 0.7 * rng.normal();
    }
    return out;
  };
  Tensor2 global = draw_global(n);
  std::vector<double> curve;
  for (double alpha : {0.0, 0.25, 0.5, 0.75}) {
    Tensor2 shard(n, 2);
    const auto n_aug = static_cast<std::size_t>(alpha * static_cast<double>(n));
    Tensor2 aug = draw_global(n_aug == 0 ? 1 : n_aug);
    for (std::size_t i = 0; i < n; ++i) {
      if (i < n_aug) {
        shard(i, 0) = aug(i, 0);
        shard(i, 1) = aug(i, 1);
      } else {
        shard(i, 0) = -2.0 + 0.7 * rng.normal();
        shard(i, 1) = -2.0 + 0.7 * rng.normal();
      }
    }
    curve.push_back(h_div_proxy(shard, global, ProbeSpec{}, 13));
  }
  int inversions = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
    if (curve[i + 1] > curve[i]) {
      ++inversions;
      worst = std::max(worst, curve[i + 1] - curve[i]);
    }
  }
  CHECK(inversions <= 1);
  if (inversions == 1) CHECK(worst <= 0.05);
}

TEST_CASE("classifier_two_sample: AUC near 0.5 for identical, near 1 for split") {
  Rng rng(61);
  Tensor2 a = random_rows(240, 2, rng);
  Tensor2 b = random_rows(240, 2, rng);
  const TwoSampleResult same = classifier_two_sample(a, b, ProbeSpec{}, 3);
  CHECK(same.auc > 0.35);
  CHECK(same.auc < 0.65);
  Tensor2 c = random_rows(240, 2, rng, 1.0, 10.0);
  const TwoSampleResult split = classifier_two_sample(a, c, ProbeSpec{}, 3);
  CHECK(split.auc > 0.95);
}
