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

#include "afed/models.hpp"

#include <cmath>
#include <cstdio>

#include "doctest.h"

using namespace afed;
using namespace afed::models;

namespace {

ModelSpec small_spec() {
  ModelSpec spec;
  spec.input_dim = 2;
  spec.latent_dim = 8;
  spec.noise_dim = 4;
  spec.head_hidden = 8;
  spec.extractor_hidden = {8};
  spec.gan_hidden = 8;
  return spec;
}

void zero_params(nn::Mlp& net) {
  std::vector<double> z(nn::param_count(net), 0.0);
  nn::unflatten(net, z);
}

}  // namespace

TEST_CASE("extract: zero-weight extractor maps to zero latents") {
  Rng rng(1);
  Classifier c = make_classifier(small_spec(), rng);
  zero_params(c.extractor);
  const Tensor2 z = extract(c, Tensor2(3, 2, 1.0));
  for (double v : z.data) CHECK(v == 0.0);
}

TEST_CASE("extract: shapes go input_dim -> latent_dim") {
  Rng rng(2);
  Classifier c = make_classifier(small_spec(), rng);
  const Tensor2 z = extract(c, Tensor2(5, 2, 0.3));
  CHECK(z.rows == 5);
  CHECK(z.cols == 8);
}

TEST_CASE("extract: deterministic for a fixed seed") {
  Rng rng_a(3), rng_b(3);
  Classifier a = make_classifier(small_spec(), rng_a);
  Classifier b = make_classifier(small_spec(), rng_b);
  Tensor2 x(4, 2, 0.7);
  CHECK(extract(a, x).data == extract(b, x).data);
}

TEST_CASE("predict heads: symmetric logits yield the uniform distribution") {
  Rng rng(4);
  Classifier c = make_classifier(small_spec(), rng);
  zero_params(c.head_y);
  zero_params(c.head_a);
  Tensor2 z(2, 8, 0.5);
  const Tensor2 py = predict_y(c, z);
  const Tensor2 pa = predict_a(c, z);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(py(i, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(pa(i, 1) == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("predict heads: batch row count preserved and rows stochastic") {
  Rng rng(5);
  Classifier c = make_classifier(small_spec(), rng);
  Tensor2 z(7, 8);
  for (double& v : z.data) v = rng.normal();
  const Tensor2 py = predict_y(c, z);
  CHECK(py.rows == 7);
  CHECK(py.cols == 2);
  for (std::size_t i = 0; i < py.rows; ++i) {
    CHECK(std::abs(py(i, 0) + py(i, 1) - 1.0) < 1e-6);
  }
}

TEST_CASE("predict_y: hand-computed single-layer head") {
  Rng rng(6);
  ModelSpec spec = small_spec();
  Classifier c = make_classifier(spec, rng);
  // Replace head_y with a 1-layer softmax head and hand-set weights.
  c.head_y = nn::make_mlp({8, 2}, nn::Hidden::relu, nn::Output::softmax, rng);
  zero_params(c.head_y);
  c.head_y.layers[0].w(1, 0) = 1.0;  // logit1 = z[0]
  Tensor2 z(1, 8);
  z(0, 0) = 2.0;
  const Tensor2 py = predict_y(c, z);
  const double expected = 1.0 / (1.0 + std::exp(-2.0));
  CHECK(py(0, 1) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("composition: predict_y(extract(x)) equals the composed model exactly") {
  Rng rng(7);
  Classifier c = make_classifier(small_spec(), rng);
  Tensor2 x(6, 2);
  for (double& v : x.data) v = rng.normal();
  const Tensor2 two_step = predict_y(c, extract(c, x));
  // Composed evaluation: extractor then head as one chain.
  const Tensor2 z = nn::forward(c.extractor, x);
  const Tensor2 composed = nn::forward(c.head_y, z);
  CHECK(two_step.data == composed.data);
}

TEST_CASE("generate: zero-weight generator emits zero latents") {
  Rng rng(8);
  CondGenerator g = make_generator(small_spec(), rng);
  zero_params(g.net);
  Rng noise_rng(1);
  const Tensor2 z = generate(g, {0, 1, 0}, noise_rng);
  CHECK(z.rows == 3);
  CHECK(z.cols == 8);
  for (double v : z.data) CHECK(v == 0.0);
}

TEST_CASE("generate: same seed and attrs reproduce; attrs must be binary") {
  Rng rng(9);
  CondGenerator g = make_generator(small_spec(), rng);
  Rng n1(5), n2(5);
  const Tensor2 a = generate(g, {0, 1, 1, 0, 1}, n1);
  const Tensor2 b = generate(g, {0, 1, 1, 0, 1}, n2);
  CHECK(a.data == b.data);
  Rng n3(5);
  CHECK_THROWS_AS(generate(g, {0, 2}, n3), std::invalid_argument);
}

TEST_CASE("generator input layout: flipping a changes only the one-hot slice") {
  Tensor2 noise(2, 4);
  for (std::size_t i = 0; i < noise.data.size(); ++i) {
    noise.data[i] = static_cast<double>(i);
  }
  const Tensor2 in0 = generator_input(noise, {0, 0});
  const Tensor2 in1 = generator_input(noise, {1, 1});
  CHECK(in0.cols == 6);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 4; ++j) CHECK(in0(i, j) == in1(i, j));
    CHECK(in0(i, 4) == 1.0);
    CHECK(in0(i, 5) == 0.0);
    CHECK(in1(i, 4) == 0.0);
    CHECK(in1(i, 5) == 1.0);
  }
}

TEST_CASE("discriminate: zero-weight discriminator outputs 0.5") {
  Rng rng(10);
  CondDiscriminator d = make_discriminator(small_spec(), rng);
  zero_params(d.net);
  const Tensor2 out = discriminate(d, Tensor2(4, 8, 0.2), {0, 1, 0, 1});
  CHECK(out.rows == 4);
  CHECK(out.cols == 1);
  for (double v : out.data) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("discriminate: outputs stay in (0,1); hand case") {
  Rng rng(11);
  CondDiscriminator d = make_discriminator(small_spec(), rng);
  Tensor2 z(9, 8);
  for (double& v : z.data) v = 2.0 * rng.normal();
  std::vector<int> attrs(9, 1);
  const Tensor2 out = discriminate(d, z, attrs);
  for (double v : out.data) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  // Hand case: single linear unit through the sigmoid.
  CondDiscriminator tiny;
  tiny.conditional = false;
  Rng r2(1);
  tiny.net = nn::make_mlp({2, 1}, nn::Hidden::leaky_relu, nn::Output::sigmoid, r2);
  zero_params(tiny.net);
  tiny.net.layers[0].w(0, 0) = 1.0;
  tiny.net.layers[0].w(0, 1) = -1.0;
  tiny.net.layers[0].b(0, 0) = 0.5;
  Tensor2 zin(1, 2);
  zin(0, 0) = 2.0;
  zin(0, 1) = 1.0;
  const double logit = 2.0 - 1.0 + 0.5;
  CHECK(discriminate(tiny, zin, {})(0, 0) ==
        doctest::Approx(1.0 / (1.0 + std::exp(-logit))).epsilon(1e-12));
}

TEST_CASE("unconditional discriminator ignores the attribute slice") {
  ModelSpec spec = small_spec();
  spec.conditional_disc = false;
  Rng rng(12);
  CondDiscriminator d = make_discriminator(spec, rng);
  CHECK(d.net.in_dim() == spec.latent_dim);
  Tensor2 z(3, 8, 0.1);
  const Tensor2 a = discriminate(d, z, {0, 0, 0});
  const Tensor2 b = discriminate(d, z, {1, 1, 1});
  CHECK(a.data == b.data);
}

TEST_CASE("checkpoint: save/load round-trips all bundles") {
  Rng rng(13);
  const ModelSpec spec = small_spec();
  Classifier c = make_classifier(spec, rng);
  CondGenerator g = make_generator(spec, rng);
  CondDiscriminator d = make_discriminator(spec, rng);
  const std::string path = "afed_ckpt_test.json";
  save_checkpoint(path, c, g, d);
  const Checkpoint ck = load_checkpoint(path);
  std::remove(path.c_str());
  CHECK(nn::flatten(ck.classifier.extractor) == nn::flatten(c.extractor));
  CHECK(nn::flatten(ck.classifier.head_y) == nn::flatten(c.head_y));
  CHECK(nn::flatten(ck.classifier.head_a) == nn::flatten(c.head_a));
  CHECK(nn::flatten(ck.generator.net) == nn::flatten(g.net));
  CHECK(ck.generator.noise_dim == g.noise_dim);
  CHECK(nn::flatten(ck.discriminator.net) == nn::flatten(d.net));
  CHECK(ck.discriminator.conditional == d.conditional);
  // Behaviour is preserved, not just bytes.
  Tensor2 x(3, 2, 0.4);
  CHECK(predict_y(ck.classifier, extract(ck.classifier, x)).data ==
        predict_y(c, extract(c, x)).data);
}
