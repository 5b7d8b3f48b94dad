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
#include <string>
#include <vector>

#include "afed/data.hpp"
#include "afed/nn.hpp"
#include "afed/rng.hpp"

namespace afed::models {

// Extractor plus the two classification heads. Both heads read the latent
// code the extractor emits and output 2-class distributions.
struct Classifier {
  nn::Mlp extractor;  // input -> latent
  nn::Mlp head_y;     // latent -> P(y)
  nn::Mlp head_a;     // latent -> P(a)
  std::size_t latent_dim() const { return extractor.out_dim(); }
};

// Conditional generator: [noise | one-hot(a)] -> latent.
struct CondGenerator {
  nn::Mlp net;
  std::size_t noise_dim = 0;
  std::size_t latent_dim() const { return net.out_dim(); }
};

// Conditional discriminator: [latent | one-hot(a)] -> (0,1). With
// conditional=false the one-hot slice is dropped and D scores the latent
// alone.
struct CondDiscriminator {
  nn::Mlp net;
  bool conditional = true;
};

struct ModelSpec {
  std::size_t input_dim = 2;
  std::size_t latent_dim = 64;
  std::size_t noise_dim = 32;
  std::size_t head_hidden = 32;
  std::vector<std::size_t> extractor_hidden = {64};
  std::size_t gan_hidden = 64;
  bool conditional_disc = true;
  // Activation on the latent code. The generator output uses the same one,
  // so real and generated latents share their support; sigmoid keeps the
  // latent distribution bounded, which stabilizes GAN training.
  nn::Output latent_activation = nn::Output::identity;
};

Classifier make_classifier(const ModelSpec& spec, Rng& rng);
CondGenerator make_generator(const ModelSpec& spec, Rng& rng);
CondDiscriminator make_discriminator(const ModelSpec& spec, Rng& rng);

Tensor2 features_of(const std::vector<data::Sample>& samples);
std::vector<int> labels_of(const std::vector<data::Sample>& samples);
std::vector<int> attrs_of(const std::vector<data::Sample>& samples);

// E(x): (n, input_dim) -> (n, latent_dim)
Tensor2 extract(const Classifier& c, const Tensor2& x);
// h^y(z), h^a(z): row-stochastic (n, 2)
Tensor2 predict_y(const Classifier& c, const Tensor2& z);
Tensor2 predict_a(const Classifier& c, const Tensor2& z);

// Generator input layout: noise first, one-hot attribute last. Kept in one
// place so the conditioning slice is the same everywhere.
Tensor2 generator_input(const Tensor2& noise, const std::vector<int>& attrs);
Tensor2 generate(const CondGenerator& g, const std::vector<int>& attrs,
                 Rng& rng);
// As above with caller-provided noise (tests, paired draws).
Tensor2 generate_from_noise(const CondGenerator& g, const Tensor2& noise,
                            const std::vector<int>& attrs);

// D(z, a) in (0,1), shape (n, 1).
Tensor2 discriminate(const CondDiscriminator& d, const Tensor2& z,
                     const std::vector<int>& attrs);
Tensor2 discriminator_input(const CondDiscriminator& d, const Tensor2& z,
                            const std::vector<int>& attrs);

// Versioned JSON checkpoint of all bundles. Parameter arrays use the flat
// layer-major, weight-then-bias order from afed::nn.
void save_checkpoint(const std::string& path, const Classifier& c,
                     const CondGenerator& g, const CondDiscriminator& d);
struct Checkpoint {
  Classifier classifier;
  CondGenerator generator;
  CondDiscriminator discriminator;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace afed::models
