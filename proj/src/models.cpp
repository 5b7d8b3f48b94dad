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

#include <fstream>

#include "json.hpp"

namespace afed::models {

namespace {

constexpr int kCheckpointVersion = 1;

void check_attrs(const std::vector<int>& attrs) {
  for (int a : attrs) {
    if (a != 0 && a != 1) {
      throw std::invalid_argument("sensitive attribute must be 0 or 1");
    }
  }
}

}  // namespace

Classifier make_classifier(const ModelSpec& spec, Rng& rng) {
  Classifier c;
  std::vector<std::size_t> ew{spec.input_dim};
  ew.insert(ew.end(), spec.extractor_hidden.begin(), spec.extractor_hidden.end());
  ew.push_back(spec.latent_dim);
  c.extractor = nn::make_mlp(ew, nn::Hidden::relu, nn::Output::identity, rng);
  c.head_y = nn::make_mlp({spec.latent_dim, spec.head_hidden, 2},
                          nn::Hidden::relu, nn::Output::softmax, rng);
  c.head_a = nn::make_mlp({spec.latent_dim, spec.head_hidden, 2},
                          nn::Hidden::relu, nn::Output::softmax, rng);
  return c;
}

CondGenerator make_generator(const ModelSpec& spec, Rng& rng) {
  CondGenerator g;
  g.noise_dim = spec.noise_dim;
  g.net = nn::make_mlp({spec.noise_dim + 2, spec.gan_hidden, spec.latent_dim},
                       nn::Hidden::relu, nn::Output::identity, rng);
  return g;
}

CondDiscriminator make_discriminator(const ModelSpec& spec, Rng& rng) {
  CondDiscriminator d;
  d.conditional = spec.conditional_disc;
  const std::size_t in = spec.latent_dim + (spec.conditional_disc ? 2 : 0);
  d.net = nn::make_mlp({in, spec.gan_hidden, 1}, nn::Hidden::leaky_relu,
                       nn::Output::sigmoid, rng);
  return d;
}

Tensor2 features_of(const std::vector<data::Sample>& samples) {
  if (samples.empty()) throw std::invalid_argument("features_of: empty batch");
  Tensor2 x(samples.size(), samples[0].x.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].x.size() != x.cols) {
      throw ShapeError("features_of: ragged feature vectors");
    }
    for (std::size_t j = 0; j < x.cols; ++j) x(i, j) = samples[i].x[j];
  }
  return x;
}

std::vector<int> labels_of(const std::vector<data::Sample>& samples) {
  std::vector<int> y(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) y[i] = samples[i].y;
  return y;
}

std::vector<int> attrs_of(const std::vector<data::Sample>& samples) {
  std::vector<int> a(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) a[i] = samples[i].a;
  return a;
}

Tensor2 extract(const Classifier& c, const Tensor2& x) {
  return nn::forward(c.extractor, x);
}

Tensor2 predict_y(const Classifier& c, const Tensor2& z) {
  return nn::forward(c.head_y, z);
}

Tensor2 predict_a(const Classifier& c, const Tensor2& z) {
  return nn::forward(c.head_a, z);
}

Tensor2 generator_input(const Tensor2& noise, const std::vector<int>& attrs) {
  if (attrs.size() != noise.rows) {
    throw ShapeError("generator_input: one attribute per noise row required");
  }
  check_attrs(attrs);
  Tensor2 in(noise.rows, noise.cols + 2);
  for (std::size_t i = 0; i < noise.rows; ++i) {
    for (std::size_t j = 0; j < noise.cols; ++j) in(i, j) = noise(i, j);
    in(i, noise.cols + static_cast<std::size_t>(attrs[i])) = 1.0;
  }
  return in;
}

Tensor2 generate_from_noise(const CondGenerator& g, const Tensor2& noise,
                            const std::vector<int>& attrs) {
  if (noise.cols != g.noise_dim) {
    throw ShapeError("generate: noise width does not match generator");
  }
  return nn::forward(g.net, generator_input(noise, attrs));
}

Tensor2 generate(const CondGenerator& g, const std::vector<int>& attrs,
                 Rng& rng) {
  Tensor2 noise(attrs.size(), g.noise_dim);
  for (double& v : noise.data) v = rng.normal();
  return generate_from_noise(g, noise, attrs);
}

Tensor2 discriminator_input(const CondDiscriminator& d, const Tensor2& z,
                            const std::vector<int>& attrs) {
  if (!d.conditional) return z;
  if (attrs.size() != z.rows) {
    throw ShapeError("discriminate: one attribute per latent row required");
  }
  check_attrs(attrs);
  Tensor2 in(z.rows, z.cols + 2);
  for (std::size_t i = 0; i < z.rows; ++i) {
    for (std::size_t j = 0; j < z.cols; ++j) in(i, j) = z(i, j);
    in(i, z.cols + static_cast<std::size_t>(attrs[i])) = 1.0;
  }
  return in;
}

Tensor2 discriminate(const CondDiscriminator& d, const Tensor2& z,
                     const std::vector<int>& attrs) {
  return nn::forward(d.net, discriminator_input(d, z, attrs));
}

namespace {

using json = nlohmann::ordered_json;

json mlp_to_json(const nn::Mlp& net) {
  json j;
  j["widths"] = net.widths;
  j["hidden"] = net.hidden == nn::Hidden::relu ? "relu" : "leaky_relu";
  switch (net.output) {
    case nn::Output::identity: j["output"] = "identity"; break;
    case nn::Output::softmax: j["output"] = "softmax"; break;
    case nn::Output::sigmoid: j["output"] = "sigmoid"; break;
  }
  j["leaky_slope"] = net.leaky_slope;
  j["params"] = nn::flatten(net);
  return j;
}

nn::Mlp mlp_from_json(const json& j) {
  nn::Mlp net;
  net.widths = j.at("widths").get<std::vector<std::size_t>>();
  net.hidden = j.at("hidden").get<std::string>() == "relu"
                   ? nn::Hidden::relu
                   : nn::Hidden::leaky_relu;
  const std::string out = j.at("output").get<std::string>();
  net.output = out == "identity" ? nn::Output::identity
               : out == "softmax" ? nn::Output::softmax
                                  : nn::Output::sigmoid;
  net.leaky_slope = j.at("leaky_slope").get<double>();
  net.layers.resize(net.widths.size() - 1);
  for (std::size_t l = 0; l + 1 < net.widths.size(); ++l) {
    net.layers[l].w = Tensor2(net.widths[l + 1], net.widths[l]);
    net.layers[l].b = Tensor2(1, net.widths[l + 1]);
  }
  const auto params = j.at("params").get<std::vector<double>>();
  nn::unflatten(net, params);
  return net;
}

}  // namespace

void save_checkpoint(const std::string& path, const Classifier& c,
                     const CondGenerator& g, const CondDiscriminator& d) {
  json j;
  j["version"] = kCheckpointVersion;
  j["classifier"]["extractor"] = mlp_to_json(c.extractor);
  j["classifier"]["head_y"] = mlp_to_json(c.head_y);
  j["classifier"]["head_a"] = mlp_to_json(c.head_a);
  j["generator"]["net"] = mlp_to_json(g.net);
  j["generator"]["noise_dim"] = g.noise_dim;
  j["discriminator"]["net"] = mlp_to_json(d.net);
  j["discriminator"]["conditional"] = d.conditional;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump(1) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  json j = json::parse(in);
  if (j.at("version").get<int>() != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version in " + path);
  }
  Checkpoint ck;
  ck.classifier.extractor = mlp_from_json(j.at("classifier").at("extractor"));
  ck.classifier.head_y = mlp_from_json(j.at("classifier").at("head_y"));
  ck.classifier.head_a = mlp_from_json(j.at("classifier").at("head_a"));
  ck.generator.net = mlp_from_json(j.at("generator").at("net"));
  ck.generator.noise_dim = j.at("generator").at("noise_dim").get<std::size_t>();
  ck.discriminator.net = mlp_from_json(j.at("discriminator").at("net"));
  ck.discriminator.conditional =
      j.at("discriminator").at("conditional").get<bool>();
  return ck;
}

}  // namespace afed::models
