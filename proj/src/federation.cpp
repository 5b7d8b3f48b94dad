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

#include "afed/federation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace afed::fed {

namespace {

// Substream tags; each (round, client, purpose) gets its own stream so the
// classifier path consumes identical randomness across methods.
constexpr std::uint64_t kTagInit = 0x11A7;
constexpr std::uint64_t kTagSelect = 0x5E1E;
constexpr std::uint64_t kTagPenalty = 0xFA12;
constexpr std::uint64_t kTagGan = 0x6A40;
constexpr std::uint64_t kTagServerG = 0x53C6;

std::vector<int> flipped(const std::vector<int>& attrs) {
  std::vector<int> out(attrs.size());
  for (std::size_t i = 0; i < attrs.size(); ++i) out[i] = 1 - attrs[i];
  return out;
}

struct MlpTrainer {
  nn::Mlp* net;
  nn::OptState opt;
  std::vector<double> params;

  MlpTrainer(nn::Mlp* n, nn::OptKind kind, double lr)
      : net(n), opt(nn::make_opt(kind, lr, nn::param_count(*n))),
        params(nn::flatten(*n)) {}

  void step(const std::vector<double>& grads) {
    nn::opt_step(params, grads, opt);
    nn::unflatten(*net, params);
  }
};

std::vector<double>& accumulate(std::vector<double>& into,
                                const std::vector<double>& other,
                                double scale) {
  if (into.size() != other.size()) throw ShapeError("gradient size mismatch");
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += scale * other[i];
  return into;
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::fedavg: return "fedavg";
    case Method::fedreg: return "fedreg";
    case Method::afed_g: return "afed_g";
    case Method::afed_gan: return "afed_gan";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  if (name == "fedavg") return Method::fedavg;
  if (name == "fedreg") return Method::fedreg;
  if (name == "afed_g") return Method::afed_g;
  if (name == "afed_gan") return Method::afed_gan;
  throw std::invalid_argument("unknown method: " + name);
}

std::vector<int> select_clients(int n_clients, double ratio, Rng& rng) {
  if (n_clients < 1) throw std::invalid_argument("select_clients: no clients");
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw std::invalid_argument("select_clients: ratio must be in (0,1]");
  }
  const int k = std::max<int>(
      1, static_cast<int>(std::llround(ratio * static_cast<double>(n_clients))));
  return rng.sample_without_replacement(n_clients, k);
}

ClientUpdate local_update_classifier(const data::ClientDataset& ds,
                                     models::Classifier clf,
                                     const models::CondGenerator* gen,
                                     const RoundConfig& cfg, Rng& rng) {
  if (ds.samples.empty()) {
    throw std::invalid_argument("local_update_classifier: empty dataset");
  }
  const Tensor2 x = models::features_of(ds.samples);
  const std::vector<int> y = models::labels_of(ds.samples);
  const std::vector<int> a = models::attrs_of(ds.samples);
  const std::size_t n = ds.samples.size();

  const bool penalty_on = cfg.lambda > 0.0 && cfg.method != Method::fedavg;
  const bool use_generator =
      penalty_on &&
      (cfg.method == Method::afed_g || cfg.method == Method::afed_gan);
  if (use_generator && gen == nullptr) {
    throw std::invalid_argument("local_update_classifier: generator required");
  }

  // Optimizer state is round-local; clients are stateless between rounds.
  MlpTrainer tr_e(&clf.extractor, cfg.classifier_opt, cfg.lr_eta);
  MlpTrainer tr_y(&clf.head_y, cfg.classifier_opt, cfg.lr_beta);
  MlpTrainer tr_a(&clf.head_a, cfg.classifier_opt, cfg.lr_eta);
  // E aggregates eta*grad(J1) + beta*grad(J5); with a single optimizer at
  // lr_eta the J5 component is scaled by beta/eta.
  const double j5_scale = cfg.lr_beta / cfg.lr_eta;

  ClientUpdate up;
  up.client_id = ds.client_id;
  up.n_k = n;

  for (int epoch = 0; epoch < cfg.t1; ++epoch) {
    const nn::ForwardCache cache_e = nn::forward_cache(clf.extractor, x);
    const Tensor2& z = cache_e.output();

    // J1: attribute head + extractor.
    const nn::ForwardCache cache_a = nn::forward_cache(clf.head_a, z);
    const nn::CeResult ce_a = nn::cross_entropy(cache_a.output(), a);
    const nn::Backprop bp_a =
        nn::backward_from_logits(clf.head_a, cache_a, ce_a.dlogits);

    // J5 classification part: label head + extractor.
    const nn::ForwardCache cache_y = nn::forward_cache(clf.head_y, z);
    const nn::CeResult ce_y = nn::cross_entropy(cache_y.output(), y);
    const nn::Backprop bp_y =
        nn::backward_from_logits(clf.head_y, cache_y, ce_y.dlogits);

    std::vector<double> grad_y = nn::flatten_grads(clf.head_y, bp_y);
    Tensor2 dz_pen(n, z.cols);
    double penalty_value = 0.0;

    if (penalty_on) {
      Tensor2 z_t;
      Tensor2 z_f;
      std::vector<int> a_t, a_f;
      std::vector<std::size_t> rows;  // rows of z that entered the penalty
      if (use_generator) {
        // Each real latent is paired with a generated latent of the
        // complementary attribute.
        z_t = z;
        a_t = a;
        a_f = flipped(a);
        z_f = models::generate(*gen, a_f, rng);
        rows.resize(n);
        for (std::size_t i = 0; i < n; ++i) rows[i] = i;
      } else {
        // fedreg: pair with a real opposite-group latent from this client;
        // rows without an opposite-group partner are skipped.
        std::array<std::vector<std::size_t>, 2> by_attr;
        for (std::size_t i = 0; i < n; ++i) {
          by_attr[static_cast<std::size_t>(a[i])].push_back(i);
        }
        for (std::size_t i = 0; i < n; ++i) {
          const auto& pool = by_attr[static_cast<std::size_t>(1 - a[i])];
          if (pool.empty()) continue;
          rows.push_back(i);
        }
        z_t = Tensor2(rows.size(), z.cols);
        z_f = Tensor2(rows.size(), z.cols);
        a_t.resize(rows.size());
        a_f.resize(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
          const std::size_t i = rows[r];
          const auto& pool = by_attr[static_cast<std::size_t>(1 - a[i])];
          const std::size_t j = pool[rng.below(pool.size())];
          for (std::size_t cidx = 0; cidx < z.cols; ++cidx) {
            z_t(r, cidx) = z(i, cidx);
            z_f(r, cidx) = z(j, cidx);  // detached copy
          }
          a_t[r] = a[i];
          a_f[r] = 1 - a[i];
        }
      }
      if (!rows.empty()) {
        const fairness::MixBatch mb =
            fairness::mix(z_t, a_t, z_f, a_f, cfg.beta_alpha, rng);
        const fairness::PenaltyResult pen =
            fairness::fairness_penalty(clf.head_y, mb, cfg.penalty_mode);
        penalty_value = pen.value;
        accumulate(grad_y, nn::flatten_grads(clf.head_y, pen.head_grads),
                   cfg.lambda);
        for (std::size_t r = 0; r < rows.size(); ++r) {
          for (std::size_t cidx = 0; cidx < z.cols; ++cidx) {
            dz_pen(rows[r], cidx) += cfg.lambda * pen.dz_t(r, cidx);
          }
        }
      }
    }

    // Extractor upstream: dJ1/dz + (beta/eta) * dJ5/dz.
    Tensor2 dz = bp_a.dinput;
    for (std::size_t i = 0; i < dz.data.size(); ++i) {
      dz.data[i] += j5_scale * (bp_y.dinput.data[i] + dz_pen.data[i]);
    }
    const nn::Backprop bp_e =
        nn::backward_from_logits(clf.extractor, cache_e, dz);

    tr_a.step(nn::flatten_grads(clf.head_a, bp_a));
    tr_y.step(grad_y);
    tr_e.step(nn::flatten_grads(clf.extractor, bp_e));

    up.loss_y = ce_y.loss;
    up.loss_fair = penalty_value;
  }

  up.clf = std::move(clf);
  return up;
}

double gan_d_step(models::CondDiscriminator& d, const Tensor2& z_real,
                  const std::vector<int>& attrs, const Tensor2& z_fake,
                  nn::OptState& opt) {
  const std::size_t n = z_real.rows;
  if (z_fake.rows != n) throw ShapeError("gan_d_step: fake batch size differs");
  // Stack real on top of fake; targets 1 for real, 0 for fake.
  Tensor2 z_all(2 * n, z_real.cols);
  std::vector<int> a_all(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < z_real.cols; ++j) {
      z_all(i, j) = z_real(i, j);
      z_all(n + i, j) = z_fake(i, j);
    }
    a_all[i] = attrs[i];
    a_all[n + i] = attrs[i];
  }
  std::vector<double> targets(2 * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) targets[i] = 1.0;

  const Tensor2 input = models::discriminator_input(d, z_all, a_all);
  const nn::ForwardCache cache = nn::forward_cache(d.net, input);
  const nn::BceResult bce = nn::bce_with_logits(cache.pre.back(), targets);
  const nn::Backprop bp = nn::backward_from_logits(d.net, cache, bce.dlogits);
  std::vector<double> params = nn::flatten(d.net);
  nn::opt_step(params, nn::flatten_grads(d.net, bp), opt);
  nn::unflatten(d.net, params);
  return bce.loss;
}

double gan_g_step(models::CondGenerator& g, const models::CondDiscriminator& d,
                  const std::vector<int>& attrs, const RoundConfig& cfg,
                  nn::OptState& opt, Rng& rng) {
  const std::size_t n = attrs.size();
  Tensor2 noise(n, g.noise_dim);
  for (double& v : noise.data) v = rng.normal();
  const Tensor2 gin = models::generator_input(noise, attrs);
  const nn::ForwardCache cache_g = nn::forward_cache(g.net, gin);
  const Tensor2 din =
      models::discriminator_input(d, cache_g.output(), attrs);
  const nn::ForwardCache cache_d = nn::forward_cache(d.net, din);
  const Tensor2& logits = cache_d.pre.back();

  double loss = 0.0;
  Tensor2 dlogits(logits.rows, 1);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double xl = logits(i, 0);
    const double s = nn::sigmoid(xl);
    if (cfg.gan_loss == GanLossKind::nonsaturating) {
      // -log D(fake)
      loss += std::log1p(std::exp(-std::abs(xl))) + std::max(-xl, 0.0);
      dlogits(i, 0) = (s - 1.0) * inv_n;
    } else {
      // log(1 - D(fake)), as printed in the generator objective
      loss += -(std::log1p(std::exp(-std::abs(xl))) + std::max(xl, 0.0));
      dlogits(i, 0) = -s * inv_n;
    }
  }
  loss *= inv_n;

  const nn::Backprop bp_d = nn::backward_from_logits(d.net, cache_d, dlogits);
  // Only the latent slice of D's input feeds back into G.
  Tensor2 dz(n, g.net.out_dim());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dz.cols; ++j) dz(i, j) = bp_d.dinput(i, j);
  }
  const nn::Backprop bp_g = nn::backward_from_logits(g.net, cache_g, dz);
  std::vector<double> params = nn::flatten(g.net);
  nn::opt_step(params, nn::flatten_grads(g.net, bp_g), opt);
  nn::unflatten(g.net, params);
  return loss;
}

void local_update_gan(const data::ClientDataset& ds,
                      const models::Classifier& clf, models::CondGenerator& g,
                      models::CondDiscriminator& d, const RoundConfig& cfg,
                      Rng& rng, double* loss_g, double* loss_d) {
  if (ds.samples.empty()) {
    throw std::invalid_argument("local_update_gan: empty dataset");
  }
  const Tensor2 x = models::features_of(ds.samples);
  const std::vector<int> attrs = models::attrs_of(ds.samples);
  // E is frozen during GAN training; latents are computed once.
  const Tensor2 z_real = models::extract(clf, x);

  nn::OptState opt_d = nn::make_opt(nn::OptKind::rmsprop, cfg.lr_d,
                                    nn::param_count(d.net));
  nn::OptState opt_g = nn::make_opt(nn::OptKind::rmsprop, cfg.lr_g,
                                    nn::param_count(g.net));
  double lg = 0.0, ld = 0.0;
  for (int step = 0; step < cfg.t2; ++step) {
    const Tensor2 z_fake = models::generate(g, attrs, rng);
    ld = gan_d_step(d, z_real, attrs, z_fake, opt_d);
    lg = gan_g_step(g, d, attrs, cfg, opt_g, rng);
  }
  if (loss_g) *loss_g = lg;
  if (loss_d) *loss_d = ld;
}

namespace {

std::vector<double> weighted_mean_params(
    const std::vector<const nn::Mlp*>& nets, const std::vector<double>& w) {
  std::vector<double> out(nn::param_count(*nets[0]), 0.0);
  for (std::size_t k = 0; k < nets.size(); ++k) {
    const std::vector<double> flat = nn::flatten(*nets[k]);
    if (flat.size() != out.size()) {
      throw ShapeError("aggregate: parameter shapes differ across clients");
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w[k] * flat[i];
  }
  return out;
}

}  // namespace

Aggregates aggregate(std::vector<ClientUpdate> updates) {
  if (updates.empty()) throw std::invalid_argument("aggregate: no updates");
  std::sort(updates.begin(), updates.end(),
            [](const ClientUpdate& a, const ClientUpdate& b) {
              return a.client_id < b.client_id;
            });
  double total = 0.0;
  for (const ClientUpdate& u : updates) total += static_cast<double>(u.n_k);
  std::vector<double> w(updates.size());
  for (std::size_t k = 0; k < updates.size(); ++k) {
    w[k] = static_cast<double>(updates[k].n_k) / total;
  }

  Aggregates agg;
  agg.clf = updates[0].clf;
  auto mean_into = [&](nn::Mlp& target, auto pick) {
    std::vector<const nn::Mlp*> nets;
    nets.reserve(updates.size());
    for (const ClientUpdate& u : updates) nets.push_back(pick(u));
    nn::unflatten(target, weighted_mean_params(nets, w));
  };
  mean_into(agg.clf.extractor,
            [](const ClientUpdate& u) { return &u.clf.extractor; });
  mean_into(agg.clf.head_y, [](const ClientUpdate& u) { return &u.clf.head_y; });
  mean_into(agg.clf.head_a, [](const ClientUpdate& u) { return &u.clf.head_a; });

  if (updates[0].has_gan) {
    agg.has_gan = true;
    agg.gen = updates[0].gen;
    agg.disc = updates[0].disc;
    mean_into(agg.gen.net, [](const ClientUpdate& u) { return &u.gen.net; });
    mean_into(agg.disc.net, [](const ClientUpdate& u) { return &u.disc.net; });
  }
  return agg;
}

double server_train_generator(models::CondGenerator& g,
                              const std::vector<nn::Mlp>& attr_heads,
                              const RoundConfig& cfg, nn::OptState& opt,
                              Rng& rng) {
  if (attr_heads.empty()) {
    throw std::invalid_argument("server_train_generator: no attribute heads");
  }
  if (cfg.server_g_steps <= 0) return 0.0;
  std::vector<double> params = nn::flatten(g.net);
  double loss_sum = 0.0;
  for (int step = 0; step < cfg.server_g_steps; ++step) {
    // a ~ uniform over {0,1}; the prior Q(a) of the distillation objective.
    std::vector<int> attrs(cfg.server_g_batch);
    for (int& ai : attrs) ai = rng.uniform() < 0.5 ? 0 : 1;
    Tensor2 noise(cfg.server_g_batch, g.noise_dim);
    for (double& v : noise.data) v = rng.normal();
    const Tensor2 gin = models::generator_input(noise, attrs);
    const nn::ForwardCache cache_g = nn::forward_cache(g.net, gin);

    double loss = 0.0;
    Tensor2 dz(cfg.server_g_batch, g.net.out_dim());
    for (const nn::Mlp& head : attr_heads) {
      const nn::ForwardCache cache_h = nn::forward_cache(head, cache_g.output());
      const nn::CeResult ce = nn::cross_entropy(cache_h.output(), attrs);
      const nn::Backprop bp = nn::backward_from_logits(head, cache_h, ce.dlogits);
      loss += ce.loss;
      for (std::size_t i = 0; i < dz.data.size(); ++i) {
        dz.data[i] += bp.dinput.data[i];
      }
    }
    const nn::Backprop bp_g = nn::backward_from_logits(g.net, cache_g, dz);
    nn::opt_step(params, nn::flatten_grads(g.net, bp_g), opt);
    nn::unflatten(g.net, params);
    loss_sum += loss;
  }
  return loss_sum / static_cast<double>(cfg.server_g_steps);
}

EvalResult evaluate(const models::Classifier& clf,
                    const std::vector<data::Sample>& test) {
  if (test.empty()) throw std::invalid_argument("evaluate: empty test split");
  const Tensor2 x = models::features_of(test);
  const Tensor2 probs = models::predict_y(clf, models::extract(clf, x));
  const std::vector<int> y = models::labels_of(test);
  const std::vector<int> a = models::attrs_of(test);
  std::vector<double> hard(test.size());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    hard[i] = probs(i, 1) >= 0.5 ? 1.0 : 0.0;
    if (static_cast<int>(hard[i]) == y[i]) ++correct;
  }
  EvalResult res;
  res.acc = static_cast<double>(correct) / static_cast<double>(test.size());
  res.dp = fairness::dp_gap(hard, a);
  return res;
}

RoundRow run_round(FederationState& state, const FedDataset& data,
                   const RoundConfig& cfg) {
  const int n_clients = static_cast<int>(data.clients.size());
  const auto round_u = static_cast<std::uint64_t>(state.round);
  Rng select_rng(substream(state.seed, kTagSelect, round_u));
  const std::vector<int> selected =
      select_clients(n_clients, cfg.participant_ratio, select_rng);

  std::vector<ClientUpdate> updates;
  updates.reserve(selected.size());
  for (int k : selected) {
    const data::ClientDataset& shard = data.clients[static_cast<std::size_t>(k)];
    Rng pen_rng(substream(state.seed, kTagPenalty, round_u,
                          static_cast<std::uint64_t>(k)));
    const models::CondGenerator* gen_ptr =
        (cfg.method == Method::afed_g || cfg.method == Method::afed_gan)
            ? &state.gen
            : nullptr;
    ClientUpdate up =
        local_update_classifier(shard, state.clf, gen_ptr, cfg, pen_rng);
    if (cfg.method == Method::afed_gan) {
      up.gen = state.gen;
      up.disc = state.disc;
      up.has_gan = true;
      Rng gan_rng(substream(state.seed, kTagGan, round_u,
                            static_cast<std::uint64_t>(k)));
      local_update_gan(shard, up.clf, up.gen, up.disc, cfg, gan_rng,
                       &up.loss_g, &up.loss_d);
    }
    updates.push_back(std::move(up));
  }

  RoundRow row;
  row.round = state.round;
  row.method = cfg.method;
  row.seed = state.seed;
  row.lambda = cfg.lambda;
  for (const ClientUpdate& u : updates) {
    row.loss_y += u.loss_y;
    row.loss_fair += u.loss_fair;
    row.loss_g += u.loss_g;
    row.loss_d += u.loss_d;
  }
  const double inv = 1.0 / static_cast<double>(updates.size());
  row.loss_y *= inv;
  row.loss_fair *= inv;
  row.loss_g *= inv;
  row.loss_d *= inv;

  // Attribute heads are kept before aggregation consumes the updates; the
  // server distillation uses this round's per-client heads.
  std::vector<nn::Mlp> attr_heads;
  if (cfg.method == Method::afed_g) {
    attr_heads.reserve(updates.size());
    for (const ClientUpdate& u : updates) attr_heads.push_back(u.clf.head_a);
  }

  Aggregates agg = aggregate(std::move(updates));
  state.clf = std::move(agg.clf);
  if (agg.has_gan) {
    state.gen = std::move(agg.gen);
    state.disc = std::move(agg.disc);
  }
  if (cfg.method == Method::afed_g) {
    Rng srv_rng(substream(state.seed, kTagServerG, round_u));
    row.loss_g = server_train_generator(state.gen, attr_heads, cfg,
                                        state.server_g_opt, srv_rng);
  }

  const EvalResult ev = evaluate(state.clf, data.global_test);
  row.acc = ev.acc;
  row.dp_gap = ev.dp.gap;
  state.round += 1;
  return row;
}

MetricTrace run_experiment(const FedDataset& data,
                           const models::ModelSpec& spec,
                           const RoundConfig& cfg, std::uint64_t seed,
                           const RoundHook& on_round) {
  if (data.clients.empty()) {
    throw std::invalid_argument("run_experiment: no client datasets");
  }
  FederationState state;
  state.seed = seed;
  {
    // All five networks are always initialized, in a fixed order, so traces
    // are comparable across methods at the same seed.
    Rng init_rng(substream(seed, kTagInit));
    state.clf = models::make_classifier(spec, init_rng);
    state.gen = models::make_generator(spec, init_rng);
    state.disc = models::make_discriminator(spec, init_rng);
  }
  state.server_g_opt = nn::make_opt(nn::OptKind::rmsprop, cfg.lr_server_g,
                                    nn::param_count(state.gen.net));

  MetricTrace trace;
  trace.reserve(static_cast<std::size_t>(cfg.rounds));
  for (int r = 0; r < cfg.rounds; ++r) {
    try {
      trace.push_back(run_round(state, data, cfg));
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " (round " +
                         std::to_string(r) + ")");
    }
    if (on_round) on_round(state, r);
  }
  return trace;
}

}  // namespace afed::fed
