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
#include <functional>
#include <string>
#include <vector>

#include "afed/data.hpp"
#include "afed/fairness.hpp"
#include "afed/models.hpp"
#include "afed/nn.hpp"

namespace afed::fed {

enum class Method { fedavg, fedreg, afed_g, afed_gan };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

enum class GanLossKind { nonsaturating, paper_saturating };

struct RoundConfig {
  Method method = Method::fedavg;
  double participant_ratio = 1.0;
  int t1 = 5;          // local classifier epochs
  int t2 = 5;          // local GAN epochs (afed_gan)
  int rounds = 150;    // global communication rounds
  double lr_eta = 0.005;       // h^a / extractor path
  double lr_beta = 0.005;      // h^y / fairness path
  double lr_g = 1e-4;          // client generator (rmsprop)
  double lr_d = 3e-4;          // client discriminator (rmsprop)
  double lr_server_g = 1e-4;   // server generator (afed_g, rmsprop)
  int server_g_steps = 100;    // distillation steps per round (afed_g)
  std::size_t server_g_batch = 64;
  double lambda = 0.0;         // fairness weight
  double beta_alpha = 1.0;     // Beta(alpha, alpha) for the mix coefficient
  nn::OptKind classifier_opt = nn::OptKind::adam;
  GanLossKind gan_loss = GanLossKind::nonsaturating;
  fairness::PenaltyMode penalty_mode = fairness::PenaltyMode::signed_mean;
};

struct FederationState {
  models::Classifier clf;
  models::CondGenerator gen;
  models::CondDiscriminator disc;
  nn::OptState server_g_opt;  // persists across rounds
  int round = 0;
  std::uint64_t seed = 0;
};

struct ClientUpdate {
  int client_id = 0;
  models::Classifier clf;
  models::CondGenerator gen;    // afed_gan only
  models::CondDiscriminator disc;  // afed_gan only
  bool has_gan = false;
  std::size_t n_k = 0;
  double loss_y = 0.0;     // classification loss, final local epoch
  double loss_fair = 0.0;  // raw penalty value, final local epoch
  double loss_g = 0.0;
  double loss_d = 0.0;
};

struct RoundRow {
  int round = 0;
  Method method = Method::fedavg;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  double acc = 0.0;
  double dp_gap = 0.0;
  double loss_y = 0.0;
  double loss_fair = 0.0;
  double loss_g = 0.0;
  double loss_d = 0.0;
};

using MetricTrace = std::vector<RoundRow>;

struct FedDataset {
  std::vector<data::ClientDataset> clients;  // local training shards
  std::vector<data::Sample> global_test;
};

// max(1, round(ratio * n)) distinct ids, uniform without replacement,
// returned sorted.
std::vector<int> select_clients(int n_clients, double ratio, Rng& rng);

// T1 local epochs on the full local batch. Per step: J1 (cross-entropy of
// h^a on a) trains h^a and E; J5 (cross-entropy of h^y on y plus
// lambda * mix penalty) trains h^y and E. The generator only supplies
// detached z_f latents. fedavg runs with the penalty path off; fedreg draws
// z_f from the client's own opposite-group latents instead of G.
ClientUpdate local_update_classifier(const data::ClientDataset& ds,
                                     models::Classifier clf,
                                     const models::CondGenerator* gen,
                                     const RoundConfig& cfg, Rng& rng);

// One discriminator step: real (z,a) vs generated (G(eps,a),a), targets
// 1/0. Returns the loss.
double gan_d_step(models::CondDiscriminator& d, const Tensor2& z_real,
                  const std::vector<int>& attrs, const Tensor2& z_fake,
                  nn::OptState& opt);
// One generator step against a frozen discriminator. Returns the loss.
double gan_g_step(models::CondGenerator& g, const models::CondDiscriminator& d,
                  const std::vector<int>& attrs, const RoundConfig& cfg,
                  nn::OptState& opt, Rng& rng);

// T2 alternating D/G steps on the frozen extractor's latents.
void local_update_gan(const data::ClientDataset& ds,
                      const models::Classifier& clf, models::CondGenerator& g,
                      models::CondDiscriminator& d, const RoundConfig& cfg,
                      Rng& rng, double* loss_g, double* loss_d);

struct Aggregates {
  models::Classifier clf;
  models::CondGenerator gen;
  models::CondDiscriminator disc;
  bool has_gan = false;
};

// n_k-weighted parameter mean; reduction order is fixed by client id.
Aggregates aggregate(std::vector<ClientUpdate> updates);

// Knowledge distillation of the clients' attribute heads into G (J2):
// latents generated under a uniform attribute prior must be classified as
// that attribute by every head. Returns the mean loss over steps.
double server_train_generator(models::CondGenerator& g,
                              const std::vector<nn::Mlp>& attr_heads,
                              const RoundConfig& cfg, nn::OptState& opt,
                              Rng& rng);

struct EvalResult {
  double acc = 0.0;
  fairness::DpReport dp;
};

// Hard predictions at threshold 0.5 on the test split.
EvalResult evaluate(const models::Classifier& clf,
                    const std::vector<data::Sample>& test);

RoundRow run_round(FederationState& state, const FedDataset& data,
                   const RoundConfig& cfg);

using RoundHook = std::function<void(const FederationState&, int round)>;

// Initializes all bundles from the seed and runs the full schedule.
MetricTrace run_experiment(const FedDataset& data,
                           const models::ModelSpec& spec,
                           const RoundConfig& cfg, std::uint64_t seed,
                           const RoundHook& on_round = {});

}  // namespace afed::fed
