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
#include <vector>

#include "afed/nn.hpp"
#include "afed/rng.hpp"
#include "afed/tensor.hpp"

namespace afed::fairness {

struct DpReport {
  double gamma0 = 0.0;  // positive rate, group a=0
  double gamma1 = 0.0;  // positive rate, group a=1
  double gap = 0.0;     // |gamma0 - gamma1|
  std::size_t n0 = 0;
  std::size_t n1 = 0;
};

// preds holds hard labels (0/1) or positive-class probabilities. Throws
// std::invalid_argument when either group is empty - a silent 0 would read
// as perfect parity.
DpReport dp_gap(const std::vector<double>& preds,
                const std::vector<int>& attrs);

struct MixBatch {
  Tensor2 z_t;             // true latents
  Tensor2 z_f;             // generated (or surrogate) latents
  std::vector<double> t;   // per-row mixing coefficients in [0,1]
  std::vector<int> a_t;    // attribute of each z_t row
  std::vector<int> a_f;    // attribute of each z_f row
  Tensor2 z_bar;           // t*z_t + (1-t)*z_f
  std::vector<double> a_bar;  // t*a_t + (1-t)*a_f, reporting only
};

MixBatch mix(const Tensor2& z_t, const std::vector<int>& a_t,
             const Tensor2& z_f, const std::vector<int>& a_f, double alpha,
             Rng& rng);
// Deterministic variant with caller-supplied coefficients.
MixBatch mix_with_t(const Tensor2& z_t, const std::vector<int>& a_t,
                    const Tensor2& z_f, const std::vector<int>& a_f,
                    std::vector<double> t);

// The scalar score of a classification head as a function of the latent:
// softmax 2-class heads score sigma(l1 - l0) (the positive-class
// probability), identity 2-class heads the raw logit difference, and
// 1-output heads the (sigmoid of the) single logit. Returns one value per
// row.
std::vector<double> score_rows(const nn::Mlp& head, const Tensor2& z);

enum class PenaltyMode {
  signed_mean,    // mean <grad f(z_bar), z_t - z_f>, as printed in the
                  // objective
  abs_canonical,  // |mean s_i <grad f, z_t - z_f>| with the direction
                  // canonicalized to group0 - group1 before averaging
};

struct PenaltyResult {
  double value = 0.0;
  nn::Backprop head_grads;  // d value / d head parameters
  Tensor2 dz_t;             // d value / d z_t (z_f is treated as constant)
};

// Gradient penalty of the head score at the mixed latents. The value is
// first-order in the head, so its parameter gradient carries second-order
// terms; they are propagated exactly (forward-over-reverse), with the
// hidden-activation curvature zero almost everywhere for (leaky) relu.
PenaltyResult fairness_penalty(const nn::Mlp& head, const MixBatch& batch,
                               PenaltyMode mode);

struct IntegralCheck {
  double dp = 0.0;        // |E f(z0) - E f(z1)| on the sample groups
  double integral = 0.0;  // |trapezoid of d/dt E f(z_bar(t))|
};

// Two routes to the same discrimination level: the direct group-mean gap
// and the quadrature of the mix-path derivative (analytic input gradients,
// trapezoid rule over grid points). Groups of equal size are paired
// row-by-row, otherwise all pairs are used.
IntegralCheck dp_integral_check(const nn::Mlp& head, const Tensor2& group0,
                                const Tensor2& group1, std::size_t grid);

struct ProbeSpec {
  std::size_t width = 16;
  int depth = 2;
  int steps = 200;
  double lr = 0.01;
};

struct TwoSampleResult {
  double balanced_acc = 0.0;  // held-out, balanced over sides
  double auc = 0.0;           // held-out ROC-AUC of the side-b score
};

// Trains a fresh probe classifier to tell rows of `a` from rows of `b`
// (50/50 train/test split per side, training sides subsampled to equal
// count) and reports held-out separability.
TwoSampleResult classifier_two_sample(const Tensor2& a, const Tensor2& b,
                                      const ProbeSpec& probe,
                                      std::uint64_t seed);

// Domain-classifier estimate of the H-divergence between the two sample
// sets: 2*(2*balanced_acc - 1), clamped to [0, 2].
double h_div_proxy(const Tensor2& a, const Tensor2& b, const ProbeSpec& probe,
                   std::uint64_t seed);

}  // namespace afed::fairness
