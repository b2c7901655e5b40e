// Copyright 2026 The semiasr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Training objectives: paired likelihood, text autoencoding, MMD inter-domain
// distance, identity mapping, cycle-consistent inter-domain distance, and
// their per-variant combination.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "semiasr/autograd.hpp"
#include "semiasr/model.hpp"

namespace semiasr {

enum class MmdEstimator { kBiased, kUnbiased };

struct KernelConfig {
  // RBF bandwidth; unset selects the median heuristic.
  std::optional<double> sigma;
  MmdEstimator estimator = MmdEstimator::kBiased;

  void validate() const;
};

// Median of pairwise Euclidean distances over the pooled rows of p and q.
// Falls back to 1 when every point coincides.
double median_heuristic_sigma(const Tensor& p, const Tensor& q);

// Squared MMD between the row sets p and q under
// k(u, v) = exp(-||u - v||^2 / (2 sigma^2)). Differentiable in p and q; the
// bandwidth is a constant of the graph.
Var mmd(Var p, Var q, const KernelConfig& kernel);
double mmd(const Tensor& p, const Tensor& q, const KernelConfig& kernel);

struct PairedBatch {
  FeatureBatch features;
  LabelBatch labels;
};

// mean_i -[lambda * log P_ctc(y_i | f(x_i)) + (1 - lambda) * log P(y_i | e(x_i))]
// Terms with zero weight are not computed.
Var loss_pair(const Network& net, const PairedBatch& batch, double ctc_weight);
// mean_i -log P(y_i | e_hat(g(y_i)))
Var loss_text(const Network& net, const LabelBatch& text);
// MMD between all speech frames b and all text frames b' of the batches.
Var loss_dom(const Network& net, const FeatureBatch& speech, const LabelBatch& text,
             const KernelConfig& kernel);
// Mean over real frames of ||e_hat(b)_u - b_u||_1.
Var loss_idt(const Network& net, const SeqVars& b);

struct CycleDiagnostics {
  std::size_t utterances = 0;
  std::size_t empty_hypotheses = 0;  // replaced by a single UNK
};

// MMD between speech embeddings b = e(x) and e_hat(g(y_hat)) where y_hat is the
// greedy hypothesis decoded from b. The decode is outside the graph.
Var loss_cyc_dom(const Network& net, const SeqVars& speech_embeddings,
                 const KernelConfig& kernel, double max_len_factor,
                 CycleDiagnostics* diagnostics = nullptr);

enum class Variant { kInitial, kBaseline, kRetrainIdt, kRetrainCyc, kRetrainCycIdt };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

struct ObjectiveConfig {
  Variant variant = Variant::kRetrainCycIdt;
  double alpha = 0.5;
  double beta = 0.4;
  double ctc_weight = 0.3;
  KernelConfig kernel;
  double max_len_factor = 1.5;

  void validate() const;
};

struct LossBreakdown {
  double total = 0.0;
  // Keys: pair, ctc, text, dom, cyc_dom, idt_speech, idt_text. Only terms the
  // variant actually computed are present. "ctc" is the CTC part of "pair"
  // and is informational.
  std::map<std::string, double> components;

  bool has(const std::string& key) const { return components.count(key) != 0; }
};

struct ObjectiveTerms {
  Var total;
  LossBreakdown breakdown;
  CycleDiagnostics cycle;
};

// alpha * L_pair + (1 - alpha) * L_unpair with L_unpair chosen by the variant:
//   Baseline         beta * dom + (1 - beta) * text
//   Retrain-idt      beta * idt_speech + (1 - beta) * idt_text
//   Retrain-cyc      beta * cyc_dom + (1 - beta) * text
//   Retrain-cyc+idt  beta * (cyc_dom + idt_speech) + (1 - beta) * (text + idt_text)
//   Initial          L_pair alone
// Zero-weight terms are skipped. Batches may be null when their terms are
// skipped; otherwise a missing batch is an error.
ObjectiveTerms combined_objective(const Network& net, const ObjectiveConfig& cfg,
                                  const PairedBatch* paired,
                                  const FeatureBatch* speech,
                                  const LabelBatch* text);

// Applies the variant formula to breakdown components with plain arithmetic.
double objective_from_components(const std::map<std::string, double>& components,
                                 const ObjectiveConfig& cfg);

}  // namespace semiasr
