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

// Greedy and beam-search decoding from inter-domain embeddings, with optional
// shallow fusion of a character LM.

#pragma once

#include <span>
#include <vector>

#include "semiasr/lm.hpp"
#include "semiasr/model.hpp"

namespace semiasr {

struct Hypothesis {
  std::vector<int> labels;  // no SOS, no EOS
  double score = 0.0;
  std::vector<double> step_scores;  // includes the EOS step when completed
  bool completed = false;
};

struct BeamConfig {
  std::size_t width = 5;
  double max_len_factor = 1.5;
  double lm_weight = 0.0;
  const LmParams* lm = nullptr;

  void validate() const;
};

// Embeddings of several utterances as plain values, time-major rows.
struct EncodedBatch {
  Tensor rows;
  std::vector<std::size_t> lengths;
  std::size_t batch = 0;
  std::size_t max_len = 0;

  static EncodedBatch from(const SeqVars& s);
  EmbeddingSequence utterance(std::size_t i) const;
};

// Decoder steps allowed for U encoder frames: ceil(factor * U), at least 1.
std::size_t max_decode_steps(std::size_t frames, double factor);

// Argmax decoding; BLANK and SOS are never emitted. Stops at EOS or after
// max_decode_steps().
Hypothesis greedy_decode(const ModelParams& params, const EmbeddingSequence& b,
                         double max_len_factor = 1.5);
std::vector<Hypothesis> greedy_decode(const ModelParams& params,
                                      const EncodedBatch& b,
                                      double max_len_factor = 1.5);

// Length-synchronous beam search. Returns up to `width` hypotheses, best
// first; ties go to the shorter, then lexicographically smaller, labels.
// If nothing reaches EOS within the cap, returns the best unfinished
// hypotheses with completed = false.
std::vector<Hypothesis> beam_search(const ModelParams& params,
                                    const EmbeddingSequence& b,
                                    const BeamConfig& cfg);

// log p_model(c) + gamma * log p_lm(c), not renormalized. Inputs are
// log-probabilities.
std::vector<double> fuse_lm_log_scores(std::span<const double> model_log_probs,
                                       std::span<const double> lm_log_probs,
                                       double gamma);
// Same on probabilities.
std::vector<double> fuse_lm_score(std::span<const double> model_probs,
                                  std::span<const double> lm_probs, double gamma);

// Symbols the attention decoder may emit.
bool decodable(int label);

}  // namespace semiasr
