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

// Encoder-decoder network with a shared encoder over speech and text.
//
//   speech:  x --f--> frames --e_hat--> b        (f: linear + GRU, 2x subsample)
//   text:    y --g--> rows   --e_hat--> b'       (g: one-hot lookup + BiGRU)
//   decoder: d(y_{t-1}, h_{t-1}, b) -> Pr(y_t | y_{t-1}, b), h_t
//   CTC head on f's output, below the shared encoder.
//
// Batched computations are time-major: a sequence batch of B utterances with
// maximum length U is a (U*B) x H matrix whose row u*B + i is frame u of
// utterance i. Positions past an utterance's length are padding; recurrent
// states freeze there and every consumer masks them out.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "semiasr/autograd.hpp"
#include "semiasr/tensor.hpp"

namespace semiasr {

struct ArchConfig {
  std::size_t feat_dim = 16;
  std::size_t hidden = 32;
  std::size_t shared_layers = 1;  // 1-4
  std::size_t decoder_layers = 1;
  std::size_t vocab_size = 0;
  std::size_t subsample = 2;

  void validate() const;
  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

using ParamMap = std::map<std::string, Tensor>;

// Named parameter container. Names are "<group>.<...>"; the group is one of
// frontend, ctc, shared, text, decoder.
class ModelParams {
 public:
  ModelParams() = default;
  static ModelParams initialize(const ArchConfig& arch, std::uint64_t seed);
  static ModelParams zeros(const ArchConfig& arch);
  // Expected (name, shape) pairs for an architecture.
  static std::vector<std::pair<std::string, Shape>> layout(const ArchConfig& arch);

  const ArchConfig& arch() const { return arch_; }
  const ParamMap& tensors() const { return tensors_; }
  ParamMap& tensors() { return tensors_; }
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);

  // Throws unless every layout entry exists with its declared shape and no
  // extra entries are present.
  void validate() const;

  // Assembles params from loaded tensors; validates.
  static ModelParams from_tensors(const ArchConfig& arch, ParamMap tensors);

 private:
  ArchConfig arch_;
  ParamMap tensors_;
};

std::string parameter_group(const std::string& name);

struct FeatureSequence {
  std::string id;
  Tensor frames;  // T x F
};

struct LabelSequence {
  std::vector<int> indices;
};

enum class Source { kSpeech, kText };

struct EmbeddingSequence {
  Tensor vectors;  // U x H
  Source source = Source::kSpeech;
};

// Padded feature batch, frames stored time-major: row t*B + i.
struct FeatureBatch {
  std::vector<std::string> ids;
  std::vector<std::size_t> lengths;
  std::size_t feat_dim = 0;
  Tensor frames;
  // mask[i * max_length() + t] = 1 for real frames.
  std::vector<std::uint8_t> mask;

  std::size_t size() const { return lengths.size(); }
  std::size_t max_length() const;
  static FeatureBatch pack(std::span<const FeatureSequence> utterances);
};

// Padded label batch. padded[i * max_length() + t] holds label t of
// utterance i, or kEos past its end.
struct LabelBatch {
  std::vector<std::vector<int>> sequences;
  std::vector<int> padded;
  std::vector<std::uint8_t> mask;

  std::size_t size() const { return sequences.size(); }
  std::size_t max_length() const;
  static LabelBatch pack(std::vector<std::vector<int>> sequences);
};

// Graph-resident sequence batch, time-major rows.
struct SeqVars {
  Var rows;
  std::vector<std::size_t> lengths;
  std::size_t batch = 0;
  std::size_t max_len = 0;

  // Rows of utterance i, U_i x H.
  Var utterance(std::size_t i) const;
  // All real rows, utterance by utterance.
  Var valid_rows() const;
  std::size_t total_frames() const;
};

// Precomputed attention keys over an encoded batch.
struct AttentionMemory {
  Var values;     // N x H
  Var keys_t;     // H x N
  Var mask_bias;  // B x N, 0 for own frames and -1e30 elsewhere; invalid if none
  std::size_t batch = 0;
};

struct DecoderVars {
  std::vector<Var> hidden;  // one B x H per layer
  Var context;              // B x H
};

struct StepVars {
  Var logits;     // B x V
  Var attention;  // B x N
  DecoderVars state;
};

// Gated recurrent cell. x_proj = x*Wx + bx holds the update, reset and
// candidate pre-activations side by side (B x 3H); wh is H x 3H.
//   z = sig(xz + h Whz + bhz), r = sig(xr + h Whr + bhr)
//   n = tanh(xn + r * (h Whn + bhn)),  h' = n + z * (h - n)
Var gru_cell(Var x_proj, Var h, Var wh, Var bh);

// Binds parameters into a graph and builds every network piece.
class Network {
 public:
  Network(Graph& graph, const ModelParams& params);

  Graph& graph() const { return graph_; }
  const ModelParams& params() const { return params_; }
  const ArchConfig& arch() const { return params_.arch(); }
  Var param(const std::string& name) const;

  SeqVars frontend(const FeatureBatch& x) const;
  SeqVars shared(const SeqVars& in) const;
  SeqVars text_embed(const LabelBatch& y) const;
  SeqVars encode_speech(const FeatureBatch& x) const { return shared(frontend(x)); }
  SeqVars embed_text(const LabelBatch& y) const { return shared(text_embed(y)); }

  // Per-utterance CTC log-likelihoods of y given front-end output, B x 1.
  Var ctc_log_likelihood(const SeqVars& f_out, const LabelBatch& y) const;

  AttentionMemory memory(const SeqVars& b) const;
  // Memory for a single utterance replicated across `rows` decoder rows.
  AttentionMemory single_memory(Var b_rows, std::size_t rows) const;
  DecoderVars initial_state(std::size_t batch) const;
  StepVars step(const AttentionMemory& mem, std::span<const int> prev,
                const DecoderVars& state) const;
  // Teacher-forced sum_t log Pr(y_t | y_<t, b) including the EOS term, B x 1.
  Var sequence_log_prob(const SeqVars& b, const LabelBatch& y) const;

 private:
  struct Gru {
    Var wx, bx, wh, bh;
  };
  Gru gru(const std::string& prefix) const;
  Var gru_cell(Var x_proj, Var h, const Gru& w) const;
  // Runs a GRU over a time-major row matrix; returns outputs per step.
  std::vector<Var> gru_sequence(Var rows, const std::vector<std::size_t>& lengths,
                                std::size_t batch, std::size_t steps,
                                const Gru& w, bool reverse) const;
  SeqVars bidirectional(const std::string& prefix, const SeqVars& in) const;
  static Tensor step_mask(const std::vector<std::size_t>& lengths, std::size_t t);

  Graph& graph_;
  const ModelParams& params_;
};

// Single-utterance entry points. Each builds a private no-grad graph.
EmbeddingSequence encode_speech(const ModelParams& params, const FeatureSequence& x);
EmbeddingSequence frontend_output(const ModelParams& params, const FeatureSequence& x);
EmbeddingSequence embed_text(const ModelParams& params, const LabelSequence& y);

struct DecoderState {
  std::vector<Tensor> hidden;  // per layer, 1 x H; zero initially
  Tensor context;              // 1 x H
  int prev_label = 0;          // kSos initially

  static DecoderState initial(const ArchConfig& arch);
};

struct StepResult {
  std::vector<double> distribution;  // over V
  std::vector<double> attention;     // over U
  DecoderState state;
};

StepResult decode_step(const ModelParams& params, int prev_label,
                       const DecoderState& state, const EmbeddingSequence& b);
double sequence_log_prob(const ModelParams& params, const EmbeddingSequence& b,
                         const LabelSequence& y);
// f_out is frontend_output(); y must not contain blank.
double ctc_log_prob(const ModelParams& params, const EmbeddingSequence& f_out,
                    const LabelSequence& y);

// Shared encoder applied to an already-embedded sequence.
EmbeddingSequence apply_shared(const ModelParams& params, const EmbeddingSequence& b);

// Wraps a single embedding sequence as a one-utterance SeqVars.
SeqVars as_batch(Graph& graph, const EmbeddingSequence& b, bool trainable = false);

}  // namespace semiasr
