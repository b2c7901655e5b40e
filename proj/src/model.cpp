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

#include "semiasr/model.hpp"

#include <algorithm>
#include <cmath>

#include "semiasr/errors.hpp"
#include "semiasr/rng.hpp"
#include "semiasr/vocabulary.hpp"

namespace semiasr {

namespace {

constexpr double kMaskedScore = -1e30;

std::string layer_name(const std::string& base, std::size_t k) {
  return base + ".l" + std::to_string(k);
}

void add_gru(std::vector<std::pair<std::string, Shape>>& out,
             const std::string& prefix, std::size_t in, std::size_t h) {
  out.push_back({prefix + ".wx", {in, 3 * h}});
  out.push_back({prefix + ".bx", {1, 3 * h}});
  out.push_back({prefix + ".wh", {h, 3 * h}});
  out.push_back({prefix + ".bh", {1, 3 * h}});
}

bool is_bias(const std::string& name) {
  auto dot = name.rfind('.');
  std::string leaf = name.substr(dot + 1);
  return leaf == "b" || leaf == "bx" || leaf == "bh";
}

bool is_embedding(const std::string& name) {
  return name.size() >= 6 && name.compare(name.size() - 6, 6, ".embed") == 0;
}

}  // namespace

void ArchConfig::validate() const {
  if (feat_dim == 0) throw ConfigError("feature dimension must be positive");
  if (hidden == 0) throw ConfigError("hidden width must be positive");
  if (shared_layers < 1 || shared_layers > 4)
    throw ConfigError("shared encoder layers must be in 1..4, got " +
                      std::to_string(shared_layers));
  if (decoder_layers < 1) throw ConfigError("decoder needs at least one layer");
  if (vocab_size <= static_cast<std::size_t>(kNumSpecials))
    throw ConfigError("vocabulary must contain characters beyond the specials");
  if (subsample < 1) throw ConfigError("subsampling factor must be >= 1");
}

std::vector<std::pair<std::string, Shape>> ModelParams::layout(
    const ArchConfig& a) {
  const std::size_t h = a.hidden, v = a.vocab_size;
  std::vector<std::pair<std::string, Shape>> out;
  out.push_back({"frontend.in.w", {a.feat_dim, h}});
  out.push_back({"frontend.in.b", {1, h}});
  add_gru(out, "frontend.gru", h, h);
  out.push_back({"ctc.w", {h, v}});
  out.push_back({"ctc.b", {1, v}});
  for (std::size_t k = 0; k < a.shared_layers; ++k) {
    const std::string p = layer_name("shared", k);
    add_gru(out, p + ".fwd", h, h);
    add_gru(out, p + ".bwd", h, h);
    out.push_back({p + ".proj.w", {2 * h, h}});
    out.push_back({p + ".proj.b", {1, h}});
  }
  out.push_back({"text.embed", {v, h}});
  add_gru(out, "text.fwd", h, h);
  add_gru(out, "text.bwd", h, h);
  out.push_back({"text.proj.w", {2 * h, h}});
  out.push_back({"text.proj.b", {1, h}});
  out.push_back({"decoder.embed", {v, h}});
  out.push_back({"decoder.att.wq", {h, h}});
  out.push_back({"decoder.att.wk", {h, h}});
  for (std::size_t k = 0; k < a.decoder_layers; ++k)
    add_gru(out, layer_name("decoder", k), k == 0 ? 2 * h : h, h);
  out.push_back({"decoder.out.w", {2 * h, v}});
  out.push_back({"decoder.out.b", {1, v}});
  return out;
}

ModelParams ModelParams::initialize(const ArchConfig& arch, std::uint64_t seed) {
  arch.validate();
  Rng rng(seed);
  ModelParams p;
  p.arch_ = arch;
  for (auto& [name, shape] : layout(arch)) {
    Tensor t = Tensor::zeros(shape);
    if (is_embedding(name)) {
      for (double& x : t.values()) x = rng.uniform(-0.5, 0.5);
    } else if (!is_bias(name)) {
      const double k = 1.0 / std::sqrt(static_cast<double>(shape[0]));
      for (double& x : t.values()) x = rng.uniform(-k, k);
    }
    p.tensors_.emplace(name, std::move(t));
  }
  return p;
}

ModelParams ModelParams::zeros(const ArchConfig& arch) {
  arch.validate();
  ModelParams p;
  p.arch_ = arch;
  for (auto& [name, shape] : layout(arch)) p.tensors_.emplace(name, Tensor::zeros(shape));
  return p;
}

ModelParams ModelParams::from_tensors(const ArchConfig& arch, ParamMap tensors) {
  arch.validate();
  ModelParams p;
  p.arch_ = arch;
  p.tensors_ = std::move(tensors);
  p.validate();
  return p;
}

const Tensor& ModelParams::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

Tensor& ModelParams::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

void ModelParams::validate() const {
  auto expected = layout(arch_);
  for (const auto& [name, shape] : expected) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw ShapeError("missing parameter '" + name + "'");
    if (it->second.shape() != shape)
      throw ShapeError("parameter '" + name + "' has shape " +
                       shape_string(it->second.shape()) + ", expected " +
                       shape_string(shape));
  }
  if (tensors_.size() != expected.size())
    throw ShapeError("parameter set has " + std::to_string(tensors_.size()) +
                     " entries, architecture declares " +
                     std::to_string(expected.size()));
}

std::string parameter_group(const std::string& name) {
  return name.substr(0, name.find('.'));
}

std::size_t FeatureBatch::max_length() const {
  return lengths.empty() ? 0 : *std::max_element(lengths.begin(), lengths.end());
}

FeatureBatch FeatureBatch::pack(std::span<const FeatureSequence> utts) {
  if (utts.empty()) throw DataError("empty feature batch");
  FeatureBatch fb;
  fb.feat_dim = utts[0].frames.cols();
  for (const auto& u : utts) {
    if (u.frames.size() == 0 || u.frames.rows() == 0)
      throw DataError("utterance '" + u.id + "' has no frames");
    if (u.frames.cols() != fb.feat_dim)
      throw DataError("utterance '" + u.id + "' has feature dim " +
                      std::to_string(u.frames.cols()) + ", batch uses " +
                      std::to_string(fb.feat_dim));
    fb.ids.push_back(u.id);
    fb.lengths.push_back(u.frames.rows());
  }
  const std::size_t b = utts.size(), t_max = fb.max_length(), f = fb.feat_dim;
  fb.frames = Tensor::zeros({t_max * b, f});
  fb.mask.assign(b * t_max, 0);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t t = 0; t < fb.lengths[i]; ++t) {
      fb.mask[i * t_max + t] = 1;
      std::copy(utts[i].frames.data() + t * f, utts[i].frames.data() + (t + 1) * f,
                fb.frames.data() + (t * b + i) * f);
    }
  return fb;
}

std::size_t LabelBatch::max_length() const {
  std::size_t m = 0;
  for (const auto& s : sequences) m = std::max(m, s.size());
  return m;
}

LabelBatch LabelBatch::pack(std::vector<std::vector<int>> sequences) {
  if (sequences.empty()) throw DataError("empty label batch");
  for (const auto& s : sequences)
    if (s.empty()) throw DataError("empty label sequence in batch");
  LabelBatch lb;
  lb.sequences = std::move(sequences);
  const std::size_t l = lb.max_length();
  lb.padded.assign(lb.size() * l, kEos);
  lb.mask.assign(lb.size() * l, 0);
  for (std::size_t i = 0; i < lb.size(); ++i)
    for (std::size_t t = 0; t < lb.sequences[i].size(); ++t) {
      lb.padded[i * l + t] = lb.sequences[i][t];
      lb.mask[i * l + t] = 1;
    }
  return lb;
}

Var SeqVars::utterance(std::size_t i) const {
  std::vector<std::size_t> idx(lengths[i]);
  for (std::size_t u = 0; u < lengths[i]; ++u) idx[u] = u * batch + i;
  return embedding_lookup(rows, idx);
}

Var SeqVars::valid_rows() const {
  std::vector<std::size_t> idx;
  idx.reserve(total_frames());
  for (std::size_t i = 0; i < batch; ++i)
    for (std::size_t u = 0; u < lengths[i]; ++u) idx.push_back(u * batch + i);
  return embedding_lookup(rows, idx);
}

std::size_t SeqVars::total_frames() const {
  std::size_t n = 0;
  for (std::size_t l : lengths) n += l;
  return n;
}

Network::Network(Graph& graph, const ModelParams& params)
    : graph_(graph), params_(params) {}

Var Network::param(const std::string& name) const {
  return graph_.parameter(name, params_.at(name));
}

Network::Gru Network::gru(const std::string& prefix) const {
  return Gru{param(prefix + ".wx"), param(prefix + ".bx"), param(prefix + ".wh"),
             param(prefix + ".bh")};
}

Var gru_cell(Var x_proj, Var h, Var wh, Var bh) {
  const std::size_t n = wh.rows();
  Var hh = add(matmul(h, wh), bh);
  Var z = sigmoid(add(slice(x_proj, 1, 0, n), slice(hh, 1, 0, n)));
  Var r = sigmoid(add(slice(x_proj, 1, n, 2 * n), slice(hh, 1, n, 2 * n)));
  Var cand = tanh(add(slice(x_proj, 1, 2 * n, 3 * n), mul(r, slice(hh, 1, 2 * n, 3 * n))));
  return add(cand, mul(z, sub(h, cand)));
}

Var Network::gru_cell(Var x_proj, Var h, const Gru& w) const {
  return semiasr::gru_cell(x_proj, h, w.wh, w.bh);
}

Tensor Network::step_mask(const std::vector<std::size_t>& lengths,
                          std::size_t t) {
  Tensor m = Tensor::zeros({lengths.size(), 1});
  for (std::size_t i = 0; i < lengths.size(); ++i) m[i] = t < lengths[i] ? 1.0 : 0.0;
  return m;
}

std::vector<Var> Network::gru_sequence(Var rows,
                                       const std::vector<std::size_t>& lengths,
                                       std::size_t batch, std::size_t steps,
                                       const Gru& w, bool reverse) const {
  Var proj = add(matmul(rows, w.wx), w.bx);
  Var h = graph_.constant(Tensor::zeros({batch, arch().hidden}));
  const std::size_t min_len = *std::min_element(lengths.begin(), lengths.end());
  std::vector<Var> out(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t t = reverse ? steps - 1 - k : k;
    Var next = gru_cell(slice(proj, 0, t * batch, (t + 1) * batch), h, w);
    if (t >= min_len) {
      // next*m + h*(1-m) keeps real rows bit-identical to the unpadded run.
      Tensor m = step_mask(lengths, t);
      Tensor keep = m;
      for (double& v : keep.values()) v = 1.0 - v;
      next = add(mul(next, graph_.constant(std::move(m))),
                 mul(h, graph_.constant(std::move(keep))));
    }
    h = next;
    out[t] = h;
  }
  return out;
}

SeqVars Network::bidirectional(const std::string& prefix, const SeqVars& in) const {
  auto fwd = gru_sequence(in.rows, in.lengths, in.batch, in.max_len,
                          gru(prefix + ".fwd"), false);
  auto bwd = gru_sequence(in.rows, in.lengths, in.batch, in.max_len,
                          gru(prefix + ".bwd"), true);
  Var both = concat({concat(fwd, 0), concat(bwd, 0)}, 1);
  Var out = add(matmul(both, param(prefix + ".proj.w")), param(prefix + ".proj.b"));
  return SeqVars{out, in.lengths, in.batch, in.max_len};
}

SeqVars Network::frontend(const FeatureBatch& x) const {
  if (x.size() == 0) throw DataError("empty feature batch");
  if (x.feat_dim != arch().feat_dim)
    throw ShapeError("feature dim " + std::to_string(x.feat_dim) +
                     " does not match model feature dim " +
                     std::to_string(arch().feat_dim));
  const std::size_t b = x.size(), t_max = x.max_length(), s = arch().subsample;
  for (std::size_t len : x.lengths)
    if (len == 0) throw DataError("utterance with zero frames");
  Var proj = add(matmul(graph_.constant(x.frames), param("frontend.in.w")),
                 param("frontend.in.b"));
  auto steps = gru_sequence(proj, x.lengths, b, t_max, gru("frontend.gru"), false);
  const std::size_t u_max = (t_max + s - 1) / s;
  std::vector<Var> picked(u_max);
  for (std::size_t u = 0; u < u_max; ++u)
    picked[u] = steps[std::min(s * u + s - 1, t_max - 1)];
  SeqVars out{concat(picked, 0), {}, b, u_max};
  for (std::size_t len : x.lengths) out.lengths.push_back((len + s - 1) / s);
  return out;
}

SeqVars Network::shared(const SeqVars& in) const {
  if (in.rows.cols() != arch().hidden)
    throw ShapeError("shared encoder expects width " + std::to_string(arch().hidden) +
                     ", got " + std::to_string(in.rows.cols()));
  SeqVars x = in;
  for (std::size_t k = 0; k < arch().shared_layers; ++k)
    x = bidirectional(layer_name("shared", k), x);
  return x;
}

SeqVars Network::text_embed(const LabelBatch& y) const {
  if (y.size() == 0) throw DataError("empty label batch");
  const std::size_t b = y.size(), l = y.max_length(), v = arch().vocab_size;
  std::vector<std::size_t> idx(l * b);
  for (std::size_t i = 0; i < b; ++i) {
    if (y.sequences[i].empty()) throw DataError("empty label sequence");
    for (std::size_t t = 0; t < l; ++t) {
      const int label = y.padded[i * l + t];
      if (label < 0 || static_cast<std::size_t>(label) >= v)
        throw DataError("label index " + std::to_string(label) +
                        " outside vocabulary of " + std::to_string(v));
      idx[t * b + i] = static_cast<std::size_t>(label);
    }
  }
  SeqVars in{embedding_lookup(param("text.embed"), idx), {}, b, l};
  for (const auto& s : y.sequences) in.lengths.push_back(s.size());
  return bidirectional("text", in);
}

Var Network::ctc_log_likelihood(const SeqVars& f_out, const LabelBatch& y) const {
  if (y.size() != f_out.batch) throw ShapeError("CTC batch size mismatch");
  Var lp = log_softmax(add(matmul(f_out.rows, param("ctc.w")), param("ctc.b")));
  SeqVars lp_seq{lp, f_out.lengths, f_out.batch, f_out.max_len};
  std::vector<Var> per_utt;
  per_utt.reserve(y.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    per_utt.push_back(ctc_log_prob(lp_seq.utterance(i), y.sequences[i], kBlank));
  return concat(per_utt, 0);
}

AttentionMemory Network::memory(const SeqVars& b) const {
  AttentionMemory mem;
  mem.values = b.rows;
  mem.keys_t = transpose(matmul(b.rows, param("decoder.att.wk")));
  mem.batch = b.batch;
  const std::size_t n = b.max_len * b.batch;
  bool all_valid = b.batch == 1;
  for (std::size_t len : b.lengths) all_valid = all_valid && len == b.max_len;
  if (!all_valid) {
    Tensor bias = Tensor::full({b.batch, n}, kMaskedScore);
    for (std::size_t i = 0; i < b.batch; ++i)
      for (std::size_t u = 0; u < b.lengths[i]; ++u) bias[i * n + u * b.batch + i] = 0.0;
    mem.mask_bias = graph_.constant(std::move(bias));
  }
  return mem;
}

AttentionMemory Network::single_memory(Var b_rows, std::size_t rows) const {
  AttentionMemory mem;
  mem.values = b_rows;
  mem.keys_t = transpose(matmul(b_rows, param("decoder.att.wk")));
  mem.batch = rows;
  return mem;
}

DecoderVars Network::initial_state(std::size_t batch) const {
  DecoderVars s;
  for (std::size_t k = 0; k < arch().decoder_layers; ++k)
    s.hidden.push_back(graph_.constant(Tensor::zeros({batch, arch().hidden})));
  s.context = graph_.constant(Tensor::zeros({batch, arch().hidden}));
  return s;
}

StepVars Network::step(const AttentionMemory& mem, std::span<const int> prev,
                       const DecoderVars& state) const {
  const std::size_t v = arch().vocab_size;
  std::vector<std::size_t> idx(prev.size());
  for (std::size_t i = 0; i < prev.size(); ++i) {
    if (prev[i] < 0 || static_cast<std::size_t>(prev[i]) >= v)
      throw DataError("previous label " + std::to_string(prev[i]) + " out of range");
    idx[i] = static_cast<std::size_t>(prev[i]);
  }
  Var query = matmul(state.hidden.back(), param("decoder.att.wq"));
  Var scores = scale(matmul(query, mem.keys_t),
                     1.0 / std::sqrt(static_cast<double>(arch().hidden)));
  if (mem.mask_bias.valid()) scores = add(scores, mem.mask_bias);
  Var alpha = softmax(scores);
  Var context = matmul(alpha, mem.values);
  Var x = concat({embedding_lookup(param("decoder.embed"), idx), context}, 1);
  StepVars out;
  out.attention = alpha;
  out.state.context = context;
  for (std::size_t k = 0; k < arch().decoder_layers; ++k) {
    const Gru w = gru(layer_name("decoder", k));
    x = gru_cell(add(matmul(x, w.wx), w.bx), state.hidden[k], w);
    out.state.hidden.push_back(x);
  }
  out.logits = add(matmul(concat({x, context}, 1), param("decoder.out.w")),
                   param("decoder.out.b"));
  return out;
}

Var Network::sequence_log_prob(const SeqVars& b, const LabelBatch& y) const {
  if (y.size() != b.batch)
    throw ShapeError("decoder batch mismatch: " + std::to_string(b.batch) +
                     " embeddings, " + std::to_string(y.size()) + " label sequences");
  const std::size_t bs = y.size(), v = arch().vocab_size, steps = y.max_length() + 1;
  for (const auto& s : y.sequences) {
    if (s.empty()) throw DataError("empty target sequence");
    for (int l : s)
      if (l < 0 || static_cast<std::size_t>(l) >= v || l == kSos || l == kBlank)
        throw DataError("invalid decoder target label " + std::to_string(l));
  }
  AttentionMemory mem = memory(b);
  DecoderVars state = initial_state(bs);
  Var ones = graph_.constant(Tensor::full({v, 1}, 1.0));
  Var total;
  std::vector<int> prev(bs, kSos);
  for (std::size_t t = 0; t < steps; ++t) {
    StepVars out = step(mem, prev, state);
    Tensor pick = Tensor::zeros({bs, v});
    for (std::size_t i = 0; i < bs; ++i) {
      const auto& s = y.sequences[i];
      if (t < s.size()) pick[i * v + s[t]] = 1.0;
      else if (t == s.size()) pick[i * v + kEos] = 1.0;
      prev[i] = t < s.size() ? s[t] : kEos;
    }
    Var col = matmul(mul(log_softmax(out.logits), graph_.constant(std::move(pick))), ones);
    total = total.valid() ? add(total, col) : col;
    state = out.state;
  }
  return total;
}

SeqVars as_batch(Graph& graph, const EmbeddingSequence& b, bool trainable) {
  if (b.vectors.rows() == 0 || b.vectors.size() == 0)
    throw DataError("empty embedding sequence");
  Var rows = trainable ? graph.leaf(b.vectors) : graph.constant(b.vectors);
  return SeqVars{rows, {b.vectors.rows()}, 1, b.vectors.rows()};
}

EmbeddingSequence encode_speech(const ModelParams& params, const FeatureSequence& x) {
  Graph g(false);
  Network net(g, params);
  FeatureBatch fb = FeatureBatch::pack(std::span<const FeatureSequence>(&x, 1));
  return {net.encode_speech(fb).rows.value(), Source::kSpeech};
}

EmbeddingSequence frontend_output(const ModelParams& params, const FeatureSequence& x) {
  Graph g(false);
  Network net(g, params);
  FeatureBatch fb = FeatureBatch::pack(std::span<const FeatureSequence>(&x, 1));
  return {net.frontend(fb).rows.value(), Source::kSpeech};
}

EmbeddingSequence embed_text(const ModelParams& params, const LabelSequence& y) {
  if (y.indices.empty()) throw DataError("cannot embed an empty label sequence");
  Graph g(false);
  Network net(g, params);
  return {net.embed_text(LabelBatch::pack({y.indices})).rows.value(), Source::kText};
}

EmbeddingSequence apply_shared(const ModelParams& params, const EmbeddingSequence& b) {
  Graph g(false);
  Network net(g, params);
  return {net.shared(as_batch(g, b)).rows.value(), b.source};
}

DecoderState DecoderState::initial(const ArchConfig& arch) {
  DecoderState s;
  for (std::size_t k = 0; k < arch.decoder_layers; ++k)
    s.hidden.push_back(Tensor::zeros({1, arch.hidden}));
  s.context = Tensor::zeros({1, arch.hidden});
  s.prev_label = kSos;
  return s;
}

StepResult decode_step(const ModelParams& params, int prev_label,
                       const DecoderState& state, const EmbeddingSequence& b) {
  const ArchConfig& a = params.arch();
  if (state.hidden.size() != a.decoder_layers)
    throw ShapeError("decoder state has " + std::to_string(state.hidden.size()) +
                     " layers, model has " + std::to_string(a.decoder_layers));
  Graph g(false);
  Network net(g, params);
  AttentionMemory mem = net.memory(as_batch(g, b));
  DecoderVars dv;
  for (const Tensor& h : state.hidden) {
    if (h.rows() != 1 || h.cols() != a.hidden) throw ShapeError("bad decoder state width");
    dv.hidden.push_back(g.constant(h));
  }
  dv.context = g.constant(state.context);
  const int prev[1] = {prev_label};
  StepVars out = net.step(mem, prev, dv);
  StepResult r;
  const Tensor probs = softmax(out.logits).value();
  r.distribution.assign(probs.values().begin(), probs.values().end());
  r.attention.assign(out.attention.value().values().begin(),
                     out.attention.value().values().end());
  for (const Var& h : out.state.hidden) r.state.hidden.push_back(h.value());
  r.state.context = out.state.context.value();
  r.state.prev_label = prev_label;
  return r;
}

double sequence_log_prob(const ModelParams& params, const EmbeddingSequence& b,
                         const LabelSequence& y) {
  if (y.indices.empty()) throw DataError("sequence_log_prob needs a non-empty target");
  Graph g(false);
  Network net(g, params);
  return net.sequence_log_prob(as_batch(g, b), LabelBatch::pack({y.indices})).value().item();
}

double ctc_log_prob(const ModelParams& params, const EmbeddingSequence& f_out,
                    const LabelSequence& y) {
  Graph g(false);
  Network net(g, params);
  return net.ctc_log_likelihood(as_batch(g, f_out), LabelBatch::pack({y.indices}))
      .value()
      .item();
}

}  // namespace semiasr
