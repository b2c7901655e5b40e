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

#include "semiasr/decoder.hpp"

#include <algorithm>
#include <cmath>

#include "semiasr/errors.hpp"
#include "semiasr/vocabulary.hpp"

namespace semiasr {

void BeamConfig::validate() const {
  if (width < 1) throw ConfigError("beam width must be >= 1");
  if (!(max_len_factor > 0)) throw ConfigError("max length factor must be positive");
  if (lm_weight < 0) throw ConfigError("LM weight must be >= 0");
  if (lm == nullptr && lm_weight != 0.0)
    throw ConfigError("LM weight is nonzero but no language model was supplied");
}

EncodedBatch EncodedBatch::from(const SeqVars& s) {
  return EncodedBatch{s.rows.value(), s.lengths, s.batch, s.max_len};
}

EmbeddingSequence EncodedBatch::utterance(std::size_t i) const {
  const std::size_t h = rows.cols();
  Tensor out = Tensor::zeros({lengths[i], h});
  for (std::size_t u = 0; u < lengths[i]; ++u)
    std::copy(rows.data() + (u * batch + i) * h, rows.data() + (u * batch + i + 1) * h,
              out.data() + u * h);
  return {std::move(out), Source::kSpeech};
}

std::size_t max_decode_steps(std::size_t frames, double factor) {
  const double steps = std::ceil(factor * static_cast<double>(frames) - 1e-9);
  return std::max<std::size_t>(1, static_cast<std::size_t>(steps));
}

bool decodable(int label) { return label != kSos && label != kBlank; }

std::vector<double> fuse_lm_log_scores(std::span<const double> model_log_probs,
                                       std::span<const double> lm_log_probs,
                                       double gamma) {
  if (model_log_probs.size() != lm_log_probs.size())
    throw ShapeError("shallow fusion: model vocabulary " +
                     std::to_string(model_log_probs.size()) + " vs LM vocabulary " +
                     std::to_string(lm_log_probs.size()));
  std::vector<double> out(model_log_probs.size());
  for (std::size_t c = 0; c < out.size(); ++c)
    out[c] = gamma == 0.0 ? model_log_probs[c]
                          : model_log_probs[c] + gamma * lm_log_probs[c];
  return out;
}

std::vector<double> fuse_lm_score(std::span<const double> model_probs,
                                  std::span<const double> lm_probs, double gamma) {
  std::vector<double> lm(lm_probs.size()), model(model_probs.size());
  for (std::size_t c = 0; c < model.size(); ++c) model[c] = std::log(model_probs[c]);
  for (std::size_t c = 0; c < lm.size(); ++c) lm[c] = std::log(lm_probs[c]);
  return fuse_lm_log_scores(model, lm, gamma);
}

std::vector<Hypothesis> greedy_decode(const ModelParams& params,
                                      const EncodedBatch& b, double max_len_factor) {
  if (b.batch == 0) throw DataError("greedy decode of an empty batch");
  Graph g(false);
  Network net(g, params);
  SeqVars seq{g.constant(b.rows), b.lengths, b.batch, b.max_len};
  AttentionMemory mem = net.memory(seq);
  DecoderVars state = net.initial_state(b.batch);
  const std::size_t v = params.arch().vocab_size;

  std::vector<Hypothesis> hyps(b.batch);
  std::vector<std::size_t> cap(b.batch);
  std::size_t max_cap = 0;
  for (std::size_t i = 0; i < b.batch; ++i) {
    cap[i] = max_decode_steps(b.lengths[i], max_len_factor);
    max_cap = std::max(max_cap, cap[i]);
  }
  std::vector<int> prev(b.batch, kSos);
  std::vector<bool> done(b.batch, false);
  for (std::size_t t = 0; t < max_cap; ++t) {
    StepVars out = net.step(mem, prev, state);
    const Tensor lp = log_softmax(out.logits).value();
    bool all_done = true;
    for (std::size_t i = 0; i < b.batch; ++i) {
      if (done[i]) continue;
      int best = -1;
      for (std::size_t c = 0; c < v; ++c) {
        if (!decodable(static_cast<int>(c))) continue;
        if (best < 0 || lp[i * v + c] > lp[i * v + best]) best = static_cast<int>(c);
      }
      Hypothesis& h = hyps[i];
      h.score += lp[i * v + best];
      h.step_scores.push_back(lp[i * v + best]);
      if (best == kEos) {
        h.completed = true;
        done[i] = true;
      } else {
        h.labels.push_back(best);
        if (h.labels.size() >= cap[i]) done[i] = true;
      }
      prev[i] = best;
      all_done = all_done && done[i];
    }
    if (all_done) break;
    state = out.state;
  }
  return hyps;
}

Hypothesis greedy_decode(const ModelParams& params, const EmbeddingSequence& b,
                         double max_len_factor) {
  if (b.vectors.rows() == 0) throw DataError("greedy decode of an empty embedding");
  EncodedBatch eb{b.vectors, {b.vectors.rows()}, 1, b.vectors.rows()};
  return greedy_decode(params, eb, max_len_factor).front();
}

namespace {

struct BeamEntry {
  Hypothesis hyp;
  std::size_t parent = 0;  // row in the previous step's state
};

bool ranks_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.labels.size() != b.labels.size()) return a.labels.size() < b.labels.size();
  return a.labels < b.labels;
}

Var gather_rows(Var x, const std::vector<std::size_t>& rows) {
  return embedding_lookup(x, rows);
}

}  // namespace

std::vector<Hypothesis> beam_search(const ModelParams& params,
                                    const EmbeddingSequence& b,
                                    const BeamConfig& cfg) {
  cfg.validate();
  if (b.vectors.rows() == 0) throw DataError("beam search over an empty embedding");
  const std::size_t v = params.arch().vocab_size;
  const bool use_lm = cfg.lm != nullptr && cfg.lm_weight != 0.0;
  if (use_lm && cfg.lm->arch().vocab_size != v)
    throw ShapeError("LM vocabulary " + std::to_string(cfg.lm->arch().vocab_size) +
                     " differs from model vocabulary " + std::to_string(v));

  Graph g(false);
  Network net(g, params);
  std::optional<LmNetwork> lm;
  if (use_lm) lm.emplace(g, *cfg.lm);
  AttentionMemory mem = net.single_memory(g.constant(b.vectors), 1);
  DecoderVars state = net.initial_state(1);
  Var lm_state = use_lm ? lm->initial_state(1) : Var{};

  const std::size_t cap = max_decode_steps(b.vectors.rows(), cfg.max_len_factor);
  std::vector<Hypothesis> live(1);
  std::vector<Hypothesis> finished;
  std::vector<int> prev{kSos};

  for (std::size_t t = 0; t < cap && !live.empty(); ++t) {
    StepVars out = net.step(mem, prev, state);
    const Tensor lp = log_softmax(out.logits).value();
    Tensor lm_lp;
    Var lm_next;
    if (use_lm) {
      auto [lp_lm, h_lm] = lm->step(prev, lm_state);
      lm_lp = lp_lm.value();
      lm_next = h_lm;
    }
    std::vector<BeamEntry> cand;
    cand.reserve(live.size() * v);
    for (std::size_t r = 0; r < live.size(); ++r) {
      std::span<const double> model_row(lp.data() + r * v, v);
      std::vector<double> fused =
          use_lm ? fuse_lm_log_scores(model_row,
                                      std::span<const double>(lm_lp.data() + r * v, v),
                                      cfg.lm_weight)
                 : std::vector<double>(model_row.begin(), model_row.end());
      for (std::size_t c = 0; c < v; ++c) {
        if (!decodable(static_cast<int>(c))) continue;
        BeamEntry e{live[r], r};
        e.hyp.score += fused[c];
        e.hyp.step_scores.push_back(fused[c]);
        if (static_cast<int>(c) == kEos) e.hyp.completed = true;
        else e.hyp.labels.push_back(static_cast<int>(c));
        cand.push_back(std::move(e));
      }
    }
    const std::size_t keep = std::min(cfg.width, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + keep, cand.end(),
                      [](const BeamEntry& a, const BeamEntry& b) {
                        if (a.hyp.score != b.hyp.score) return a.hyp.score > b.hyp.score;
                        if (a.hyp.completed != b.hyp.completed) return a.hyp.completed;
                        return a.hyp.labels < b.hyp.labels;
                      });
    cand.resize(keep);

    std::vector<Hypothesis> next_live;
    std::vector<std::size_t> parents;
    prev.clear();
    for (BeamEntry& e : cand) {
      if (e.hyp.completed) {
        finished.push_back(std::move(e.hyp));
      } else {
        prev.push_back(e.hyp.labels.back());
        parents.push_back(e.parent);
        next_live.push_back(std::move(e.hyp));
      }
    }
    live = std::move(next_live);
    if (live.empty()) break;

    // Extending only lowers scores, so once `width` finished hypotheses all
    // beat every live one the ranking is final.
    if (finished.size() >= cfg.width) {
      std::sort(finished.begin(), finished.end(), ranks_before);
      if (finished[cfg.width - 1].score >= live.front().score) {
        live.clear();
        break;
      }
    }
    DecoderVars gathered;
    for (const Var& h : out.state.hidden) gathered.hidden.push_back(gather_rows(h, parents));
    gathered.context = gather_rows(out.state.context, parents);
    state = gathered;
    if (use_lm) lm_state = gather_rows(lm_next, parents);
  }

  std::vector<Hypothesis> result = finished.empty() ? live : finished;
  std::sort(result.begin(), result.end(), ranks_before);
  if (result.size() > cfg.width) result.resize(cfg.width);
  return result;
}

}  // namespace semiasr
