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

#include "semiasr/losses.hpp"

#include <algorithm>
#include <cmath>

#include "semiasr/ctc.hpp"
#include "semiasr/decoder.hpp"
#include "semiasr/errors.hpp"
#include "semiasr/vocabulary.hpp"

namespace semiasr {

void KernelConfig::validate() const {
  if (sigma && !(*sigma > 0))
    throw ConfigError("RBF bandwidth must be positive, got " + std::to_string(*sigma));
}

double median_heuristic_sigma(const Tensor& p, const Tensor& q) {
  const std::size_t d = p.cols();
  if (q.cols() != d) throw ShapeError("median heuristic: sample widths differ");
  std::vector<const double*> pts;
  for (std::size_t i = 0; i < p.rows(); ++i) pts.push_back(p.data() + i * d);
  for (std::size_t i = 0; i < q.rows(); ++i) pts.push_back(q.data() + i * d);
  std::vector<double> dist;
  dist.reserve(pts.size() * (pts.size() - 1) / 2);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = pts[i][k] - pts[j][k];
        s += diff * diff;
      }
      dist.push_back(std::sqrt(s));
    }
  if (dist.empty()) return 1.0;
  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + mid, dist.end());
  double median = dist[mid];
  if (dist.size() % 2 == 0) {
    const double lower = *std::max_element(dist.begin(), dist.begin() + mid);
    median = 0.5 * (median + lower);
  }
  return median > 0 ? median : 1.0;
}

Var mmd(Var p, Var q, const KernelConfig& kernel) {
  kernel.validate();
  const std::size_t m = p.rows(), n = q.rows();
  if (m == 0 || n == 0 || p.value().size() == 0 || q.value().size() == 0)
    throw DataError("MMD needs non-empty sample sets");
  if (p.cols() != q.cols())
    throw ShapeError("MMD sample widths differ: " + std::to_string(p.cols()) + " vs " +
                     std::to_string(q.cols()));
  const double sigma =
      kernel.sigma ? *kernel.sigma : median_heuristic_sigma(p.value(), q.value());
  const double c = -1.0 / (2.0 * sigma * sigma);
  Var kpp = exp(scale(sq_dist(p, p), c));
  Var kqq = exp(scale(sq_dist(q, q), c));
  Var kpq = exp(scale(sq_dist(p, q), c));
  if (kernel.estimator == MmdEstimator::kBiased)
    return add(add(mean(kpp), mean(kqq)), scale(mean(kpq), -2.0));
  if (m < 2 || n < 2) throw DataError("unbiased MMD needs at least two samples per set");
  Graph& g = p.graph();
  const double dm = static_cast<double>(m), dn = static_cast<double>(n);
  // The kernel diagonal is exactly 1.
  Var pp = scale(sub(sum(kpp), g.constant(Tensor::scalar(dm))), 1.0 / (dm * (dm - 1)));
  Var qq = scale(sub(sum(kqq), g.constant(Tensor::scalar(dn))), 1.0 / (dn * (dn - 1)));
  return add(add(pp, qq), scale(mean(kpq), -2.0));
}

double mmd(const Tensor& p, const Tensor& q, const KernelConfig& kernel) {
  Graph g(false);
  return mmd(g.constant(p), g.constant(q), kernel).value().item();
}

namespace {

struct PairTerms {
  Var total;
  Var ctc;  // -mean CTC log-likelihood, when computed
};

PairTerms pair_terms(const Network& net, const PairedBatch& batch, double ctc_weight) {
  const std::size_t b = batch.features.size();
  if (b == 0) throw DataError("empty paired batch");
  if (batch.labels.size() != b)
    throw DataError("paired batch has " + std::to_string(b) + " utterances but " +
                    std::to_string(batch.labels.size()) + " transcripts");
  const double inv = -1.0 / static_cast<double>(b);
  SeqVars f = net.frontend(batch.features);
  PairTerms out;
  Var att;
  if (ctc_weight > 0.0) {
    for (std::size_t i = 0; i < b; ++i)
      if (f.lengths[i] < ctc_min_frames(batch.labels.sequences[i]))
        throw DataError("target unalignable for utterance '" + batch.features.ids[i] +
                        "': " + std::to_string(f.lengths[i]) + " frames for " +
                        std::to_string(batch.labels.sequences[i].size()) + " labels");
    out.ctc = scale(sum(net.ctc_log_likelihood(f, batch.labels)), inv);
  }
  if (ctc_weight < 1.0)
    att = scale(sum(net.sequence_log_prob(net.shared(f), batch.labels)), inv);
  if (ctc_weight == 0.0) out.total = att;
  else if (ctc_weight == 1.0) out.total = out.ctc;
  else out.total = add(scale(out.ctc, ctc_weight), scale(att, 1.0 - ctc_weight));
  return out;
}

Var text_from_embedding(const Network& net, const SeqVars& b_text, const LabelBatch& y) {
  return scale(sum(net.sequence_log_prob(b_text, y)),
               -1.0 / static_cast<double>(y.size()));
}

Var mask_rows(Var x, const SeqVars& s) {
  bool padded = false;
  for (std::size_t len : s.lengths) padded = padded || len != s.max_len;
  if (!padded) return x;
  Tensor m = Tensor::zeros({s.max_len * s.batch, 1});
  for (std::size_t i = 0; i < s.batch; ++i)
    for (std::size_t u = 0; u < s.lengths[i]; ++u) m[u * s.batch + i] = 1.0;
  return mul(x, x.graph().constant(std::move(m)));
}

}  // namespace

Var loss_pair(const Network& net, const PairedBatch& batch, double ctc_weight) {
  if (ctc_weight < 0.0 || ctc_weight > 1.0)
    throw ConfigError("CTC weight must lie in [0, 1]");
  return pair_terms(net, batch, ctc_weight).total;
}

Var loss_text(const Network& net, const LabelBatch& text) {
  if (text.size() == 0) throw DataError("empty text batch");
  return text_from_embedding(net, net.embed_text(text), text);
}

Var loss_dom(const Network& net, const FeatureBatch& speech, const LabelBatch& text,
             const KernelConfig& kernel) {
  return mmd(net.encode_speech(speech).valid_rows(), net.embed_text(text).valid_rows(),
             kernel);
}

Var loss_idt(const Network& net, const SeqVars& b) {
  SeqVars mapped = net.shared(b);
  Var diff = mask_rows(sub(mapped.rows, b.rows), b);
  return scale(l1_norm(diff), 1.0 / static_cast<double>(b.total_frames()));
}

Var loss_cyc_dom(const Network& net, const SeqVars& speech_embeddings,
                 const KernelConfig& kernel, double max_len_factor,
                 CycleDiagnostics* diagnostics) {
  std::vector<Hypothesis> hyps =
      greedy_decode(net.params(), EncodedBatch::from(speech_embeddings), max_len_factor);
  std::vector<std::vector<int>> labels;
  labels.reserve(hyps.size());
  std::size_t empty = 0;
  for (auto& h : hyps) {
    if (h.labels.empty()) {
      labels.push_back({kUnk});
      ++empty;
    } else {
      labels.push_back(std::move(h.labels));
    }
  }
  if (diagnostics) {
    diagnostics->utterances += hyps.size();
    diagnostics->empty_hypotheses += empty;
  }
  SeqVars cycle = net.embed_text(LabelBatch::pack(std::move(labels)));
  return mmd(speech_embeddings.valid_rows(), cycle.valid_rows(), kernel);
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kInitial: return "Initial";
    case Variant::kBaseline: return "Baseline";
    case Variant::kRetrainIdt: return "Retrain-idt";
    case Variant::kRetrainCyc: return "Retrain-cyc";
    case Variant::kRetrainCycIdt: return "Retrain-cyc+idt";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::kInitial, Variant::kBaseline, Variant::kRetrainIdt,
                    Variant::kRetrainCyc, Variant::kRetrainCycIdt})
    if (variant_name(v) == name) return v;
  throw ConfigError("unknown variant '" + std::string(name) +
                    "' (expected Initial, Baseline, Retrain-idt, Retrain-cyc or "
                    "Retrain-cyc+idt)");
}

void ObjectiveConfig::validate() const {
  auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!unit(alpha)) throw ConfigError("alpha must lie in [0, 1]");
  if (!unit(beta)) throw ConfigError("beta must lie in [0, 1]");
  if (!unit(ctc_weight)) throw ConfigError("CTC weight must lie in [0, 1]");
  if (!(max_len_factor > 0)) throw ConfigError("max length factor must be positive");
  kernel.validate();
}

namespace {

// Weighted sum that returns a lone unit-weight term unchanged.
Var weighted(const std::vector<std::pair<double, Var>>& terms) {
  Var out;
  for (const auto& [w, v] : terms) {
    if (w == 0.0) continue;
    Var t = w == 1.0 ? v : scale(v, w);
    out = out.valid() ? add(out, t) : t;
  }
  return out;
}

}  // namespace

ObjectiveTerms combined_objective(const Network& net, const ObjectiveConfig& cfg,
                                  const PairedBatch* paired, const FeatureBatch* speech,
                                  const LabelBatch* text) {
  cfg.validate();
  const double alpha = cfg.variant == Variant::kInitial ? 1.0 : cfg.alpha;
  const double beta = cfg.beta;
  const bool want_pair = alpha > 0.0;
  const bool want_unpair = alpha < 1.0;
  const bool want_speech = want_unpair && beta > 0.0;
  const bool want_text = want_unpair && beta < 1.0;
  const std::string vname(variant_name(cfg.variant));
  if (want_pair && paired == nullptr)
    throw DataError(vname + ": alpha > 0 requires a paired batch");
  if (want_speech && speech == nullptr)
    throw DataError(vname + ": beta > 0 requires an unpaired speech batch");
  if (want_text && text == nullptr)
    throw DataError(vname + ": beta < 1 requires an unpaired text batch");
  // The inter-domain loss compares speech against text embeddings.
  if (cfg.variant == Variant::kBaseline && want_speech && text == nullptr)
    throw DataError(vname + ": the inter-domain loss requires an unpaired text batch");

  ObjectiveTerms out;
  auto& comp = out.breakdown.components;
  Var pair;
  if (want_pair) {
    PairTerms pt = pair_terms(net, *paired, cfg.ctc_weight);
    pair = pt.total;
    comp["pair"] = pair.value().item();
    if (pt.ctc.valid()) comp["ctc"] = pt.ctc.value().item();
  }

  std::vector<std::pair<double, Var>> speech_terms, text_terms;
  if (want_unpair) {
    std::optional<SeqVars> b, b_text;
    if (want_speech) b = net.encode_speech(*speech);
    if (want_text) b_text = net.embed_text(*text);
    auto record = [&](const char* key, Var v) {
      comp[key] = v.value().item();
      return v;
    };
    switch (cfg.variant) {
      case Variant::kBaseline:
        if (want_speech) {
          if (!b_text) b_text = net.embed_text(*text);
          speech_terms.push_back(
              {1.0, record("dom", mmd(b->valid_rows(), b_text->valid_rows(), cfg.kernel))});
        }
        if (want_text)
          text_terms.push_back({1.0, record("text", text_from_embedding(net, *b_text, *text))});
        break;
      case Variant::kRetrainIdt:
        if (want_speech) speech_terms.push_back({1.0, record("idt_speech", loss_idt(net, *b))});
        if (want_text) text_terms.push_back({1.0, record("idt_text", loss_idt(net, *b_text))});
        break;
      case Variant::kRetrainCyc:
        if (want_speech)
          speech_terms.push_back({1.0, record("cyc_dom", loss_cyc_dom(net, *b, cfg.kernel,
                                                                      cfg.max_len_factor,
                                                                      &out.cycle))});
        if (want_text)
          text_terms.push_back({1.0, record("text", text_from_embedding(net, *b_text, *text))});
        break;
      case Variant::kRetrainCycIdt:
        if (want_speech) {
          speech_terms.push_back({1.0, record("cyc_dom", loss_cyc_dom(net, *b, cfg.kernel,
                                                                      cfg.max_len_factor,
                                                                      &out.cycle))});
          speech_terms.push_back({1.0, record("idt_speech", loss_idt(net, *b))});
        }
        if (want_text) {
          text_terms.push_back({1.0, record("text", text_from_embedding(net, *b_text, *text))});
          text_terms.push_back({1.0, record("idt_text", loss_idt(net, *b_text))});
        }
        break;
      case Variant::kInitial:
        break;
    }
  }

  Var unpair;
  if (want_unpair) {
    std::vector<std::pair<double, Var>> sides;
    if (Var s = weighted(speech_terms); s.valid()) sides.push_back({beta, s});
    if (Var t = weighted(text_terms); t.valid()) sides.push_back({1.0 - beta, t});
    unpair = weighted(sides);
  }
  out.total = weighted({{alpha, pair}, {1.0 - alpha, unpair}});
  out.breakdown.total = out.total.value().item();
  return out;
}

double objective_from_components(const std::map<std::string, double>& c,
                                 const ObjectiveConfig& cfg) {
  auto get = [&](const char* key) {
    auto it = c.find(key);
    return it == c.end() ? 0.0 : it->second;
  };
  const double pair = get("pair");
  if (cfg.variant == Variant::kInitial || cfg.alpha == 1.0) return pair;
  const double b = cfg.beta;
  double unpair = 0.0;
  switch (cfg.variant) {
    case Variant::kBaseline: unpair = b * get("dom") + (1 - b) * get("text"); break;
    case Variant::kRetrainIdt:
      unpair = b * get("idt_speech") + (1 - b) * get("idt_text");
      break;
    case Variant::kRetrainCyc: unpair = b * get("cyc_dom") + (1 - b) * get("text"); break;
    case Variant::kRetrainCycIdt:
      unpair = b * (get("cyc_dom") + get("idt_speech")) +
               (1 - b) * (get("text") + get("idt_text"));
      break;
    case Variant::kInitial: break;
  }
  return cfg.alpha * pair + (1 - cfg.alpha) * unpair;
}

}  // namespace semiasr
