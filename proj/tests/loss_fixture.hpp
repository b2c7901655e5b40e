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

// Small model and batches for the loss tests, with independent oracles.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "semiasr/losses.hpp"

namespace semiasr::testing {

inline ArchConfig tiny_arch() {
  ArchConfig a;
  a.feat_dim = 3;
  a.hidden = 3;
  a.vocab_size = 6;
  return a;
}

// Independent squared-MMD evaluation with explicit loops.
inline double mmd_oracle(const Tensor& p, const Tensor& q, double sigma, bool unbiased) {
  auto k = [&](const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
    double d = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) {
      const double x = a.at(i, c) - b.at(j, c);
      d += x * x;
    }
    return std::exp(-d / (2.0 * sigma * sigma));
  };
  const std::size_t m = p.rows(), n = q.rows();
  double pp = 0.0, qq = 0.0, pq = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (!unbiased || i != j) pp += k(p, i, p, j);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (!unbiased || i != j) qq += k(q, i, q, j);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) pq += k(p, i, q, j);
  const double dm = static_cast<double>(m), dn = static_cast<double>(n);
  if (unbiased) return pp / (dm * (dm - 1)) + qq / (dn * (dn - 1)) - 2.0 * pq / (dm * dn);
  return pp / (dm * dm) + qq / (dn * dn) - 2.0 * pq / (dm * dn);
}

inline double median_oracle(const Tensor& p, const Tensor& q) {
  std::vector<std::vector<double>> rows;
  for (const Tensor* t : {&p, &q})
    for (std::size_t i = 0; i < t->rows(); ++i)
      rows.emplace_back(t->data() + i * t->cols(), t->data() + (i + 1) * t->cols());
  std::vector<double> d;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < rows[i].size(); ++c)
        s += (rows[i][c] - rows[j][c]) * (rows[i][c] - rows[j][c]);
      d.push_back(std::sqrt(s));
    }
  std::sort(d.begin(), d.end());
  const std::size_t n = d.size();
  return n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
}

inline KernelConfig fixed_sigma(double s) {
  KernelConfig k;
  k.sigma = s;
  return k;
}

struct Fixture {
  ModelParams params;
  PairedBatch paired;
  FeatureBatch speech;
  LabelBatch text;
};

inline Fixture make_fixture(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "fixture"));
  Fixture f;
  f.params = ModelParams::initialize(tiny_arch(), derive_seed(seed, "params"));
  auto utt = [&](const char* id, std::size_t t) {
    return FeatureSequence{id, random_tensor(rng, {t, 3})};
  };
  auto label = [&] { return static_cast<int>(rng.integer(4, 5)); };
  std::vector<FeatureSequence> px{utt("p0", 6), utt("p1", 8)};
  f.paired.features = FeatureBatch::pack(px);
  f.paired.labels = LabelBatch::pack({{label(), label()}, {label()}});
  // Alignable whatever the labels: 3 and 4 frames for at most 2 labels.
  std::vector<FeatureSequence> sx{utt("s0", 5), utt("s1", 7)};
  f.speech = FeatureBatch::pack(sx);
  f.text = LabelBatch::pack({{label(), label(), label()}, {label(), label()}});
  return f;
}

struct LossCase {
  const char* name;
  NetBuild build;
};

// Every loss, with a fixed kernel bandwidth so the median heuristic does
// not move under perturbation.
inline std::vector<LossCase> loss_cases(const Fixture& f, const KernelConfig& k) {
  return {
      {"pair", [&](const Network& n) { return loss_pair(n, f.paired, 0.3); }},
      {"text", [&](const Network& n) { return loss_text(n, f.text); }},
      {"dom", [&](const Network& n) { return loss_dom(n, f.speech, f.text, k); }},
      {"idt_speech", [&](const Network& n) { return loss_idt(n, n.encode_speech(f.speech)); }},
      {"idt_text", [&](const Network& n) { return loss_idt(n, n.embed_text(f.text)); }},
      {"cyc_dom",
       [&](const Network& n) { return loss_cyc_dom(n, n.encode_speech(f.speech), k, 1.5); }},
  };
}

inline const std::vector<Variant> kVariants{Variant::kInitial, Variant::kBaseline,
                                            Variant::kRetrainIdt, Variant::kRetrainCyc,
                                            Variant::kRetrainCycIdt};

// The variant formula written out independently of the library.
inline double expected_total(const std::map<std::string, double>& c, Variant v, double alpha,
                             double beta) {
  auto get = [&](const char* key) {
    auto it = c.find(key);
    return it == c.end() ? 0.0 : it->second;
  };
  if (v == Variant::kInitial) return get("pair");
  double unpair = 0.0;
  switch (v) {
    case Variant::kBaseline: unpair = beta * get("dom") + (1 - beta) * get("text"); break;
    case Variant::kRetrainIdt:
      unpair = beta * get("idt_speech") + (1 - beta) * get("idt_text");
      break;
    case Variant::kRetrainCyc: unpair = beta * get("cyc_dom") + (1 - beta) * get("text"); break;
    default:
      unpair = beta * (get("cyc_dom") + get("idt_speech")) +
               (1 - beta) * (get("text") + get("idt_text"));
  }
  return alpha * get("pair") + (1 - alpha) * unpair;
}

}  // namespace semiasr::testing
