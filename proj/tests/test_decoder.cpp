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

#include <doctest.h>

#include <cmath>
#include <vector>

#include "beam_oracle.hpp"
#include "gradcheck.hpp"
#include "semiasr/decoder.hpp"
#include "semiasr/errors.hpp"
#include "semiasr/lm.hpp"
#include "semiasr/vocabulary.hpp"

namespace semiasr {
namespace {

using namespace testing;

TEST_CASE("exhaustive beam equals brute-force argmax") {
  const std::vector<int> symbols{kUnk, 4};  // with EOS: three decodable symbols
  std::size_t agreements = 0;
  for (double gamma : {0.0, 0.5}) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      ModelParams p = toy_model(seed);
      LmParams lm = toy_lm(seed + 100);
      Rng rng(seed);
      // U=2 frames and factor 1.5 cap decoding at 3 steps.
      EmbeddingSequence b{random_tensor(rng, {2, 4}), Source::kSpeech};
      REQUIRE(max_decode_steps(2, 1.5) == 3);

      std::vector<std::vector<int>> all;
      std::vector<int> prefix;
      enumerate_hypotheses(symbols, 2, prefix, all);
      double best = -INFINITY;
      std::vector<int> argmax;
      for (const auto& y : all) {
        const double s = fused_score(p, b, gamma > 0 ? &lm : nullptr, gamma, y);
        if (s > best) {
          best = s;
          argmax = y;
        }
      }
      BeamConfig cfg;
      cfg.width = 27;
      cfg.max_len_factor = 1.5;
      cfg.lm_weight = gamma;
      cfg.lm = gamma > 0 ? &lm : nullptr;
      auto hyps = beam_search(p, b, cfg);
      REQUIRE_FALSE(hyps.empty());
      INFO("gamma " << gamma << " seed " << seed);
      CHECK(hyps.front().completed);
      CHECK(hyps.front().labels == argmax);
      CHECK(std::abs(hyps.front().score - best) < 1e-10);
      // Exhaustive width returns every completed hypothesis.
      CHECK(hyps.size() == all.size());
      ++agreements;
    }
  }
  CHECK(agreements == 60);
}

TEST_CASE("width one is greedy, bit for bit") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    ModelParams p = toy_model(seed, 7);
    Rng rng(seed + 7);
    const auto u = static_cast<std::size_t>(rng.integer(1, 6));
    EmbeddingSequence b{random_tensor(rng, {u, 4}), Source::kSpeech};
    Hypothesis g = greedy_decode(p, b, 1.5);
    BeamConfig cfg;
    cfg.width = 1;
    auto beam = beam_search(p, b, cfg);
    REQUIRE(beam.size() == 1);
    CHECK(beam[0].labels == g.labels);
    CHECK(beam[0].score == g.score);
    CHECK(beam[0].step_scores == g.step_scores);
    CHECK(beam[0].completed == g.completed);
  }
}

TEST_CASE("batched greedy equals per-utterance greedy") {
  ModelParams p = toy_model(3, 7);
  Rng rng(3);
  std::vector<FeatureSequence> xs;
  for (std::size_t t : {5u, 9u, 2u}) xs.push_back({"u", random_tensor(rng, {t, 3})});
  Graph g(false);
  Network net(g, p);
  EncodedBatch eb = EncodedBatch::from(net.encode_speech(FeatureBatch::pack(xs)));
  auto batched = greedy_decode(p, eb, 1.5);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    Hypothesis single = greedy_decode(p, encode_speech(p, xs[i]), 1.5);
    CHECK(batched[i].labels == single.labels);
    CHECK(std::abs(batched[i].score - single.score) < 1e-10);
  }
}

TEST_CASE("scores are the sum of step scores") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ModelParams p = toy_model(seed, 7);
    LmParams lm = toy_lm(seed, 7);
    Rng rng(seed);
    EmbeddingSequence b{random_tensor(rng, {4, 4}), Source::kSpeech};
    BeamConfig cfg;
    cfg.width = 4;
    cfg.lm = &lm;
    cfg.lm_weight = 0.3;
    for (const Hypothesis& h : beam_search(p, b, cfg)) {
      double s = 0.0;
      for (double x : h.step_scores) s += x;
      CHECK(std::abs(s - h.score) < 1e-12);
      for (int l : h.labels) {
        CHECK(l != kBlank);
        CHECK(l != kSos);
        CHECK(l != kEos);
      }
    }
  }
}

TEST_CASE("hypotheses are ranked by score, then length, then labels") {
  ModelParams p = toy_model(5, 7);
  Rng rng(5);
  EmbeddingSequence b{random_tensor(rng, {3, 4}), Source::kSpeech};
  BeamConfig cfg;
  cfg.width = 8;
  auto hyps = beam_search(p, b, cfg);
  for (std::size_t i = 1; i < hyps.size(); ++i) CHECK(hyps[i - 1].score >= hyps[i].score);
}

TEST_CASE("a wider beam never finds a worse best hypothesis") {
  std::size_t checked = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    ModelParams p = toy_model(seed, 7);
    Rng rng(seed + 50);
    EmbeddingSequence b{random_tensor(rng, {3, 4}), Source::kSpeech};
    double last = -INFINITY;
    for (std::size_t w : {1u, 2u, 4u, 8u, 64u}) {
      BeamConfig cfg;
      cfg.width = w;
      const double best = beam_search(p, b, cfg).front().score;
      INFO("seed " << seed << " width " << w);
      CHECK(best >= last);
      last = best;
      ++checked;
    }
  }
  CHECK(checked == 150);
}

TEST_CASE("zero LM weight reproduces the no-LM ranking") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ModelParams p = toy_model(seed, 7);
    LmParams lm = toy_lm(seed, 7);
    Rng rng(seed);
    EmbeddingSequence b{random_tensor(rng, {4, 4}), Source::kSpeech};
    BeamConfig plain;
    plain.width = 5;
    BeamConfig zero = plain;
    zero.lm = &lm;
    zero.lm_weight = 0.0;
    auto a = beam_search(p, b, plain);
    auto z = beam_search(p, b, zero);
    REQUIRE(a.size() == z.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].labels == z[i].labels);
      CHECK(a[i].score == z[i].score);
    }
  }
}

TEST_CASE("rigged decoders") {
  ArchConfig a = toy_arch(7);
  ModelParams p = ModelParams::initialize(a, 1);
  // A zero output weight makes every step the same distribution.
  p.at("decoder.out.w") = Tensor::zeros(p.at("decoder.out.w").shape());
  Tensor bias = Tensor::zeros(p.at("decoder.out.b").shape());
  bias[4] = 5.0;  // character 'a' always wins, EOS never does
  p.at("decoder.out.b") = bias;
  EmbeddingSequence b{Tensor::full({4, 4}, 0.1), Source::kSpeech};
  Hypothesis h = greedy_decode(p, b, 1.5);
  CHECK_FALSE(h.completed);
  CHECK(h.labels.size() == max_decode_steps(4, 1.5));
  BeamConfig cfg;
  cfg.width = 1;
  auto beam = beam_search(p, b, cfg);
  CHECK_FALSE(beam.front().completed);
  CHECK(beam.front().labels == h.labels);
  // A wider beam keeps an early EOS alive, and finished hypotheses win.
  cfg.width = 3;
  beam = beam_search(p, b, cfg);
  CHECK(beam.front().completed);

  bias[4] = 0.0;
  bias[kEos] = 5.0;
  p.at("decoder.out.b") = bias;
  Hypothesis e = greedy_decode(p, b, 1.5);
  CHECK(e.completed);
  CHECK(e.labels.empty());
}

TEST_CASE("greedy follows a decoder rigged through the previous label") {
  // Output logits = embedding of the previous label routed through the
  // output layer: SOS -> a, a -> b, b -> EOS.
  ArchConfig a = toy_arch(6);
  a.hidden = 6;
  ModelParams p = ModelParams::zeros(a);
  Tensor& emb = p.at("decoder.embed");
  emb.at(kSos, 0) = 1.0;
  emb.at(4, 1) = 1.0;
  emb.at(5, 2) = 1.0;
  // The update gate is shut (z = sigmoid(-20)), so h' = tanh(4 e(prev)).
  Tensor& wx = p.at("decoder.l0.wx");
  for (std::size_t i = 0; i < 6; ++i) wx.at(i, 12 + i) = 4.0;
  Tensor& bx = p.at("decoder.l0.bx");
  for (std::size_t i = 0; i < 6; ++i) bx[i] = -20.0;
  Tensor& out = p.at("decoder.out.w");
  out.at(0, 4) = 10.0;
  out.at(1, 5) = 10.0;
  out.at(2, kEos) = 10.0;
  EmbeddingSequence b{Tensor::zeros({3, 6}), Source::kSpeech};
  Hypothesis h = greedy_decode(p, b, 1.5);
  CHECK(h.labels == std::vector<int>{4, 5});
  CHECK(h.completed);
}

TEST_CASE("shallow fusion arithmetic") {
  const std::vector<double> pm{0.9, 0.1}, pl{0.2, 0.8};
  auto fused = fuse_lm_score(pm, pl, 1.0);
  CHECK(fused[0] == doctest::Approx(std::log(0.18)).epsilon(1e-14));
  CHECK(fused[1] == doctest::Approx(std::log(0.08)).epsilon(1e-14));
  CHECK(fused[0] > fused[1]);
  auto zero = fuse_lm_score(pm, pl, 0.0);
  CHECK(zero[0] == std::log(0.9));
  CHECK(zero[1] == std::log(0.1));
  const std::vector<double> u{0.25, 0.25, 0.25, 0.25};
  for (double f : fuse_lm_score(u, u, 1.0)) CHECK(f == doctest::Approx(2 * std::log(0.25)));
  CHECK_THROWS_AS(fuse_lm_score(pm, u, 1.0), ShapeError);
}

TEST_CASE("configuration errors") {
  ModelParams p = toy_model(1);
  EmbeddingSequence b{Tensor::full({2, 4}, 0.1), Source::kSpeech};
  BeamConfig cfg;
  cfg.width = 0;
  CHECK_THROWS_AS(beam_search(p, b, cfg), ConfigError);
  cfg.width = 2;
  cfg.lm_weight = 0.3;  // no LM supplied
  CHECK_THROWS_AS(beam_search(p, b, cfg), ConfigError);
  LmParams other = toy_lm(1, 7);
  cfg.lm = &other;
  CHECK_THROWS_AS(beam_search(p, b, cfg), ShapeError);
}

}  // namespace
}  // namespace semiasr
