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

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "loss_fixture.hpp"
#include "semiasr/decoder.hpp"
#include "semiasr/errors.hpp"
#include "semiasr/losses.hpp"
#include "semiasr/vocabulary.hpp"

namespace semiasr {
namespace {

using namespace testing;

constexpr int kSeeds = 20;
constexpr double kTol = 1e-4;

// --- MMD -------------------------------------------------------------------

TEST_CASE("two singletons at distance one") {
  const double expected = 2.0 - 2.0 * std::exp(-0.5);
  const double got = mmd(Tensor::matrix(1, 1, {0.0}), Tensor::matrix(1, 1, {1.0}), fixed_sigma(1.0));
  CHECK(std::abs(got - expected) < 1e-9);
  CHECK(std::abs(got - 0.786939) < 1e-6);
}

TEST_CASE("mmd is non-negative, symmetric, zero on identical sets and matches loops") {
  for (int seed = 0; seed < 200; ++seed) {
    Rng rng(derive_seed(static_cast<std::uint64_t>(seed), "mmd"));
    const auto m = static_cast<std::size_t>(rng.integer(1, 7));
    const auto n = static_cast<std::size_t>(rng.integer(1, 7));
    const auto d = static_cast<std::size_t>(rng.integer(1, 5));
    const double spread = rng.uniform(0.01, 3.0);
    Tensor p = random_tensor(rng, {m, d}, -spread, spread);
    Tensor q = random_tensor(rng, {n, d}, -spread, spread);
    KernelConfig median;
    KernelConfig fixed = fixed_sigma(rng.uniform(0.1, 2.0));
    for (const KernelConfig& k : {median, fixed}) {
      const double pq = mmd(p, q, k);
      CHECK(pq >= -1e-12);
      CHECK(std::abs(pq - mmd(q, p, k)) < 1e-12);
      CHECK(std::abs(mmd(p, p, k)) < 1e-12);
      const double sigma = k.sigma ? *k.sigma : median_oracle(p, q);
      CHECK(std::abs(pq - mmd_oracle(p, q, sigma, false)) < 1e-12);
    }
    if (m >= 2 && n >= 2) {
      KernelConfig unbiased = fixed;
      unbiased.estimator = MmdEstimator::kUnbiased;
      CHECK(std::abs(mmd(p, q, unbiased) - mmd_oracle(p, q, *fixed.sigma, true)) < 1e-12);
    }
  }
}

TEST_CASE("median heuristic") {
  for (int seed = 0; seed < 50; ++seed) {
    Rng rng(derive_seed(static_cast<std::uint64_t>(seed), "median"));
    const auto m = static_cast<std::size_t>(rng.integer(1, 6));
    const auto n = static_cast<std::size_t>(rng.integer(1, 6));
    Tensor p = random_tensor(rng, {m, 3});
    Tensor q = random_tensor(rng, {n, 3});
    CHECK(median_heuristic_sigma(p, q) == doctest::Approx(median_oracle(p, q)).epsilon(1e-14));
  }
  Tensor same = Tensor::matrix(2, 2, {1, 1, 1, 1});
  CHECK(median_heuristic_sigma(same, same) == 1.0);
}

TEST_CASE("mmd errors") {
  Tensor p = Tensor::matrix(1, 2, {0, 0});
  CHECK_THROWS_AS(mmd(Tensor::zeros({0, 2}), p, KernelConfig{}), DataError);
  CHECK_THROWS_AS(mmd(p, Tensor::zeros({0, 2}), KernelConfig{}), DataError);
  CHECK_THROWS_AS(mmd(p, p, fixed_sigma(0.0)), ConfigError);
  CHECK_THROWS_AS(mmd(p, p, fixed_sigma(-1.0)), ConfigError);
  CHECK_THROWS_AS(mmd(p, Tensor::matrix(1, 3, {0, 0, 0}), KernelConfig{}), ShapeError);
}

// --- Fixtures ----------------------------------------------------------------

double value(const Var& v) { return v.value().item(); }

// --- Individual losses ---------------------------------------------------------

TEST_CASE("pair loss endpoints and mixture") {
  Fixture f = make_fixture(1);
  Graph g(false);
  Network net(g, f.params);
  const auto& x = f.paired.features;
  double seq = 0.0, ctc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Tensor frames = x.frames;  // time-major; rebuild utterance i
    FeatureSequence u{x.ids[i], Tensor::zeros({x.lengths[i], 3})};
    for (std::size_t t = 0; t < x.lengths[i]; ++t)
      for (std::size_t c = 0; c < 3; ++c) u.frames.at(t, c) = frames.at(t * x.size() + i, c);
    LabelSequence y{f.paired.labels.sequences[i]};
    seq += sequence_log_prob(f.params, encode_speech(f.params, u), y);
    ctc += ctc_log_prob(f.params, frontend_output(f.params, u), y);
  }
  const double n = static_cast<double>(x.size());
  CHECK(value(loss_pair(net, f.paired, 0.0)) == doctest::Approx(-seq / n).epsilon(1e-12));
  CHECK(value(loss_pair(net, f.paired, 1.0)) == doctest::Approx(-ctc / n).epsilon(1e-12));
  CHECK(value(loss_pair(net, f.paired, 0.5)) ==
        doctest::Approx(-0.5 * (seq + ctc) / n).epsilon(1e-12));
}

TEST_CASE("pair loss names an unalignable utterance") {
  Fixture f = make_fixture(2);
  f.paired.labels = LabelBatch::pack({{4, 4, 4}, {5}});  // p0 has 3 frames after subsampling
  Graph g(false);
  Network net(g, f.params);
  try {
    loss_pair(net, f.paired, 0.3);
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("p0") != std::string::npos);
    CHECK(std::string(e.what()).find("unalignable") != std::string::npos);
  }
}

TEST_CASE("uniform decoder gives analytic pair and text losses") {
  Fixture f = make_fixture(3);
  f.params.at("decoder.out.w") = Tensor::zeros(f.params.at("decoder.out.w").shape());
  f.params.at("decoder.out.b") = Tensor::zeros(f.params.at("decoder.out.b").shape());
  Graph g(false);
  Network net(g, f.params);
  const double lv = std::log(6.0);
  PairedBatch one{FeatureBatch::pack(std::vector<FeatureSequence>{
                      {"u", Tensor::full({4, 3}, 0.1)}}),
                  LabelBatch::pack({{4}})};
  CHECK(value(loss_pair(net, one, 0.0)) == doctest::Approx(2 * lv).epsilon(1e-14));
  CHECK(value(loss_text(net, LabelBatch::pack({{4, 5}}))) == doctest::Approx(3 * lv).epsilon(1e-14));
  CHECK_THROWS_AS(loss_text(net, LabelBatch{}), DataError);
}

TEST_CASE("domain loss pools frames and reduces to the mmd of its embeddings") {
  Fixture f = make_fixture(4);
  Graph g(false);
  Network net(g, f.params);
  KernelConfig k;
  Tensor sp = net.encode_speech(f.speech).valid_rows().value();
  Tensor tx = net.embed_text(f.text).valid_rows().value();
  CHECK(value(loss_dom(net, f.speech, f.text, k)) ==
        doctest::Approx(mmd_oracle(sp, tx, median_oracle(sp, tx), false)).epsilon(1e-12));

  // One frame on each side collapses to the two-singleton case.
  FeatureBatch x1 = FeatureBatch::pack(std::vector<FeatureSequence>{
      {"one", Tensor::matrix(2, 3, {0.1, 0.2, 0.3, -0.3, 0.0, 0.5})}});
  LabelBatch y1 = LabelBatch::pack({{5}});
  auto b = encode_speech(f.params, FeatureSequence{"one", Tensor::matrix(2, 3, {0.1, 0.2, 0.3, -0.3, 0.0, 0.5})});
  auto bt = embed_text(f.params, LabelSequence{{5}});
  double d2 = 0.0;
  for (std::size_t c = 0; c < 3; ++c) d2 += std::pow(b.vectors[c] - bt.vectors[c], 2);
  CHECK(value(loss_dom(net, x1, y1, fixed_sigma(0.7))) ==
        doctest::Approx(2.0 - 2.0 * std::exp(-d2 / (2 * 0.49))).epsilon(1e-12));
}

TEST_CASE("identity loss is the mean per-frame L1 distance") {
  ArchConfig a;
  a.feat_dim = 2;
  a.hidden = 2;
  a.vocab_size = 6;
  // Shared encoder rigged to output [1, 1] everywhere.
  ModelParams p = ModelParams::zeros(a);
  p.at("shared.l0.proj.b") = Tensor::row({1.0, 1.0});
  Graph g(false);
  Network net(g, p);
  EmbeddingSequence b{Tensor::matrix(1, 2, {0.0, 3.0}), Source::kSpeech};
  CHECK(value(loss_idt(net, as_batch(g, b))) == 3.0);
  EmbeddingSequence fixed{Tensor::matrix(2, 2, {1.0, 1.0, 1.0, 1.0}), Source::kText};
  CHECK(value(loss_idt(net, as_batch(g, fixed))) == 0.0);
  EmbeddingSequence two{Tensor::matrix(2, 2, {0.0, 3.0, 1.0, 2.0}), Source::kSpeech};
  CHECK(value(loss_idt(net, as_batch(g, two))) == 2.0);
}

TEST_CASE("cycle loss equals mmd against the re-encoded greedy hypothesis") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Fixture f = make_fixture(seed);
    Rng rng(seed);
    FeatureSequence x{"c", random_tensor(rng, {7, 3})};
    auto b = encode_speech(f.params, x);
    Hypothesis h = greedy_decode(f.params, b, 1.5);
    std::vector<int> labels = h.labels.empty() ? std::vector<int>{kUnk} : h.labels;
    auto bt = embed_text(f.params, LabelSequence{labels});
    const double expected = mmd(b.vectors, bt.vectors, fixed_sigma(0.9));

    Graph g(false);
    Network net(g, f.params);
    CycleDiagnostics diag;
    SeqVars sb = net.encode_speech(FeatureBatch::pack(std::vector<FeatureSequence>{x}));
    const double got = value(loss_cyc_dom(net, sb, fixed_sigma(0.9), 1.5, &diag));
    CHECK(got == doctest::Approx(expected).epsilon(1e-12));
    CHECK(diag.utterances == 1);
    CHECK(diag.empty_hypotheses == (h.labels.empty() ? 1u : 0u));
    CHECK(value(loss_cyc_dom(net, sb, fixed_sigma(0.9), 1.5)) == got);
  }
}

TEST_CASE("an empty hypothesis is replaced by UNK and counted") {
  Fixture f = make_fixture(5);
  // Decoder always emits EOS first.
  f.params.at("decoder.out.w") = Tensor::zeros(f.params.at("decoder.out.w").shape());
  Tensor bias = Tensor::zeros(f.params.at("decoder.out.b").shape());
  bias[kEos] = 10.0;
  f.params.at("decoder.out.b") = bias;
  Graph g(false);
  Network net(g, f.params);
  CycleDiagnostics diag;
  SeqVars sb = net.encode_speech(f.speech);
  const double got = value(loss_cyc_dom(net, sb, fixed_sigma(1.0), 1.5, &diag));
  CHECK(diag.empty_hypotheses == 2);
  Tensor unk = net.embed_text(LabelBatch::pack({{kUnk}, {kUnk}})).valid_rows().value();
  CHECK(got == doctest::Approx(mmd(sb.valid_rows().value(), unk, fixed_sigma(1.0))).epsilon(1e-12));
}

// --- Gradients -----------------------------------------------------------------

TEST_CASE("every loss passes central finite differences on 20 seeds") {
  const KernelConfig k = fixed_sigma(1.3);
  for (int seed = 0; seed < kSeeds; ++seed) {
    Fixture f = make_fixture(static_cast<std::uint64_t>(seed) + 100);
    for (const LossCase& c : loss_cases(f, k)) {
      Rng pick(derive_seed(static_cast<std::uint64_t>(seed), c.name));
      const double err = param_gradient_error(f.params, c.build, pick, 2);
      INFO(c.name << " seed " << seed << " error " << err);
      CHECK(err < kTol);
    }
  }
}

std::map<std::string, double> group_norms(const std::map<std::string, Tensor>& grads) {
  std::map<std::string, double> out;
  for (const auto& [name, g] : grads) {
    double s = 0.0;
    for (double v : g.values()) s += v * v;
    out[parameter_group(name)] += s;
  }
  return out;
}

std::map<std::string, double> loss_group_norms(const Fixture& f, const testing::NetBuild& build) {
  Graph g(true);
  Network net(g, f.params);
  g.backward(build(net));
  return group_norms(g.parameter_grads());
}

TEST_CASE("gradients reach the groups each loss trains and stop at the decode") {
  Fixture f = make_fixture(7);
  const KernelConfig k = fixed_sigma(1.0);
  auto text = loss_group_norms(f, [&](const Network& n) { return loss_text(n, f.text); });
  for (const char* grp : {"text", "shared", "decoder"}) CHECK(text[grp] > 0.0);
  CHECK(text["frontend"] == 0.0);

  auto dom = loss_group_norms(f, [&](const Network& n) { return loss_dom(n, f.speech, f.text, k); });
  for (const char* grp : {"frontend", "shared", "text"}) CHECK(dom[grp] > 0.0);
  CHECK(dom["decoder"] == 0.0);

  // The hypothesis is discrete: nothing flows back into the decoder.
  auto cyc = loss_group_norms(
      f, [&](const Network& n) { return loss_cyc_dom(n, n.encode_speech(f.speech), k, 1.5); });
  for (const char* grp : {"frontend", "shared", "text"}) CHECK(cyc[grp] > 0.0);
  CHECK(cyc["decoder"] == 0.0);
  CHECK(cyc["ctc"] == 0.0);

  auto idt = loss_group_norms(
      f, [&](const Network& n) { return loss_idt(n, n.encode_speech(f.speech)); });
  for (const char* grp : {"frontend", "shared"}) CHECK(idt[grp] > 0.0);
  CHECK(idt["decoder"] == 0.0);
}

// --- Combined objective ----------------------------------------------------------

std::set<std::string> keys(const LossBreakdown& b) {
  std::set<std::string> out;
  for (const auto& [k, v] : b.components) out.insert(k);
  return out;
}

TEST_CASE("objective total reconstructs from its components on 100 draws") {
  Rng rng(2024);
  Fixture f = make_fixture(11);
  for (int draw = 0; draw < 100; ++draw) {
    ObjectiveConfig cfg;
    cfg.variant = kVariants[static_cast<std::size_t>(rng.integer(0, 4))];
    const auto pick = [&] {
      const double u = rng.uniform();
      return u < 0.15 ? 0.0 : u < 0.3 ? 1.0 : rng.uniform();
    };
    cfg.alpha = pick();
    cfg.beta = pick();
    cfg.kernel = fixed_sigma(rng.uniform(0.5, 2.0));
    Graph g(false);
    Network net(g, f.params);
    ObjectiveTerms t = combined_objective(net, cfg, &f.paired, &f.speech, &f.text);
    INFO("variant " << std::string(variant_name(cfg.variant)) << " alpha " << cfg.alpha
                    << " beta " << cfg.beta);
    const double total = value(t.total);
    CHECK(t.breakdown.total == total);
    CHECK(std::abs(total - expected_total(t.breakdown.components, cfg.variant, cfg.alpha,
                                          cfg.beta)) < 1e-12);
    CHECK(std::abs(total - objective_from_components(t.breakdown.components, cfg)) < 1e-12);
    if (cfg.beta == 1.0) {
      CHECK_FALSE(t.breakdown.has("text"));
      CHECK_FALSE(t.breakdown.has("idt_text"));
    }
  }
}

TEST_CASE("objective endpoint identities") {
  Fixture f = make_fixture(12);
  Graph g(false);
  Network net(g, f.params);
  const double pair = value(loss_pair(net, f.paired, 0.3));
  const double text = value(loss_text(net, f.text));

  for (Variant v : kVariants) {
    for (double beta : {0.0, 0.4, 1.0}) {
      ObjectiveConfig cfg;
      cfg.variant = v;
      cfg.alpha = 1.0;
      cfg.beta = beta;
      ObjectiveTerms t = combined_objective(net, cfg, &f.paired, &f.speech, &f.text);
      CHECK(value(t.total) == pair);
      CHECK(keys(t.breakdown) == std::set<std::string>{"ctc", "pair"});
    }
  }

  ObjectiveConfig base;
  base.variant = Variant::kBaseline;
  base.beta = 0.0;
  base.alpha = 0.0;
  ObjectiveTerms t0 = combined_objective(net, base, nullptr, nullptr, &f.text);
  CHECK(value(t0.total) == text);
  CHECK(keys(t0.breakdown) == std::set<std::string>{"text"});
  base.alpha = 0.5;
  ObjectiveTerms th = combined_objective(net, base, &f.paired, nullptr, &f.text);
  CHECK(keys(th.breakdown) == std::set<std::string>{"ctc", "pair", "text"});
  CHECK(value(th.total) == 0.5 * pair + 0.5 * text);

  // Initial ignores alpha and the unpaired batches.
  ObjectiveConfig init;
  init.variant = Variant::kInitial;
  init.alpha = 0.2;
  CHECK(value(combined_objective(net, init, &f.paired, nullptr, nullptr).total) == pair);
}

TEST_CASE("no text term at beta one and the proposed objective at alpha one half") {
  Fixture f = make_fixture(13);
  Graph g(false);
  Network net(g, f.params);
  KernelConfig k = fixed_sigma(1.1);
  const double pair = value(loss_pair(net, f.paired, 0.3));
  SeqVars b = net.encode_speech(f.speech);
  const double cyc = value(loss_cyc_dom(net, b, k, 1.5));
  const double idt = value(loss_idt(net, b));

  ObjectiveConfig cfg;
  cfg.variant = Variant::kRetrainCycIdt;
  cfg.alpha = 0.5;
  cfg.beta = 1.0;
  cfg.kernel = k;
  ObjectiveTerms t = combined_objective(net, cfg, &f.paired, &f.speech, nullptr);
  CHECK(keys(t.breakdown) == std::set<std::string>{"ctc", "cyc_dom", "idt_speech", "pair"});
  CHECK(value(t.total) == doctest::Approx(0.5 * pair + 0.5 * (cyc + idt)).epsilon(1e-14));

  for (Variant v : {Variant::kRetrainIdt, Variant::kRetrainCyc}) {
    cfg.variant = v;
    ObjectiveTerms tv = combined_objective(net, cfg, &f.paired, &f.speech, nullptr);
    CHECK_FALSE(tv.breakdown.has("text"));
    CHECK_FALSE(tv.breakdown.has("idt_text"));
  }
  // Baseline's domain term compares against text embeddings, so it needs
  // the text batch even at beta one; its reconstruction term stays out.
  cfg.variant = Variant::kBaseline;
  CHECK_THROWS_AS(combined_objective(net, cfg, &f.paired, &f.speech, nullptr), DataError);
  ObjectiveTerms tb = combined_objective(net, cfg, &f.paired, &f.speech, &f.text);
  CHECK(keys(tb.breakdown) == std::set<std::string>{"ctc", "dom", "pair"});

  // The cycle+identity mixture at 0 < beta < 1 logs all five terms.
  cfg.variant = Variant::kRetrainCycIdt;
  cfg.beta = 0.4;
  ObjectiveTerms tm = combined_objective(net, cfg, &f.paired, &f.speech, &f.text);
  CHECK(keys(tm.breakdown) ==
        std::set<std::string>{"ctc", "cyc_dom", "idt_speech", "idt_text", "pair", "text"});
}

TEST_CASE("missing batches and bad weights are errors") {
  Fixture f = make_fixture(14);
  Graph g(false);
  Network net(g, f.params);
  ObjectiveConfig cfg;
  cfg.variant = Variant::kBaseline;
  cfg.beta = 0.5;
  CHECK_THROWS_AS(combined_objective(net, cfg, &f.paired, &f.speech, nullptr), DataError);
  CHECK_THROWS_AS(combined_objective(net, cfg, &f.paired, nullptr, &f.text), DataError);
  CHECK_THROWS_AS(combined_objective(net, cfg, nullptr, &f.speech, &f.text), DataError);
  cfg.alpha = 1.5;
  CHECK_THROWS_AS(combined_objective(net, cfg, &f.paired, &f.speech, &f.text), ConfigError);
  cfg.alpha = 0.5;
  cfg.beta = -0.1;
  CHECK_THROWS_AS(combined_objective(net, cfg, &f.paired, &f.speech, &f.text), ConfigError);
}

TEST_CASE("variant names round-trip") {
  for (Variant v : kVariants) CHECK(parse_variant(variant_name(v)) == v);
  CHECK(variant_name(Variant::kRetrainCycIdt) == "Retrain-cyc+idt");
  CHECK_THROWS_AS(parse_variant("Retrain"), ConfigError);
}

TEST_CASE("every trained group of every variant receives gradient") {
  Fixture f = make_fixture(15);
  const std::map<Variant, std::set<std::string>> trained{
      {Variant::kInitial, {"frontend", "ctc", "shared", "decoder"}},
      {Variant::kBaseline, {"frontend", "ctc", "shared", "decoder", "text"}},
      {Variant::kRetrainIdt, {"frontend", "ctc", "shared", "decoder", "text"}},
      {Variant::kRetrainCyc, {"frontend", "ctc", "shared", "decoder", "text"}},
      {Variant::kRetrainCycIdt, {"frontend", "ctc", "shared", "decoder", "text"}},
  };
  for (const auto& [v, groups] : trained) {
    ObjectiveConfig cfg;
    cfg.variant = v;
    auto norms = loss_group_norms(f, [&](const Network& n) {
      return combined_objective(n, cfg, &f.paired, &f.speech, &f.text).total;
    });
    for (const auto& grp : groups) {
      INFO(std::string(variant_name(v)) << " " << grp);
      CHECK(norms[grp] > 0.0);
    }
    if (v == Variant::kInitial) CHECK(norms["text"] == 0.0);
  }
}

}  // namespace
}  // namespace semiasr
