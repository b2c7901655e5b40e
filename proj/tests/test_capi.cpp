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

// Exercises the shared library through its C header only.

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "scratch_dir.hpp"
#include "semiasr/semiasr.h"

namespace {

using semiasr::testing::ScratchDir;

#ifndef SEMIASR_FIXTURES
#error "SEMIASR_FIXTURES must name the fixture directory"
#endif
const std::filesystem::path kFixtures = SEMIASR_FIXTURES;

std::string get(const sasr_config* c, const char* key) {
  size_t needed = 0;
  REQUIRE(sasr_config_get(c, key, nullptr, 0, &needed) == SASR_OK);
  std::string buf(needed, '\0');
  if (needed > 1) CHECK(sasr_config_get(c, key, buf.data(), needed - 1, &needed) ==
                        SASR_ERR_BUFFER_TOO_SMALL);
  REQUIRE(sasr_config_get(c, key, buf.data(), buf.size(), &needed) == SASR_OK);
  buf.resize(needed - 1);
  return buf;
}

void tiny(sasr_config* c) {
  const char* kv[][2] = {{"corpus.alphabet", "abc"},        {"corpus.speech_utterances", "24"},
                         {"corpus.paired_fraction", "0.25"}, {"corpus.text_utterances", "10"},
                         {"corpus.dev_utterances", "4"},     {"corpus.eval_utterances", "4"},
                         {"corpus.max_length", "5"},         {"corpus.feat_dim", "4"},
                         {"model.hidden", "6"},              {"lm.hidden", "6"},
                         {"lm.epochs", "1"},                 {"train.batch_size", "4"},
                         {"train.initial_epochs", "1"},      {"train.retrain_epochs", "1"},
                         {"sweep.betas", "0,1"},             {"sweep.variants", "Baseline,Retrain-idt"}};
  for (const auto& p : kv) REQUIRE(sasr_config_set(c, p[0], p[1]) == SASR_OK);
}

TEST_CASE("status codes and messages") {
  CHECK(std::string(sasr_version()).size() > 0);
  CHECK(std::string(sasr_status_string(SASR_ERR_CONFIG)).size() > 0);
  CHECK(sasr_config_new(nullptr) == SASR_ERR_INVALID_ARGUMENT);
  CHECK(std::string(sasr_last_error()).size() > 0);

  sasr_config* c = nullptr;
  REQUIRE(sasr_config_new(&c) == SASR_OK);
  CHECK(std::string(sasr_last_error()).empty());
  CHECK(sasr_config_set(c, "no.such_key", "1") == SASR_ERR_CONFIG);
  CHECK(std::string(sasr_last_error()).find("no.such_key") != std::string::npos);
  CHECK(get(c, "objective.beta") == "0.4");
  REQUIRE(sasr_config_set(c, "objective.beta", "2") == SASR_OK);
  CHECK(sasr_config_validate(c) == SASR_ERR_CONFIG);
  sasr_config_free(c);

  sasr_config* missing = nullptr;
  CHECK(sasr_config_load("/nonexistent/semiasr.ini", &missing) == SASR_ERR_IO);
  CHECK(missing == nullptr);
  sasr_model* m = nullptr;
  CHECK(sasr_model_load("/nonexistent/model.ckpt", &m) == SASR_ERR_IO);
  sasr_config_free(nullptr);
  sasr_model_free(nullptr);
}

TEST_CASE("score fixture") {
  sasr_corpus* corpus = nullptr;
  REQUIRE(sasr_corpus_load((kFixtures / "score" / "manifest.jsonl").string().c_str(), &corpus) ==
          SASR_OK);
  size_t n = 0;
  REQUIRE(sasr_corpus_size(corpus, "eval", &n) == SASR_OK);
  CHECK(n == 2);
  CHECK(sasr_corpus_size(corpus, "train", &n) == SASR_ERR_INVALID_ARGUMENT);

  sasr_report* perfect = nullptr;
  REQUIRE(sasr_score(corpus, "eval", (kFixtures / "score" / "hyp.tsv").string().c_str(), "M", "-",
                     "N", &perfect) == SASR_OK);
  CHECK(sasr_report_cer(perfect) == 0.0);
  CHECK(sasr_report_wer(perfect) == 0.0);

  sasr_report* errors = nullptr;
  REQUIRE(sasr_score(corpus, "eval", (kFixtures / "score" / "hyp_errors.tsv").string().c_str(),
                     "M", "-", "N", &errors) == SASR_OK);
  CHECK(sasr_report_cer(errors) == doctest::Approx(2.0 / 7.0));

  const sasr_report* both[] = {perfect, errors};
  size_t needed = 0;
  CHECK(sasr_report_table(both, 2, nullptr, 0, &needed) == SASR_OK);
  std::string table(needed, '\0');
  REQUIRE(sasr_report_table(both, 2, table.data(), table.size(), &needed) == SASR_OK);
  CHECK(table.find("28.57") != std::string::npos);

  sasr_report* bad = nullptr;
  CHECK(sasr_score(corpus, "dev", (kFixtures / "score" / "hyp.tsv").string().c_str(), "M", "-",
                   "N", &bad) == SASR_ERR_DATA);
  CHECK(std::string(sasr_last_error()).find("e1") != std::string::npos);
  sasr_report_free(perfect);
  sasr_report_free(errors);
  sasr_corpus_free(corpus);
}

int progress_lines = 0;
void count_progress(const char*, void* user) { ++*static_cast<int*>(user); }

TEST_CASE("pipeline through the C interface") {
  ScratchDir dir("capi");
  sasr_config* c = nullptr;
  REQUIRE(sasr_config_new(&c) == SASR_OK);
  tiny(c);
  REQUIRE(sasr_config_validate(c) == SASR_OK);
  REQUIRE(sasr_config_save(c, (dir / "resolved.ini").string().c_str()) == SASR_OK);
  sasr_config* reloaded = nullptr;
  REQUIRE(sasr_config_load((dir / "resolved.ini").string().c_str(), &reloaded) == SASR_OK);
  CHECK(get(reloaded, "corpus.alphabet") == "abc");
  sasr_config_free(reloaded);

  REQUIRE(sasr_generate_corpus(c, (dir / "corpus").string().c_str()) == SASR_OK);
  sasr_corpus* corpus = nullptr;
  REQUIRE(sasr_corpus_load((dir / "corpus" / "manifest.jsonl").string().c_str(), &corpus) ==
          SASR_OK);
  size_t n = 0;
  REQUIRE(sasr_corpus_size(corpus, "paired", &n) == SASR_OK);
  CHECK(n == 6);

  sasr_set_progress_callback(count_progress, &progress_lines);
  sasr_model* initial = nullptr;
  REQUIRE(sasr_train_initial(c, corpus, (dir / "initial.ckpt").string().c_str(),
                             (dir / "initial.csv").string().c_str(), &initial) == SASR_OK);
  CHECK(progress_lines >= 1);
  sasr_set_progress_callback(nullptr, nullptr);
  CHECK(std::filesystem::exists(dir / "initial.csv"));

  size_t needed = 0;
  CHECK(sasr_model_info(initial, "stage", nullptr, 0, &needed) == SASR_OK);
  char small[2];
  CHECK(sasr_model_info(initial, "stage", small, sizeof small, &needed) ==
        SASR_ERR_BUFFER_TOO_SMALL);
  std::string stage(needed, '\0');
  REQUIRE(sasr_model_info(initial, "stage", stage.data(), stage.size(), &needed) == SASR_OK);
  CHECK(std::string(stage.c_str()) == "initial");

  double before = 0.0;
  REQUIRE(sasr_identity_loss(initial, corpus, "eval", &before) == SASR_OK);
  CHECK(std::isfinite(before));

  REQUIRE(sasr_config_set(c, "objective.variant", "Retrain-idt") == SASR_OK);
  sasr_model* re = nullptr;
  REQUIRE(sasr_retrain(c, corpus, initial, nullptr, nullptr, &re) == SASR_OK);
  REQUIRE(sasr_config_set(c, "objective.variant", "Initial") == SASR_OK);
  sasr_model* refused = nullptr;
  CHECK(sasr_retrain(c, corpus, initial, nullptr, nullptr, &refused) == SASR_ERR_CONFIG);
  CHECK(refused == nullptr);

  sasr_lm* lm = nullptr;
  REQUIRE(sasr_train_lm(c, corpus, (dir / "lm.ckpt").string().c_str(), nullptr, &lm) == SASR_OK);

  const std::string hyp = (dir / "hyp.tsv").string();
  REQUIRE(sasr_decode(c, re, lm, corpus, "eval", 0, hyp.c_str()) == SASR_OK);
  sasr_report* report = nullptr;
  REQUIRE(sasr_score(corpus, "eval", hyp.c_str(), "Retrain-idt", "Both", "Y", &report) == SASR_OK);
  CHECK(sasr_report_cer(report) >= 0.0);
  REQUIRE(sasr_report_write_csv(report, (dir / "score.csv").string().c_str()) == SASR_OK);
  sasr_report_free(report);
  CHECK(sasr_decode(c, re, nullptr, corpus, "nowhere", 1, hyp.c_str()) ==
        SASR_ERR_INVALID_ARGUMENT);

  size_t rows = 0;
  REQUIRE(sasr_export_embeddings(re, corpus, "eval", 1, 1, 1,
                                 (dir / "emb.csv").string().c_str(), &rows) == SASR_OK);
  CHECK(rows > 0);

  REQUIRE(sasr_config_set(c, "objective.variant", "Retrain-cyc+idt") == SASR_OK);
  size_t failed = 99;
  REQUIRE(sasr_sweep_beta(c, corpus, initial, nullptr, (dir / "sweep.csv").string().c_str(),
                          &failed) == SASR_OK);
  CHECK(failed == 0);
  std::ifstream in(dir / "sweep.csv");
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 5);

  REQUIRE(sasr_model_save(re, (dir / "re.ckpt").string().c_str()) == SASR_OK);
  sasr_model* back = nullptr;
  REQUIRE(sasr_model_load((dir / "re.ckpt").string().c_str(), &back) == SASR_OK);
  sasr_model_free(back);

  sasr_lm_free(lm);
  sasr_model_free(re);
  sasr_model_free(initial);
  sasr_corpus_free(corpus);
  sasr_config_free(c);
}

}  // namespace
