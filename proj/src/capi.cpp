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

#include "semiasr/semiasr.h"

#include <cstring>
#include <mutex>
#include <new>
#include <string>

#include "semiasr/checkpoint.hpp"
#include "semiasr/config.hpp"
#include "semiasr/corpus.hpp"
#include "semiasr/errors.hpp"
#include "semiasr/metrics.hpp"
#include "semiasr/trainer.hpp"

struct sasr_config {
  semiasr::Config config;
};
struct sasr_corpus {
  semiasr::Dataset data;
};
struct sasr_model {
  semiasr::AsrCheckpoint ckpt;
};
struct sasr_lm {
  semiasr::LmCheckpoint ckpt;
};
struct sasr_report {
  semiasr::ScoreReport report;
};

namespace {

using namespace semiasr;

thread_local std::string g_last_error;

std::mutex g_progress_mu;
sasr_progress_fn g_progress = nullptr;
void* g_progress_user = nullptr;

void progress(const std::string& line) {
  std::lock_guard<std::mutex> lock(g_progress_mu);
  if (g_progress) g_progress(line.c_str(), g_progress_user);
}

template <typename F>
sasr_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return SASR_OK;
  } catch (const ConfigError& e) {
    g_last_error = e.what();
    return SASR_ERR_CONFIG;
  } catch (const IoError& e) {
    g_last_error = e.what();
    return SASR_ERR_IO;
  } catch (const DataError& e) {
    g_last_error = e.what();
    return SASR_ERR_DATA;
  } catch (const ShapeError& e) {
    g_last_error = e.what();
    return SASR_ERR_SHAPE;
  } catch (const NumericError& e) {
    g_last_error = e.what();
    return SASR_ERR_NUMERIC;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SASR_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SASR_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return SASR_ERR_INTERNAL;
  }
}

template <typename F>
sasr_status api(F&& f) {
  return guarded(std::forward<F>(f));
}

#define SASR_REQUIRE(cond, msg)         \
  do {                                  \
    if (!(cond)) {                      \
      g_last_error = (msg);             \
      return SASR_ERR_INVALID_ARGUMENT; \
    }                                   \
  } while (0)

sasr_status copy_out(const std::string& value, char* buf, std::size_t cap,
                     std::size_t* needed) {
  if (needed) *needed = value.size() + 1;
  if (buf == nullptr || cap < value.size() + 1) {
    if (buf != nullptr || cap != 0) {
      g_last_error = "buffer too small: need " + std::to_string(value.size() + 1) + " bytes";
      return SASR_ERR_BUFFER_TOO_SMALL;
    }
    return SASR_OK;  // size query
  }
  std::memcpy(buf, value.c_str(), value.size() + 1);
  return SASR_OK;
}

bool parse_split_arg(const char* name, Split* out) {
  if (name == nullptr) return false;
  try {
    *out = parse_split(name);
    return true;
  } catch (const DataError&) {
    return false;
  }
}

std::string fmt_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

TrainOptions options_for(const char* checkpoint_path, const std::string& stage) {
  TrainOptions o;
  if (checkpoint_path) o.checkpoint_path = checkpoint_path;
  o.on_epoch = [stage](const EpochRecord& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s epoch %zu: loss %.5f, dev CER %s%%, %.1fs",
                  stage.c_str(), r.epoch, r.loss, fmt_percent(r.dev_cer).c_str(), r.seconds);
    progress(buf);
  };
  return o;
}

}  // namespace

extern "C" {

const char* sasr_version(void) { return "0.1.0"; }

const char* sasr_status_string(sasr_status status) {
  switch (status) {
    case SASR_OK: return "ok";
    case SASR_ERR_INVALID_ARGUMENT: return "invalid argument";
    case SASR_ERR_CONFIG: return "configuration error";
    case SASR_ERR_IO: return "I/O error";
    case SASR_ERR_DATA: return "data error";
    case SASR_ERR_SHAPE: return "shape error";
    case SASR_ERR_NUMERIC: return "numeric error";
    case SASR_ERR_BUFFER_TOO_SMALL: return "buffer too small";
    case SASR_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* sasr_last_error(void) { return g_last_error.c_str(); }

void sasr_set_progress_callback(sasr_progress_fn fn, void* user) {
  std::lock_guard<std::mutex> lock(g_progress_mu);
  g_progress = fn;
  g_progress_user = user;
}

sasr_status sasr_config_new(sasr_config** out) {
  SASR_REQUIRE(out, "output handle is null");
  *out = nullptr;
  return api([&] { *out = new sasr_config{}; });
}

sasr_status sasr_config_load(const char* path, sasr_config** out) {
  SASR_REQUIRE(path && out, "path or output handle is null");
  *out = nullptr;
  return api([&] { *out = new sasr_config{Config::load(path)}; });
}

void sasr_config_free(sasr_config* cfg) { delete cfg; }

sasr_status sasr_config_set(sasr_config* cfg, const char* key, const char* value) {
  SASR_REQUIRE(cfg && key && value, "null argument");
  return api([&] { cfg->config.set(key, value); });
}

sasr_status sasr_config_get(const sasr_config* cfg, const char* key, char* buf, size_t cap,
                            size_t* needed) {
  SASR_REQUIRE(cfg && key, "null argument");
  std::string value;
  sasr_status s = api([&] { value = cfg->config.get(key); });
  return s == SASR_OK ? copy_out(value, buf, cap, needed) : s;
}

sasr_status sasr_config_validate(const sasr_config* cfg) {
  SASR_REQUIRE(cfg, "config handle is null");
  return api([&] { (void)cfg->config.experiment(); });
}

sasr_status sasr_config_save(const sasr_config* cfg, const char* path) {
  SASR_REQUIRE(cfg && path, "null argument");
  return api([&] { cfg->config.save(path); });
}

sasr_status sasr_generate_corpus(const sasr_config* cfg, const char* out_dir) {
  SASR_REQUIRE(cfg && out_dir, "null argument");
  return api([&] { generate_corpus(cfg->config.experiment().corpus, out_dir); });
}

sasr_status sasr_corpus_load(const char* manifest_path, sasr_corpus** out) {
  SASR_REQUIRE(manifest_path && out, "null argument");
  *out = nullptr;
  return api([&] {
    *out = new sasr_corpus{Dataset::load(Manifest::read(manifest_path))};
  });
}

void sasr_corpus_free(sasr_corpus* corpus) { delete corpus; }

sasr_status sasr_corpus_size(const sasr_corpus* corpus, const char* split, size_t* out) {
  SASR_REQUIRE(corpus && out, "null argument");
  Split s;
  SASR_REQUIRE(parse_split_arg(split, &s), "unknown split name");
  *out = corpus->data.utterances(s).size();
  g_last_error.clear();
  return SASR_OK;
}

sasr_status sasr_train_initial(const sasr_config* cfg, const sasr_corpus* corpus,
                               const char* checkpoint_path, const char* log_path,
                               sasr_model** out) {
  SASR_REQUIRE(cfg && corpus, "null argument");
  if (out) *out = nullptr;
  return api([&] {
    const ExperimentConfig e = cfg->config.experiment();
    TrainResult r = train_initial(e, corpus->data, options_for(checkpoint_path, "initial"));
    if (log_path) r.log.write_csv(log_path);
    if (out) *out = new sasr_model{std::move(r.best)};
  });
}

sasr_status sasr_retrain(const sasr_config* cfg, const sasr_corpus* corpus,
                         const sasr_model* initial, const char* checkpoint_path,
                         const char* log_path, sasr_model** out) {
  SASR_REQUIRE(cfg && corpus, "null argument");
  SASR_REQUIRE(initial, "retraining needs an initial model");
  if (out) *out = nullptr;
  return api([&] {
    const ExperimentConfig e = cfg->config.experiment();
    const std::string stage(variant_name(e.objective.variant));
    TrainResult r = retrain(initial->ckpt, e, corpus->data, options_for(checkpoint_path, stage));
    if (log_path) r.log.write_csv(log_path);
    if (out) *out = new sasr_model{std::move(r.best)};
  });
}

sasr_status sasr_train_lm(const sasr_config* cfg, const sasr_corpus* corpus,
                          const char* checkpoint_path, const char* log_path, sasr_lm** out) {
  SASR_REQUIRE(cfg && corpus, "null argument");
  if (out) *out = nullptr;
  return api([&] {
    const ExperimentConfig e = cfg->config.experiment();
    LmTrainResult r = train_rnnlm(e, corpus->data,
                                  checkpoint_path ? checkpoint_path : std::filesystem::path{});
    for (const auto& rec : r.log) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "lm epoch %zu: dev perplexity %.4f", rec.epoch,
                    rec.dev_perplexity);
      progress(buf);
    }
    if (log_path) write_lm_log(log_path, r.log);
    if (out) *out = new sasr_lm{std::move(r.best)};
  });
}

sasr_status sasr_model_load(const char* path, sasr_model** out) {
  SASR_REQUIRE(path && out, "null argument");
  *out = nullptr;
  return api([&] { *out = new sasr_model{load_asr(path)}; });
}

sasr_status sasr_model_save(const sasr_model* model, const char* path) {
  SASR_REQUIRE(model && path, "null argument");
  return api([&] { save_asr(path, model->ckpt); });
}

void sasr_model_free(sasr_model* model) { delete model; }

sasr_status sasr_model_info(const sasr_model* model, const char* key, char* buf, size_t cap,
                            size_t* needed) {
  SASR_REQUIRE(model && key, "null argument");
  auto it = model->ckpt.info.find(key);
  if (it == model->ckpt.info.end()) {
    g_last_error = std::string("checkpoint has no tag '") + key + "'";
    return SASR_ERR_INVALID_ARGUMENT;
  }
  g_last_error.clear();
  return copy_out(it->second, buf, cap, needed);
}

sasr_status sasr_lm_load(const char* path, sasr_lm** out) {
  SASR_REQUIRE(path && out, "null argument");
  *out = nullptr;
  return api([&] { *out = new sasr_lm{load_lm(path)}; });
}

void sasr_lm_free(sasr_lm* lm) { delete lm; }

sasr_status sasr_decode(const sasr_config* cfg, const sasr_model* model, const sasr_lm* lm,
                        const sasr_corpus* corpus, const char* split, int greedy,
                        const char* out_path) {
  SASR_REQUIRE(cfg && model && corpus && out_path, "null argument");
  Split s;
  SASR_REQUIRE(parse_split_arg(split, &s), "unknown split name");
  SASR_REQUIRE(s != Split::kUnpairedText, "split unpaired_text has no speech to decode");
  return api([&] {
    const ExperimentConfig e = cfg->config.experiment();
    if (!(model->ckpt.vocab == corpus->data.vocabulary()))
      throw DataError("model vocabulary differs from the corpus vocabulary");
    if (lm && !(lm->ckpt.vocab == model->ckpt.vocab))
      throw DataError("LM vocabulary differs from the model vocabulary");
    std::vector<DecodeRecord> records =
        greedy ? greedy_transcribe(model->ckpt.params, corpus->data, s, e.eval_batch_size,
                                   e.decode.max_len_factor)
               : decode_split(model->ckpt.params, model->ckpt.vocab, corpus->data, s, e.decode,
                              lm ? &lm->ckpt.params : nullptr, e.eval_batch_size);
    write_decode_output(out_path, records);
  });
}

sasr_status sasr_score(const sasr_corpus* corpus, const char* split, const char* hyp_path,
                       const char* model_tag, const char* type_tag, const char* lm_tag,
                       sasr_report** out) {
  SASR_REQUIRE(corpus && hyp_path && out, "null argument");
  *out = nullptr;
  Split s;
  SASR_REQUIRE(parse_split_arg(split, &s), "unknown split name");
  return api([&] {
    ScoreReport r = score_corpus(corpus->data.references(s), read_decode_output(hyp_path));
    r.model = model_tag ? model_tag : "";
    r.type = type_tag ? type_tag : "";
    r.lm = lm_tag ? lm_tag : "";
    *out = new sasr_report{std::move(r)};
  });
}

void sasr_report_free(sasr_report* report) { delete report; }

double sasr_report_cer(const sasr_report* report) {
  return report ? report->report.cer() : -1.0;
}

double sasr_report_wer(const sasr_report* report) {
  return report ? report->report.wer() : -1.0;
}

sasr_status sasr_report_write_csv(const sasr_report* report, const char* path) {
  SASR_REQUIRE(report && path, "null argument");
  return api([&] { write_score_csv(path, report->report); });
}

sasr_status sasr_report_table(const sasr_report* const* reports, size_t n, char* buf,
                              size_t cap, size_t* needed) {
  SASR_REQUIRE(reports || n == 0, "null report list");
  std::vector<ScoreReport> list;
  for (size_t i = 0; i < n; ++i) {
    SASR_REQUIRE(reports[i], "null report in list");
    list.push_back(reports[i]->report);
  }
  std::string table;
  sasr_status s = api([&] { table = format_score_table(list); });
  return s == SASR_OK ? copy_out(table, buf, cap, needed) : s;
}

sasr_status sasr_sweep_beta(const sasr_config* cfg, const sasr_corpus* corpus,
                            const sasr_model* initial, const sasr_lm* lm, const char* csv_path,
                            size_t* failed_cells) {
  SASR_REQUIRE(cfg && corpus && csv_path, "null argument");
  SASR_REQUIRE(initial, "the sweep needs an initial model");
  return api([&] {
    const ExperimentConfig e = cfg->config.experiment();
    std::vector<SweepRow> rows =
        sweep_beta(initial->ckpt, e, corpus->data, lm ? &lm->ckpt.params : nullptr);
    write_sweep_csv(csv_path, rows);
    std::size_t failed = 0;
    for (const auto& r : rows) {
      char line[512];
      if (r.error.empty())
        std::snprintf(line, sizeof line, "sweep %s beta=%g: CER %s%%",
                      std::string(variant_name(r.variant)).c_str(), r.beta,
                      fmt_percent(*r.cer).c_str());
      else
        std::snprintf(line, sizeof line, "sweep %s beta=%g failed: %s",
                      std::string(variant_name(r.variant)).c_str(), r.beta, r.error.c_str());
      progress(line);
      failed += !r.error.empty();
    }
    if (failed_cells) *failed_cells = failed;
  });
}

sasr_status sasr_export_embeddings(const sasr_model* model, const sasr_corpus* corpus,
                                   const char* split, int speech, int text, int projection,
                                   const char* out_path, size_t* rows) {
  SASR_REQUIRE(model && corpus && out_path, "null argument");
  Split s;
  SASR_REQUIRE(parse_split_arg(split, &s), "unknown split name");
  SASR_REQUIRE(speech || text, "nothing selected for export");
  return api([&] {
    EmbeddingExport what;
    what.projection = projection != 0;
    for (const auto& u : corpus->data.utterances(s)) {
      if (speech && u.features.frames.size() > 0) what.speech.push_back(u.features);
      if (text && s != Split::kUnpairedSpeech && !u.transcript.empty())
        what.text.push_back({u.id, LabelSequence{model->ckpt.vocab.encode(u.transcript)}});
    }
    if (text && s == Split::kUnpairedSpeech)
      throw DataError("transcripts of unpaired_speech are withheld; export speech only");
    const std::size_t n = export_embeddings(model->ckpt.params, what, out_path);
    if (rows) *rows = n;
  });
}

sasr_status sasr_identity_loss(const sasr_model* model, const sasr_corpus* corpus,
                               const char* split, double* out) {
  SASR_REQUIRE(model && corpus && out, "null argument");
  Split s;
  SASR_REQUIRE(parse_split_arg(split, &s), "unknown split name");
  return api([&] { *out = mean_identity_loss(model->ckpt.params, corpus->data, s); });
}

}  // extern "C"
