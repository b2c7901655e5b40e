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

/* C interface to the semiasr library. All handles are opaque; every call
 * returns a status code, and the message for the most recent failure on
 * the calling thread is available from sasr_last_error(). */

#ifndef SEMIASR_SEMIASR_H_
#define SEMIASR_SEMIASR_H_

#include <stddef.h>

#if defined(_WIN32)
#  define SASR_API
#elif defined(SEMIASR_BUILDING_LIBRARY)
#  define SASR_API __attribute__((visibility("default")))
#else
#  define SASR_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sasr_status {
  SASR_OK = 0,
  SASR_ERR_INVALID_ARGUMENT = 1, /* null handle, bad split or unit name */
  SASR_ERR_CONFIG = 2,           /* unknown key or invalid value */
  SASR_ERR_IO = 3,               /* unreadable or unwritable file */
  SASR_ERR_DATA = 4,             /* malformed or inconsistent data */
  SASR_ERR_SHAPE = 5,
  SASR_ERR_NUMERIC = 6,          /* non-finite values, divergence */
  SASR_ERR_BUFFER_TOO_SMALL = 7,
  SASR_ERR_INTERNAL = 8
} sasr_status;

typedef struct sasr_config sasr_config;
typedef struct sasr_corpus sasr_corpus;
typedef struct sasr_model sasr_model;
typedef struct sasr_lm sasr_lm;
typedef struct sasr_report sasr_report;

SASR_API const char* sasr_version(void);
SASR_API const char* sasr_status_string(sasr_status status);
/* Empty string when the last call on this thread succeeded. */
SASR_API const char* sasr_last_error(void);

/* Progress lines (one per epoch) go to this callback; NULL silences. */
typedef void (*sasr_progress_fn)(const char* line, void* user);
SASR_API void sasr_set_progress_callback(sasr_progress_fn fn, void* user);

/* Configuration. Keys are "section.key". */
SASR_API sasr_status sasr_config_new(sasr_config** out);
SASR_API sasr_status sasr_config_load(const char* path, sasr_config** out);
SASR_API void sasr_config_free(sasr_config* cfg);
SASR_API sasr_status sasr_config_set(sasr_config* cfg, const char* key, const char* value);
/* Copies the value including its terminator; *needed gets the full size.
 * A NULL buffer with cap 0 only queries the size. The same convention
 * holds for every call that fills a caller buffer. */
SASR_API sasr_status sasr_config_get(const sasr_config* cfg, const char* key, char* buf,
                                     size_t cap, size_t* needed);
SASR_API sasr_status sasr_config_validate(const sasr_config* cfg);
/* Writes the resolved configuration, every key included. */
SASR_API sasr_status sasr_config_save(const sasr_config* cfg, const char* path);

/* Corpus. */
SASR_API sasr_status sasr_generate_corpus(const sasr_config* cfg, const char* out_dir);
SASR_API sasr_status sasr_corpus_load(const char* manifest_path, sasr_corpus** out);
SASR_API void sasr_corpus_free(sasr_corpus* corpus);
SASR_API sasr_status sasr_corpus_size(const sasr_corpus* corpus, const char* split,
                                      size_t* out);

/* Training. Checkpoint and log paths may be NULL to skip writing them. */
SASR_API sasr_status sasr_train_initial(const sasr_config* cfg, const sasr_corpus* corpus,
                                        const char* checkpoint_path, const char* log_path,
                                        sasr_model** out);
SASR_API sasr_status sasr_retrain(const sasr_config* cfg, const sasr_corpus* corpus,
                                  const sasr_model* initial, const char* checkpoint_path,
                                  const char* log_path, sasr_model** out);
SASR_API sasr_status sasr_train_lm(const sasr_config* cfg, const sasr_corpus* corpus,
                                   const char* checkpoint_path, const char* log_path,
                                   sasr_lm** out);

SASR_API sasr_status sasr_model_load(const char* path, sasr_model** out);
SASR_API sasr_status sasr_model_save(const sasr_model* model, const char* path);
SASR_API void sasr_model_free(sasr_model* model);
/* Checkpoint tags such as "variant", "epoch", "dev_cer". */
SASR_API sasr_status sasr_model_info(const sasr_model* model, const char* key, char* buf,
                                     size_t cap, size_t* needed);
SASR_API sasr_status sasr_lm_load(const char* path, sasr_lm** out);
SASR_API void sasr_lm_free(sasr_lm* lm);

/* Beam search over a split with the config's decode settings; lm may be
 * NULL. greedy != 0 selects greedy decoding instead. Output: one
 * "id<TAB>text<TAB>score" line per utterance. */
SASR_API sasr_status sasr_decode(const sasr_config* cfg, const sasr_model* model,
                                 const sasr_lm* lm, const sasr_corpus* corpus,
                                 const char* split, int greedy, const char* out_path);

/* Scoring against a split's transcripts. Tags label the report rows. */
SASR_API sasr_status sasr_score(const sasr_corpus* corpus, const char* split,
                                const char* hyp_path, const char* model_tag,
                                const char* type_tag, const char* lm_tag, sasr_report** out);
SASR_API void sasr_report_free(sasr_report* report);
SASR_API double sasr_report_cer(const sasr_report* report);
SASR_API double sasr_report_wer(const sasr_report* report);
SASR_API sasr_status sasr_report_write_csv(const sasr_report* report, const char* path);
/* Model | Type | LM | CER | WER table over several reports. */
SASR_API sasr_status sasr_report_table(const sasr_report* const* reports, size_t n, char* buf,
                                       size_t cap, size_t* needed);

/* Retrains every (variant, beta) cell of the config's sweep and writes
 * variant,beta,cer,wer rows. Failed cells are counted, reported as NA and
 * do not stop the sweep. */
SASR_API sasr_status sasr_sweep_beta(const sasr_config* cfg, const sasr_corpus* corpus,
                                     const sasr_model* initial, const sasr_lm* lm,
                                     const char* csv_path, size_t* failed_cells);

/* Writes utt_id,source,frame,e0..e{H-1}[,pc1,pc2] rows for the speech
 * and/or text side of a split. */
SASR_API sasr_status sasr_export_embeddings(const sasr_model* model, const sasr_corpus* corpus,
                                            const char* split, int speech, int text,
                                            int projection, const char* out_path,
                                            size_t* rows);

/* Mean per-frame identity-mapping loss over a split's speech embeddings. */
SASR_API sasr_status sasr_identity_loss(const sasr_model* model, const sasr_corpus* corpus,
                                        const char* split, double* out);

#ifdef __cplusplus
}
#endif

#endif  /* SEMIASR_SEMIASR_H_ */
