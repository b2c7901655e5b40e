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

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "semiasr/checkpoint.hpp"
#include "semiasr/corpus.hpp"
#include "semiasr/decoder.hpp"
#include "semiasr/losses.hpp"
#include "semiasr/metrics.hpp"
#include "semiasr/optimizer.hpp"

namespace semiasr {

struct DecodeConfig {
  std::size_t beam_width = 5;
  double max_len_factor = 1.5;
  double lm_weight = 0.3;  // used only when an LM is supplied
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  CorpusConfig corpus;

  // Architecture; feat_dim and vocab_size come from the data.
  std::size_t hidden = 32;
  std::size_t shared_layers = 1;
  std::size_t decoder_layers = 1;
  std::size_t subsample = 2;
  std::size_t lm_hidden = 32;

  ObjectiveConfig objective;
  AdadeltaConfig adadelta;
  double clip_norm = 5.0;
  std::size_t batch_size = 16;
  std::size_t initial_epochs = 15;
  std::size_t retrain_epochs = 10;
  std::size_t lm_epochs = 8;
  std::size_t patience = 3;
  std::size_t eval_batch_size = 50;

  DecodeConfig decode;

  std::vector<double> sweep_betas{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<Variant> sweep_variants{Variant::kBaseline, Variant::kRetrainIdt,
                                      Variant::kRetrainCyc, Variant::kRetrainCycIdt};
  std::size_t workers = 1;

  void validate() const;
  ArchConfig arch(std::size_t feat_dim, std::size_t vocab_size) const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  double loss = 0.0;  // mean total objective
  std::map<std::string, double> components;  // means over steps
  double dev_cer = 0.0;
  double seconds = 0.0;
  std::size_t empty_hypotheses = 0;
};

struct TrainLog {
  std::string stage;
  std::string variant;
  std::vector<EpochRecord> epochs;

  // One row per epoch. Component columns are the union over epochs; an
  // absent component is left blank. Timing is kept out unless asked for,
  // so two identical runs write identical files.
  void write_csv(const std::filesystem::path& path, bool with_time = false) const;
};

struct TrainOptions {
  // Where the best-dev checkpoint is written; may be empty.
  std::filesystem::path checkpoint_path;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  AsrCheckpoint best;
  TrainLog log;
  std::size_t best_epoch = 0;
};

TrainResult train_initial(const ExperimentConfig& cfg, const Dataset& data,
                          const TrainOptions& options = {});

TrainResult retrain(const AsrCheckpoint& initial, const ExperimentConfig& cfg,
                    const Dataset& data, const TrainOptions& options = {});

struct LmEpochRecord {
  std::size_t epoch = 0;
  double train_nll = 0.0;  // per symbol, 0 before training
  double dev_perplexity = 0.0;
};

struct LmTrainResult {
  LmCheckpoint best;
  std::vector<LmEpochRecord> log;
};

LmTrainResult train_rnnlm(const ExperimentConfig& cfg, const Dataset& data,
                          const std::filesystem::path& checkpoint_path = {});
void write_lm_log(const std::filesystem::path& path, const std::vector<LmEpochRecord>& log);

// Greedy transcription of a split in fixed order; the dev criterion.
std::vector<DecodeRecord> greedy_transcribe(const ModelParams& params, const Dataset& data,
                                            Split split, std::size_t batch_size,
                                            double max_len_factor);
double dev_cer(const ModelParams& params, const Dataset& data, std::size_t batch_size,
               double max_len_factor);

// Beam search over a split; lm may be null.
std::vector<DecodeRecord> decode_split(const ModelParams& params, const Vocabulary& vocab,
                                       const Dataset& data, Split split,
                                       const DecodeConfig& cfg, const LmParams* lm,
                                       std::size_t batch_size = 50);

// Mean L_idt over the speech embeddings of a split.
double mean_identity_loss(const ModelParams& params, const Dataset& data, Split split,
                          std::size_t batch_size = 50);

struct SweepRow {
  Variant variant = Variant::kBaseline;
  double beta = 0.0;
  std::optional<double> cer;
  std::optional<double> wer;
  std::string error;  // set when the cell failed
};

std::vector<SweepRow> sweep_beta(const AsrCheckpoint& initial, const ExperimentConfig& cfg,
                                 const Dataset& data, const LmParams* lm = nullptr);
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

// Model | Type | LM naming for reports.
std::string unpaired_type(Variant variant, double alpha, double beta);

}  // namespace semiasr
