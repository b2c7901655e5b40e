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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "semiasr/losses.hpp"
#include "semiasr/model.hpp"
#include "semiasr/vocabulary.hpp"

namespace semiasr {

enum class Split { kPaired, kUnpairedSpeech, kUnpairedText, kDev, kEval };

std::string_view split_name(Split s);
Split parse_split(std::string_view name);

struct CorpusConfig {
  std::string alphabet = "abcdefg ";
  // Speech utterances shared between the paired and unpaired_speech splits.
  std::size_t speech_utterances = 1000;
  double paired_fraction = 0.2;
  std::size_t text_utterances = 800;
  std::size_t dev_utterances = 100;
  std::size_t eval_utterances = 100;
  std::size_t min_length = 3;
  std::size_t max_length = 10;
  std::size_t min_duration = 2;
  std::size_t max_duration = 5;
  double noise_std = 0.3;
  std::size_t feat_dim = 16;
  std::uint64_t seed = 1;
  // Target-domain distortion applied to unpaired speech, dev and eval.
  // An empty bias draws one with per-dimension std shift_std.
  std::vector<double> shift_bias;
  double shift_std = 0.25;
  double shift_scale = 1.0;

  std::size_t paired_utterances() const;
  void validate() const;
};

struct ManifestRecord {
  std::string id;
  std::string path;  // empty for unpaired_text
  std::string transcript;
  Split split = Split::kPaired;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct Manifest {
  std::filesystem::path directory;
  std::vector<ManifestRecord> records;

  std::vector<const ManifestRecord*> split(Split s) const;
  std::filesystem::path resolve(const ManifestRecord& r) const;

  static Manifest read(const std::filesystem::path& file);
  void write(const std::filesystem::path& file) const;
};

inline constexpr const char* kManifestFile = "manifest.jsonl";

Manifest generate_corpus(const CorpusConfig& cfg, const std::filesystem::path& out_dir);

// One frame per line, comma separated.
Tensor read_features(const std::filesystem::path& file);
void write_features(const std::filesystem::path& file, const Tensor& frames);

Vocabulary build_vocabulary(const Manifest& manifest);

struct Utterance {
  std::string id;
  FeatureSequence features;  // empty for unpaired_text
  std::string transcript;
  std::vector<int> labels;
};

// Loaded corpus. Training views of unpaired_speech carry features only.
class Dataset {
 public:
  static Dataset load(const Manifest& manifest);
  static Dataset load(const Manifest& manifest, const Vocabulary& vocab);

  const Manifest& manifest() const { return manifest_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  std::size_t feat_dim() const { return feat_dim_; }
  const std::vector<Utterance>& utterances(Split s) const;

  // Scoring references, (id, transcript).
  std::vector<std::pair<std::string, std::string>> references(Split s) const;
  // Hash of the paired split: ids, transcripts and feature values.
  std::string paired_hash() const;

 private:
  Manifest manifest_;
  Vocabulary vocab_;
  std::size_t feat_dim_ = 0;
  std::map<Split, std::vector<Utterance>> splits_;
};

// Deterministic grouping of n items into batches, shuffled per (seed, epoch);
// seed 0 with shuffle=false keeps manifest order.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t seed, std::uint64_t epoch,
                                                    bool shuffle = true);

std::vector<PairedBatch> paired_batches(const Dataset& data, Split split,
                                        std::size_t batch_size, std::uint64_t seed,
                                        std::uint64_t epoch, bool shuffle = true);
std::vector<FeatureBatch> speech_batches(const Dataset& data, Split split,
                                         std::size_t batch_size, std::uint64_t seed,
                                         std::uint64_t epoch, bool shuffle = true);
std::vector<LabelBatch> text_batches(const Dataset& data, Split split,
                                     std::size_t batch_size, std::uint64_t seed,
                                     std::uint64_t epoch, bool shuffle = true);

}  // namespace semiasr
