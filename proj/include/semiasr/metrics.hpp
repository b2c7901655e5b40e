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

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "semiasr/model.hpp"

namespace semiasr {

using Token = std::string;

struct AlignedPair {
  std::optional<Token> ref;  // empty for an insertion
  std::optional<Token> hyp;  // empty for a deletion
};

struct EditCounts {
  std::size_t hits = 0;
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;

  std::size_t edits() const { return substitutions + deletions + insertions; }
  std::size_t ref_length() const { return hits + substitutions + deletions; }
  std::size_t hyp_length() const { return hits + substitutions + insertions; }
  // Edits over reference length; an empty reference scores 0 or 1.
  double rate() const;

  EditCounts& operator+=(const EditCounts& o);
  friend bool operator==(const EditCounts&, const EditCounts&) = default;
};

struct AlignmentResult {
  EditCounts counts;
  std::vector<AlignedPair> pairs;
};

// Minimum edit distance with unit costs. Among minimal alignments the one
// with more hits wins, then the one with fewer substitutions.
AlignmentResult align(const std::vector<Token>& ref, const std::vector<Token>& hyp);

enum class Unit { kChar, kWord };

std::vector<Token> tokenize(std::string_view text, Unit unit);

struct DecodeRecord {
  std::string id;
  std::string text;
  double score = 0.0;
};

// One tab-separated record per line: id, hypothesis, score.
void write_decode_output(const std::filesystem::path& path,
                         const std::vector<DecodeRecord>& records);
std::vector<DecodeRecord> read_decode_output(const std::filesystem::path& path);

struct UtteranceScore {
  std::string id;
  std::string reference;
  std::string hypothesis;
  EditCounts chars;
  EditCounts words;
};

struct ScoreReport {
  std::string model;
  std::string type;
  std::string lm;
  std::vector<UtteranceScore> utterances;  // reference order
  EditCounts chars;
  EditCounts words;

  double cer() const { return chars.rate(); }
  double wer() const { return words.rate(); }
};

// refs are (id, transcript) pairs. Every reference needs exactly one
// hypothesis and every hypothesis a reference.
ScoreReport score_corpus(const std::vector<std::pair<std::string, std::string>>& refs,
                         const std::vector<DecodeRecord>& hyps);
// Corpus-level counts for one unit.
EditCounts score_corpus(const std::vector<std::pair<std::string, std::string>>& refs,
                        const std::vector<DecodeRecord>& hyps, Unit unit);

void write_score_csv(const std::filesystem::path& path, const ScoreReport& report);
// Model | Type | LM | CER | WER, rates in percent.
std::string format_score_table(const std::vector<ScoreReport>& reports);

struct EmbeddingExport {
  std::vector<FeatureSequence> speech;
  std::vector<std::pair<std::string, LabelSequence>> text;
  bool projection = false;
};

// Returns the number of rows written.
std::size_t export_embeddings(const ModelParams& params, const EmbeddingExport& what,
                              const std::filesystem::path& path);

// Top two principal directions of the centred rows, H x 2, sign-fixed so
// the largest-magnitude entry of each column is positive.
Tensor principal_directions(const Tensor& rows);

}  // namespace semiasr
