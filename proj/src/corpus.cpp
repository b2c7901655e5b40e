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

#include "semiasr/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "semiasr/errors.hpp"
#include "semiasr/rng.hpp"

namespace semiasr {

namespace fs = std::filesystem;

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kPaired: return "paired";
    case Split::kUnpairedSpeech: return "unpaired_speech";
    case Split::kUnpairedText: return "unpaired_text";
    case Split::kDev: return "dev";
    case Split::kEval: return "eval";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  for (Split s : {Split::kPaired, Split::kUnpairedSpeech, Split::kUnpairedText, Split::kDev,
                  Split::kEval})
    if (split_name(s) == name) return s;
  throw DataError("unknown split '" + std::string(name) +
                  "' (expected paired, unpaired_speech, unpaired_text, dev or eval)");
}

std::size_t CorpusConfig::paired_utterances() const {
  return static_cast<std::size_t>(
      std::llround(paired_fraction * static_cast<double>(speech_utterances)));
}

void CorpusConfig::validate() const {
  if (alphabet.empty()) throw ConfigError("corpus alphabet is empty");
  std::set<char> seen;
  std::size_t letters = 0;
  for (char c : alphabet) {
    if (c == '\n' || c == '\r' || c == '\t' || c == '?')
      throw ConfigError("corpus alphabet may not contain tabs, newlines or '?'");
    if (!seen.insert(c).second)
      throw ConfigError(std::string("corpus alphabet repeats '") + c + "'");
    if (c != ' ') ++letters;
  }
  // Transcripts never repeat a character back to back.
  if (letters < 2) throw ConfigError("corpus alphabet needs two non-space characters");
  if (!(paired_fraction > 0.0 && paired_fraction < 1.0))
    throw ConfigError("paired fraction must lie in (0, 1)");
  const std::size_t paired = paired_utterances();
  if (paired == 0 || paired >= speech_utterances)
    throw ConfigError("paired fraction leaves an empty paired or unpaired split");
  if (text_utterances == 0 || dev_utterances == 0 || eval_utterances == 0)
    throw ConfigError("text, dev and eval splits must be non-empty");
  if (min_length == 0 || min_length > max_length)
    throw ConfigError("transcript length range must satisfy 1 <= min <= max");
  if (min_duration == 0 || min_duration > max_duration)
    throw ConfigError("duration range must satisfy 1 <= min <= max");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std))
    throw ConfigError("noise std must be finite and non-negative");
  if (feat_dim == 0) throw ConfigError("feature dimension must be positive");
  if (!shift_bias.empty() && shift_bias.size() != feat_dim)
    throw ConfigError("shift bias has " + std::to_string(shift_bias.size()) +
                      " entries, expected " + std::to_string(feat_dim));
  if (!(shift_std >= 0.0) || !std::isfinite(shift_std))
    throw ConfigError("shift std must be finite and non-negative");
  if (!(shift_scale > 0.0) || !std::isfinite(shift_scale))
    throw ConfigError("shift scale must be positive");
}

std::vector<const ManifestRecord*> Manifest::split(Split s) const {
  std::vector<const ManifestRecord*> out;
  for (const auto& r : records)
    if (r.split == s) out.push_back(&r);
  return out;
}

fs::path Manifest::resolve(const ManifestRecord& r) const {
  if (r.path.empty()) throw DataError("utterance '" + r.id + "' has no feature file");
  return directory / r.path;
}

Manifest Manifest::read(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read manifest " + file.string());
  Manifest m;
  m.directory = file.parent_path();
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const std::string where = file.string() + ":" + std::to_string(lineno) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + "malformed record: " + e.what());
    }
    ManifestRecord r;
    try {
      r.id = j.at("id").get<std::string>();
      r.transcript = j.at("transcript").get<std::string>();
      r.split = parse_split(j.at("split").get<std::string>());
      if (j.contains("path")) r.path = j.at("path").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + "bad field: " + e.what());
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
    if (r.id.empty()) throw DataError(where + "empty utterance id");
    if (!ids.insert(r.id).second) throw DataError(where + "duplicate id '" + r.id + "'");
    if (r.split == Split::kUnpairedText && !r.path.empty())
      throw DataError(where + "unpaired_text record '" + r.id + "' has a feature path");
    if (r.split != Split::kUnpairedText && r.path.empty())
      throw DataError(where + "record '" + r.id + "' lacks a feature path");
    m.records.push_back(std::move(r));
  }
  if (m.records.empty()) throw DataError("manifest " + file.string() + " is empty");
  return m;
}

void Manifest::write(const fs::path& file) const {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write manifest " + file.string());
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    if (!r.path.empty()) j["path"] = r.path;
    j["transcript"] = r.transcript;
    j["split"] = std::string(split_name(r.split));
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("failed writing " + file.string());
}

Tensor read_features(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read features " + file.string());
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t n = 0;
    const char* p = line.c_str();
    while (true) {
      char* end = nullptr;
      const double v = std::strtod(p, &end);
      if (end == p)
        throw DataError(file.string() + ":" + std::to_string(rows + 1) + ": bad number");
      values.push_back(v);
      ++n;
      p = end;
      if (*p == ',') ++p;
      else if (*p == '\0') break;
      else throw DataError(file.string() + ":" + std::to_string(rows + 1) + ": bad separator");
    }
    if (rows == 0) cols = n;
    else if (n != cols)
      throw DataError(file.string() + ":" + std::to_string(rows + 1) + ": expected " +
                      std::to_string(cols) + " values, got " + std::to_string(n));
    ++rows;
  }
  if (rows == 0) throw DataError("feature file " + file.string() + " has no frames");
  Tensor t = Tensor::zeros({rows, cols});
  std::copy(values.begin(), values.end(), t.data());
  return t;
}

void write_features(const fs::path& file, const Tensor& frames) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write features " + file.string());
  char buf[40];
  for (std::size_t r = 0; r < frames.rows(); ++r) {
    for (std::size_t c = 0; c < frames.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", frames.at(r, c));
      if (c) out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + file.string());
}

namespace {

// Sparse first-order chain over the alphabet; row `n` is the start state.
// A character never follows itself, so with at least two frames per
// character every utterance keeps one encoder step per label after 2x
// subsampling and stays CTC-alignable.
class TranscriptModel {
 public:
  TranscriptModel(const std::string& alphabet, Rng& rng) : alphabet_(alphabet) {
    const std::size_t n = alphabet.size();
    const std::size_t keep = std::max<std::size_t>(2, (n + 1) / 2);
    weights_.assign(n + 1, std::vector<double>(n, 0.0));
    for (auto& row : weights_) {
      std::vector<double> w(n);
      for (auto& x : w) x = std::exp(1.5 * rng.normal());
      std::vector<double> sorted = w;
      std::sort(sorted.begin(), sorted.end(), std::greater<>());
      const double cut = sorted[std::min(keep, n) - 1];
      for (std::size_t c = 0; c < n; ++c) row[c] = w[c] >= cut ? w[c] : 0.0;
    }
  }

  std::string sample(std::size_t length, Rng& rng) const {
    std::string out;
    std::size_t state = alphabet_.size();
    for (std::size_t i = 0; i < length; ++i) {
      const bool space_ok = i > 0 && i + 1 < length && out.back() != ' ';
      std::vector<double> w = weights_[state];
      auto allowed = [&](std::size_t c) {
        return c != state && (alphabet_[c] != ' ' || space_ok);
      };
      for (std::size_t c = 0; c < w.size(); ++c)
        if (!allowed(c)) w[c] = 0.0;
      double total = 0.0;
      for (double x : w) total += x;
      if (total <= 0.0) {
        for (std::size_t c = 0; c < w.size(); ++c) w[c] = allowed(c) ? 1.0 : 0.0;
        total = 0.0;
        for (double x : w) total += x;
      }
      double u = rng.uniform() * total;
      std::size_t pick = 0;
      for (; pick + 1 < w.size(); ++pick) {
        if (w[pick] > 0.0 && u < w[pick]) break;
        u -= w[pick];
      }
      while (w[pick] <= 0.0) --pick;  // rounding at the top end
      out += alphabet_[pick];
      state = pick;
    }
    return out;
  }

 private:
  std::string alphabet_;
  std::vector<std::vector<double>> weights_;
};

std::string make_id(std::string_view prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%04zu", std::string(prefix).c_str(), i);
  return buf;
}

}  // namespace

Manifest generate_corpus(const CorpusConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(out_dir / "features", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "features").string() + ": " + ec.message());

  const std::size_t f = cfg.feat_dim;
  Rng proto_rng(derive_seed(cfg.seed, "corpus/prototypes"));
  std::vector<std::vector<double>> proto(cfg.alphabet.size(), std::vector<double>(f));
  for (auto& p : proto)
    for (auto& x : p) x = proto_rng.normal();
  Rng chain_rng(derive_seed(cfg.seed, "corpus/bigram"));
  TranscriptModel chain(cfg.alphabet, chain_rng);
  std::vector<double> bias = cfg.shift_bias;
  if (bias.empty()) {
    Rng shift_rng(derive_seed(cfg.seed, "corpus/shift"));
    bias.resize(f);
    for (auto& x : bias) x = cfg.shift_std * shift_rng.normal();
  }

  Manifest m;
  m.directory = out_dir;
  auto emit = [&](std::string_view prefix, std::size_t count, Split split, bool speech,
                  bool shifted) {
    for (std::size_t i = 0; i < count; ++i) {
      ManifestRecord r;
      r.id = make_id(prefix, i);
      r.split = split;
      Rng rng(derive_seed(cfg.seed, "corpus/utt/" + r.id));
      const auto len = static_cast<std::size_t>(
          rng.integer(static_cast<std::int64_t>(cfg.min_length),
                      static_cast<std::int64_t>(cfg.max_length)));
      r.transcript = chain.sample(len, rng);
      if (speech) {
        std::vector<std::size_t> chars, durations;
        std::size_t frames = 0;
        for (char c : r.transcript) {
          chars.push_back(cfg.alphabet.find(c));
          durations.push_back(static_cast<std::size_t>(
              rng.integer(static_cast<std::int64_t>(cfg.min_duration),
                          static_cast<std::int64_t>(cfg.max_duration))));
          frames += durations.back();
        }
        Tensor x = Tensor::zeros({frames, f});
        std::size_t t = 0;
        for (std::size_t k = 0; k < chars.size(); ++k)
          for (std::size_t d = 0; d < durations[k]; ++d, ++t)
            for (std::size_t j = 0; j < f; ++j) {
              double v = proto[chars[k]][j] + cfg.noise_std * rng.normal();
              if (shifted) v = cfg.shift_scale * v + bias[j];
              x.at(t, j) = v;
            }
        r.path = "features/" + r.id + ".csv";
        write_features(out_dir / r.path, x);
      }
      m.records.push_back(std::move(r));
    }
  };
  const std::size_t paired = cfg.paired_utterances();
  emit("paired", paired, Split::kPaired, true, false);
  emit("speech", cfg.speech_utterances - paired, Split::kUnpairedSpeech, true, true);
  emit("text", cfg.text_utterances, Split::kUnpairedText, false, false);
  emit("dev", cfg.dev_utterances, Split::kDev, true, true);
  emit("eval", cfg.eval_utterances, Split::kEval, true, true);
  m.write(out_dir / kManifestFile);
  return m;
}

Vocabulary build_vocabulary(const Manifest& manifest) {
  std::string chars;
  for (const auto& r : manifest.records)
    if (r.split == Split::kPaired || r.split == Split::kUnpairedText) chars += r.transcript;
  if (chars.empty()) throw DataError("no training transcripts to build a vocabulary from");
  return Vocabulary::from_characters(chars);
}

Dataset Dataset::load(const Manifest& manifest) {
  return load(manifest, build_vocabulary(manifest));
}

Dataset Dataset::load(const Manifest& manifest, const Vocabulary& vocab) {
  Dataset d;
  d.manifest_ = manifest;
  d.vocab_ = vocab;
  for (Split s : {Split::kPaired, Split::kUnpairedSpeech, Split::kUnpairedText, Split::kDev,
                  Split::kEval})
    d.splits_[s];
  for (const auto& r : manifest.records) {
    Utterance u;
    u.id = r.id;
    u.transcript = r.transcript;
    u.labels = vocab.encode(r.transcript);
    if (!r.path.empty()) {
      u.features.id = r.id;
      u.features.frames = read_features(manifest.resolve(r));
      if (d.feat_dim_ == 0) d.feat_dim_ = u.features.frames.cols();
      else if (u.features.frames.cols() != d.feat_dim_)
        throw DataError("utterance '" + r.id + "' has " +
                        std::to_string(u.features.frames.cols()) + "-dim features, expected " +
                        std::to_string(d.feat_dim_));
    }
    d.splits_[r.split].push_back(std::move(u));
  }
  return d;
}

const std::vector<Utterance>& Dataset::utterances(Split s) const { return splits_.at(s); }

std::vector<std::pair<std::string, std::string>> Dataset::references(Split s) const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& u : utterances(s)) out.emplace_back(u.id, u.transcript);
  return out;
}

std::string Dataset::paired_hash() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& u : utterances(Split::kPaired)) {
    mix(u.id.data(), u.id.size());
    mix("\0", 1);
    mix(u.transcript.data(), u.transcript.size());
    mix("\0", 1);
    const auto v = u.features.frames.values();
    mix(v.data(), v.size() * sizeof(double));
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t seed, std::uint64_t epoch,
                                                    bool shuffle) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (shuffle) {
    Rng rng(derive_seed(seed, "epoch/" + std::to_string(epoch)));
    rng.shuffle(order);
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += batch_size)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  return out;
}

namespace {

const std::vector<Utterance>& speech_split(const Dataset& data, Split split) {
  if (split == Split::kUnpairedText)
    throw DataError("split unpaired_text has no speech features");
  return data.utterances(split);
}

std::uint64_t split_seed(std::uint64_t seed, Split split) {
  return derive_seed(seed, "batches/" + std::string(split_name(split)));
}

}  // namespace

std::vector<PairedBatch> paired_batches(const Dataset& data, Split split,
                                        std::size_t batch_size, std::uint64_t seed,
                                        std::uint64_t epoch, bool shuffle) {
  if (split == Split::kUnpairedSpeech)
    throw DataError("transcripts of unpaired_speech are not available for training");
  const auto& utts = speech_split(data, split);
  std::vector<PairedBatch> out;
  for (const auto& group :
       batch_indices(utts.size(), batch_size, split_seed(seed, split), epoch, shuffle)) {
    std::vector<FeatureSequence> feats;
    std::vector<std::vector<int>> labels;
    for (std::size_t i : group) {
      feats.push_back(utts[i].features);
      labels.push_back(utts[i].labels);
    }
    out.push_back({FeatureBatch::pack(feats), LabelBatch::pack(std::move(labels))});
  }
  return out;
}

std::vector<FeatureBatch> speech_batches(const Dataset& data, Split split,
                                         std::size_t batch_size, std::uint64_t seed,
                                         std::uint64_t epoch, bool shuffle) {
  const auto& utts = speech_split(data, split);
  std::vector<FeatureBatch> out;
  for (const auto& group :
       batch_indices(utts.size(), batch_size, split_seed(seed, split), epoch, shuffle)) {
    std::vector<FeatureSequence> feats;
    for (std::size_t i : group) feats.push_back(utts[i].features);
    out.push_back(FeatureBatch::pack(feats));
  }
  return out;
}

std::vector<LabelBatch> text_batches(const Dataset& data, Split split,
                                     std::size_t batch_size, std::uint64_t seed,
                                     std::uint64_t epoch, bool shuffle) {
  if (split == Split::kUnpairedSpeech)
    throw DataError("transcripts of unpaired_speech are not available for training");
  const auto& utts = data.utterances(split);
  std::vector<LabelBatch> out;
  for (const auto& group :
       batch_indices(utts.size(), batch_size, split_seed(seed, split), epoch, shuffle)) {
    std::vector<std::vector<int>> labels;
    for (std::size_t i : group) labels.push_back(utts[i].labels);
    out.push_back(LabelBatch::pack(std::move(labels)));
  }
  return out;
}

}  // namespace semiasr
