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

#include <filesystem>
#include <map>
#include <string>

#include "semiasr/lm.hpp"
#include "semiasr/model.hpp"
#include "semiasr/optimizer.hpp"
#include "semiasr/vocabulary.hpp"

namespace semiasr {

// Binary layout, little-endian:
//   "SASRCKPT" u32 version, str kind, u32 n, n x (str key, str value),
//   u32 m, m x (str name, u32 rank, rank x u64 dim, f64 values)
// where str is u32 length followed by bytes.
struct Checkpoint {
  std::string kind;
  std::map<std::string, std::string> meta;
  ParamMap tensors;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct AsrCheckpoint {
  ModelParams params;
  Vocabulary vocab;
  OptimizerState optimizer;
  // Free-form tags: stage, variant, epoch, paired_hash, dev_cer, ...
  std::map<std::string, std::string> info;
};

void save_asr(const std::filesystem::path& path, const AsrCheckpoint& ckpt);
AsrCheckpoint load_asr(const std::filesystem::path& path);

struct LmCheckpoint {
  LmParams params;
  Vocabulary vocab;
  std::map<std::string, std::string> info;
};

void save_lm(const std::filesystem::path& path, const LmCheckpoint& ckpt);
LmCheckpoint load_lm(const std::filesystem::path& path);

}  // namespace semiasr
