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

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace semiasr {

inline constexpr int kSos = 0;
inline constexpr int kEos = 1;
inline constexpr int kBlank = 2;
inline constexpr int kUnk = 3;
inline constexpr int kNumSpecials = 4;

// Character vocabulary: the four specials at fixed indices 0-3 followed by
// the sorted unique characters. Characters are single bytes.
class Vocabulary {
 public:
  Vocabulary() = default;
  // Sorted and deduplicated; throws DataError if chars is empty.
  static Vocabulary from_characters(std::string_view chars);

  std::size_t size() const { return kNumSpecials + chars_.size(); }
  const std::string& characters() const { return chars_; }

  // Unknown characters map to kUnk.
  int index_of(char c) const;
  std::vector<int> encode(std::string_view text) const;
  // Specials other than UNK are dropped; UNK renders as '?'.
  std::string decode(std::span<const int> labels) const;
  std::string symbol(int index) const;

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  std::string chars_;
  std::array<int, 256> lookup_{};
};

}  // namespace semiasr
