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

#include "semiasr/vocabulary.hpp"

#include <algorithm>

#include "semiasr/errors.hpp"

namespace semiasr {

Vocabulary Vocabulary::from_characters(std::string_view chars) {
  if (chars.empty()) throw DataError("vocabulary needs at least one character");
  Vocabulary v;
  v.chars_.assign(chars.begin(), chars.end());
  std::sort(v.chars_.begin(), v.chars_.end());
  v.chars_.erase(std::unique(v.chars_.begin(), v.chars_.end()), v.chars_.end());
  v.lookup_.fill(kUnk);
  for (std::size_t i = 0; i < v.chars_.size(); ++i)
    v.lookup_[static_cast<unsigned char>(v.chars_[i])] =
        kNumSpecials + static_cast<int>(i);
  return v;
}

int Vocabulary::index_of(char c) const {
  if (chars_.empty()) return kUnk;
  return lookup_[static_cast<unsigned char>(c)];
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
  std::vector<int> out;
  out.reserve(text.size());
  for (char c : text) out.push_back(index_of(c));
  return out;
}

std::string Vocabulary::decode(std::span<const int> labels) const {
  std::string out;
  for (int l : labels) {
    if (l == kUnk) {
      out.push_back('?');
    } else if (l >= kNumSpecials && static_cast<std::size_t>(l) < size()) {
      out.push_back(chars_[l - kNumSpecials]);
    }
  }
  return out;
}

std::string Vocabulary::symbol(int index) const {
  switch (index) {
    case kSos: return "<sos>";
    case kEos: return "<eos>";
    case kBlank: return "<blank>";
    case kUnk: return "<unk>";
    default: break;
  }
  if (index < 0 || static_cast<std::size_t>(index) >= size())
    throw DataError("symbol index " + std::to_string(index) + " out of range");
  return std::string(1, chars_[index - kNumSpecials]);
}

}  // namespace semiasr
