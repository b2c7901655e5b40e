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

// Edit-distance oracles written independently of the scorer.

#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "semiasr/rng.hpp"

namespace semiasr::testing {

// (edits, -hits) minimized lexicographically by a plain table fill.
struct Cell {
  std::size_t edits = 0;
  std::size_t hits = 0;
  std::size_t subs = 0;
  std::size_t dels = 0;
  std::size_t ins = 0;
  auto key() const { return std::make_tuple(edits, -static_cast<long>(hits), subs); }
};

inline Cell oracle(const std::string& r, const std::string& h) {
  std::vector<std::vector<Cell>> t(r.size() + 1, std::vector<Cell>(h.size() + 1));
  for (std::size_t i = 1; i <= r.size(); ++i) t[i][0] = {i, 0, 0, i, 0};
  for (std::size_t j = 1; j <= h.size(); ++j) t[0][j] = {j, 0, 0, 0, j};
  for (std::size_t i = 1; i <= r.size(); ++i) {
    for (std::size_t j = 1; j <= h.size(); ++j) {
      Cell diag = t[i - 1][j - 1];
      if (r[i - 1] == h[j - 1]) {
        ++diag.hits;
      } else {
        ++diag.edits;
        ++diag.subs;
      }
      Cell del = t[i - 1][j];
      ++del.edits;
      ++del.dels;
      Cell ins = t[i][j - 1];
      ++ins.edits;
      ++ins.ins;
      Cell best = diag;
      if (del.key() < best.key()) best = del;
      if (ins.key() < best.key()) best = ins;
      t[i][j] = best;
    }
  }
  return t[r.size()][h.size()];
}

// Every alignment, for very short strings.
inline void enumerate(const std::string& r, const std::string& h, std::size_t i, std::size_t j,
                      Cell acc, std::vector<Cell>& out) {
  if (i == r.size() && j == h.size()) {
    out.push_back(acc);
    return;
  }
  if (i < r.size() && j < h.size()) {
    Cell c = acc;
    if (r[i] == h[j]) {
      ++c.hits;
    } else {
      ++c.subs;
      ++c.edits;
    }
    enumerate(r, h, i + 1, j + 1, c, out);
  }
  if (i < r.size()) {
    Cell c = acc;
    ++c.dels;
    ++c.edits;
    enumerate(r, h, i + 1, j, c, out);
  }
  if (j < h.size()) {
    Cell c = acc;
    ++c.ins;
    ++c.edits;
    enumerate(r, h, i, j + 1, c, out);
  }
}

inline std::string random_string(Rng& rng, std::size_t max_len, const std::string& alphabet) {
  const auto n = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(max_len)));
  std::string s;
  for (std::size_t k = 0; k < n; ++k)
    s += alphabet[static_cast<std::size_t>(
        rng.integer(0, static_cast<std::int64_t>(alphabet.size()) - 1))];
  return s;
}

}  // namespace semiasr::testing
