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

// Exhaustive CTC path enumeration for tiny problems.

#pragma once

#include <cmath>
#include <vector>

#include "gradcheck.hpp"
#include "semiasr/autograd.hpp"

namespace semiasr::testing {

inline constexpr int kBlankSym = 0;

// Merge repeats, then drop blanks.
inline std::vector<int> collapse(const std::vector<int>& path) {
  std::vector<int> out;
  int last = -1;
  for (int s : path) {
    if (s != last && s != kBlankSym) out.push_back(s);
    last = s;
  }
  return out;
}

// Sum of exp(sum_u lp(u, path_u)) over every length-U path that collapses
// to labels. Returns -inf when nothing does.
inline double brute_force(const Tensor& lp, const std::vector<int>& labels) {
  const std::size_t u = lp.rows(), v = lp.cols();
  std::size_t total = 1;
  for (std::size_t i = 0; i < u; ++i) total *= v;
  double prob = 0.0;
  std::vector<int> path(u);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    double logp = 0.0;
    for (std::size_t t = 0; t < u; ++t) {
      path[t] = static_cast<int>(c % v);
      c /= v;
      logp += lp.at(t, static_cast<std::size_t>(path[t]));
    }
    if (collapse(path) == labels) prob += std::exp(logp);
  }
  return std::log(prob);
}

inline Tensor random_log_probs(Rng& rng, std::size_t u, std::size_t v) {
  Tensor logits = testing::random_tensor(rng, {u, v}, -2.0, 2.0);
  Graph g(false);
  return log_softmax(g.constant(logits)).value();
}

// Every label sequence of length 0..2 over symbols 1..v-1.
inline std::vector<std::vector<int>> targets(std::size_t v) {
  std::vector<std::vector<int>> out{{}};
  for (int a = 1; a < static_cast<int>(v); ++a) {
    out.push_back({a});
    for (int b = 1; b < static_cast<int>(v); ++b) out.push_back({a, b});
  }
  return out;
}

}  // namespace semiasr::testing
