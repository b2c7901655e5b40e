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

#include "semiasr/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "semiasr/errors.hpp"

namespace semiasr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

}  // namespace

std::size_t ctc_min_frames(std::span<const int> labels) {
  std::size_t n = labels.size();
  for (std::size_t i = 1; i < labels.size(); ++i)
    if (labels[i] == labels[i - 1]) ++n;
  return n;
}

CtcResult ctc_forward_backward(const Tensor& log_probs,
                               std::span<const int> labels, int blank,
                               bool with_occupancy) {
  const std::size_t frames = log_probs.rows();
  const std::size_t vocab = log_probs.cols();
  for (int l : labels) {
    if (l == blank) throw DataError("CTC target contains the blank symbol");
    if (l < 0 || static_cast<std::size_t>(l) >= vocab)
      throw DataError("CTC target index " + std::to_string(l) +
                      " outside vocabulary of " + std::to_string(vocab));
  }
  if (frames == 0 || frames < ctc_min_frames(labels))
    throw DataError("target unalignable: " + std::to_string(labels.size()) +
                    " labels need " + std::to_string(ctc_min_frames(labels)) +
                    " frames, have " + std::to_string(frames));

  // Extended sequence: blank, l1, blank, l2, ..., blank.
  const std::size_t states = 2 * labels.size() + 1;
  std::vector<int> ext(states, blank);
  for (std::size_t i = 0; i < labels.size(); ++i) ext[2 * i + 1] = labels[i];
  auto can_skip = [&](std::size_t s) {
    return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];
  };

  std::vector<double> alpha(frames * states, kNegInf);
  alpha[0] = log_probs.at(0, ext[0]);
  if (states > 1) alpha[1] = log_probs.at(0, ext[1]);
  for (std::size_t u = 1; u < frames; ++u) {
    for (std::size_t s = 0; s < states; ++s) {
      double a = alpha[(u - 1) * states + s];
      if (s >= 1) a = log_add(a, alpha[(u - 1) * states + s - 1]);
      if (can_skip(s)) a = log_add(a, alpha[(u - 1) * states + s - 2]);
      if (a != kNegInf) alpha[u * states + s] = a + log_probs.at(u, ext[s]);
    }
  }
  const std::size_t last = (frames - 1) * states;
  double total = alpha[last + states - 1];
  if (states > 1) total = log_add(total, alpha[last + states - 2]);

  CtcResult result;
  result.log_prob = total;
  if (!with_occupancy) return result;

  std::vector<double> beta(frames * states, kNegInf);
  beta[last + states - 1] = log_probs.at(frames - 1, ext[states - 1]);
  if (states > 1)
    beta[last + states - 2] = log_probs.at(frames - 1, ext[states - 2]);
  for (std::size_t u = frames - 1; u-- > 0;) {
    for (std::size_t s = 0; s < states; ++s) {
      double b = beta[(u + 1) * states + s];
      if (s + 1 < states) b = log_add(b, beta[(u + 1) * states + s + 1]);
      if (s + 2 < states && can_skip(s + 2))
        b = log_add(b, beta[(u + 1) * states + s + 2]);
      if (b != kNegInf) beta[u * states + s] = b + log_probs.at(u, ext[s]);
    }
  }

  // alpha and beta both include the emission at frame u, so
  // gamma(u, s) = alpha + beta - log_probs(u, ext[s]) - total.
  result.occupancy = Tensor::zeros({frames, vocab});
  for (std::size_t u = 0; u < frames; ++u) {
    for (std::size_t s = 0; s < states; ++s) {
      double ab = alpha[u * states + s] + beta[u * states + s];
      if (!std::isfinite(ab)) continue;
      result.occupancy.at(u, ext[s]) +=
          std::exp(ab - log_probs.at(u, ext[s]) - total);
    }
  }
  return result;
}

}  // namespace semiasr
