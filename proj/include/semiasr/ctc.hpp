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

#include <span>

#include "semiasr/tensor.hpp"

namespace semiasr {

struct CtcResult {
  double log_prob = 0.0;
  // d log_prob / d log_probs(u, k), i.e. per-frame label occupancy. Empty
  // unless requested.
  Tensor occupancy;
};

// Minimum number of frames needed to emit labels: one per label plus one
// blank between each pair of equal neighbours.
std::size_t ctc_min_frames(std::span<const int> labels);

// Forward-backward over the blank-augmented label sequence in log space.
// Throws DataError("target unalignable ...") when log_probs has fewer rows
// than ctc_min_frames(labels), and when labels contain blank.
CtcResult ctc_forward_backward(const Tensor& log_probs,
                               std::span<const int> labels, int blank,
                               bool with_occupancy);

}  // namespace semiasr
